#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tn/figures.hpp"
#include "tn/random.hpp"

namespace {

std::vector<double> walk(std::uint64_t seed, std::size_t len, double start = 100.0) {
    tn::Rng rng(seed);
    std::vector<double> y(len);
    double v = start;
    for (auto& x : y) x = (v += 0.3 * rng.normal());
    return y;
}

tn::Network bundle(std::uint64_t seed, std::size_t len = 600) {
    return tn::build_network(walk(seed, len), tn::compute_schedule({2, 60, 5, 200, 1.0}), {1});
}

tn::CurveSchedule single(std::size_t n) {
    tn::CurveSchedule s;
    s.params = {1, 1, n, n, 0.0};
    s.windows = {n};
    return s;
}

TEST(DensityField, SingleCurveHasUnitColumnMass) {
    const auto y = walk(1, 300);
    const auto net = tn::build_network(y, single(20), {1});
    const auto field = tn::density_field(net, {100, 300}, {128});
    for (std::size_t c = 0; c < field.columns(); ++c) {
        EXPECT_NEAR(field.column_mass(c), 1.0, 1e-9);
        const double pos = field.to_bin(net.value(0, 100 + c));
        for (std::size_t r = 0; r < field.rows(); ++r) {
            if (field.at(c, r) == 0.0) continue;
            // occupied cells lie on the curve's own vertical extent in the column
            const double prev = net.value(0, 100 + c - 1);
            const double next = 100 + c + 1 < 300 ? net.value(0, 100 + c + 1) : net.value(0, 100 + c);
            const double lo = std::min({field.to_bin(0.5 * (prev + net.value(0, 100 + c))), field.to_bin(0.5 * (next + net.value(0, 100 + c))), pos});
            const double hi = std::max({field.to_bin(0.5 * (prev + net.value(0, 100 + c))), field.to_bin(0.5 * (next + net.value(0, 100 + c))), pos});
            EXPECT_GE(static_cast<double>(r) + 1.0, lo - 1.0);
            EXPECT_LE(static_cast<double>(r), hi + 1.0);
        }
    }
}

TEST(DensityField, CoincidentCurvesAreAdditive) {
    const auto y = walk(2, 300);
    tn::CurveSchedule many;
    many.params = {1, 5, 20, 20, 0.0};
    many.windows.assign(5, 20);
    const auto one = tn::density_field(tn::build_network(y, single(20), {1}), {50, 300}, {128});
    const auto five = tn::density_field(tn::build_network(y, many, {1}), {50, 300}, {128});
    for (std::size_t c = 0; c < one.columns(); ++c) {
        const auto a = one.column(c);
        const auto b = five.column(c);
        EXPECT_NEAR(*std::max_element(b.begin(), b.end()), 5.0 * *std::max_element(a.begin(), a.end()), 1e-9);
    }
}

TEST(DensityField, CountingOracleWithoutSplat) {
    const auto net = bundle(3);
    const tn::ViewWindow view{250, 600};
    const auto field = tn::density_field(net, view, {200, tn::Splat::none});
    // brute force: min/max over the view, then bin every exact ordinate
    double lo = 1e300, hi = -1e300;
    for (std::size_t k = 0; k < net.curve_count(); ++k)
        for (std::size_t t = view.first; t < view.end; ++t) {
            lo = std::min(lo, net.value(k, t));
            hi = std::max(hi, net.value(k, t));
        }
    for (std::size_t c = 0; c < field.columns(); ++c) {
        std::vector<double> hist(200, 0.0);
        for (std::size_t k = 0; k < net.curve_count(); ++k) {
            const double f = (net.value(k, view.first + c) - lo) / (hi - lo) * 200.0;
            hist[std::min<std::size_t>(199, static_cast<std::size_t>(f))] += 1.0;
        }
        for (std::size_t r = 0; r < 200; ++r) ASSERT_EQ(field.at(c, r), hist[r]) << c << "," << r;
    }
}

TEST(DensityField, ColumnMassEqualsDefinedCurves) {
    const auto net = bundle(4);
    const auto field = tn::density_field(net, {0, 600}, {256});
    for (std::size_t c = 0; c < field.columns(); ++c) {
        EXPECT_EQ(field.defined(c), net.defined_count(c));
        EXPECT_NEAR(field.column_mass(c), static_cast<double>(net.defined_count(c)), 1e-6);
    }
    EXPECT_THROW(tn::density_field(net, {0, 3}, {256}), tn::EmptyView);
    EXPECT_THROW(tn::density_field(net, {10, 10}, {256}), tn::EmptyView);
    EXPECT_THROW(tn::density_field(net, {0, 600}, {32}), tn::ConfigError);
}

// Flat background plus one Gaussian ridge whose crest follows a known line.
tn::DensityField ridge_field(double& slope, double& intercept) {
    tn::DensityField f(0, 200, 256, 0.0, 256.0);
    slope = 0.3;
    intercept = 60.0;
    for (std::size_t c = 0; c < 200; ++c) {
        const double crest = intercept + slope * static_cast<double>(c);
        for (std::size_t r = 0; r < 256; ++r) {
            const double d = static_cast<double>(r) + 0.5 - crest;
            f.at(c, r) = 1.0 + 8.0 * std::exp(-0.5 * d * d / 4.0);
        }
        f.defined(c) = 300;
    }
    return f;
}

TEST(Figures, GaussianRidgeGivesOneCordAlongTheCrest) {
    double slope, intercept;
    const auto field = ridge_field(slope, intercept);
    const auto figs = tn::detect_figures(field);
    ASSERT_EQ(figs.size(), 1u);
    EXPECT_EQ(figs[0].kind, tn::FigureKind::cord);
    EXPECT_EQ(figs[0].span(), 200u);
    for (const auto& p : figs[0].ridge) EXPECT_NEAR(p.ordinate, intercept + slope * p.column, 0.5);
    EXPECT_GT(figs[0].markedness, 0.0);
}

TEST(Figures, UniformFieldHasNoFigures) {
    tn::DensityField f(0, 100, 128, 0.0, 1.0);
    for (std::size_t c = 0; c < 100; ++c) {
        for (std::size_t r = 0; r < 128; ++r) f.at(c, r) = 3.0;
        f.defined(c) = 384;
    }
    EXPECT_TRUE(tn::detect_figures(f).empty());
}

TEST(Figures, HardFlatTopGivesOneUpperEnvelope) {
    // Bundle occupying rows [bottom(c), 180) with curves piling up under a
    // flat ceiling; the floor zig-zags too fast to be an envelope.
    tn::DensityField f(0, 150, 256, 0.0, 256.0);
    for (std::size_t c = 0; c < 150; ++c) {
        const std::size_t bottom = (c % 2) ? 40 : 52;
        for (std::size_t r = bottom; r < 180; ++r) f.at(c, r) = 2.0;
        for (std::size_t r = 176; r < 180; ++r) f.at(c, r) = 6.0;
        f.defined(c) = 300;
    }
    const auto figs = tn::detect_figures(f);
    std::size_t upper = 0, lower = 0;
    for (const auto& g : figs) {
        if (g.kind != tn::FigureKind::envelope) continue;
        (g.side == tn::FigureSide::upper ? upper : lower) += 1;
        if (g.side == tn::FigureSide::upper) {
            EXPECT_EQ(g.span(), 150u);
            for (const auto& p : g.ridge) EXPECT_NEAR(p.ordinate, 180.0, 4.0);
        }
    }
    EXPECT_EQ(upper, 1u);
    EXPECT_EQ(lower, 0u);
}

TEST(Figures, InvariantsOnRealisticBundles) {
    for (std::uint64_t seed = 10; seed < 16; ++seed) {
        const auto net = bundle(seed, 700);
        const auto field = tn::density_field(net, {300, 700}, {256, tn::Splat::segment, 20});
        const tn::FigureParams params;
        const auto figs = tn::detect_figures(field, params);
        std::vector<const tn::CharacteristicFigure*> envelopes;
        for (const auto& f : figs)
            if (f.kind == tn::FigureKind::envelope) envelopes.push_back(&f);
        for (std::size_t i = 0; i < figs.size(); ++i) {
            const auto& f = figs[i];
            EXPECT_EQ(f.id, i);
            EXPECT_GT(f.markedness, 0.0);
            ASSERT_TRUE(f.is_short.has_value());
            EXPECT_GE(f.span(), params.min_span(400));
            for (std::size_t j = 1; j < f.ridge.size(); ++j) EXPECT_LT(f.ridge[j - 1].column, f.ridge[j].column);
            if (i > 0) EXPECT_GE(figs[i - 1].markedness, f.markedness);
            if (f.kind == tn::FigureKind::boltrope) {
                // within zeta bins of some envelope on average
                bool near = false;
                for (const auto* e : envelopes) {
                    double sum = 0.0;
                    int n = 0;
                    for (const auto& p : f.ridge)
                        if (auto o = e->ordinate_at(p.column)) {
                            sum += std::abs(*o - p.ordinate) / field.bin_height();
                            ++n;
                        }
                    if (n && sum / n <= params.boltrope_proximity + 1e-9) near = true;
                }
                EXPECT_TRUE(near);
            }
        }
    }
}

TEST(Figures, RaisingRhoNeverAddsCords) {
    for (std::uint64_t seed = 20; seed < 26; ++seed) {
        const auto field = tn::density_field(bundle(seed, 700), {300, 700}, {256});
        std::size_t prev = SIZE_MAX;
        for (double rho : {1.2, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0}) {
            tn::FigureParams p;
            p.peak_factor = rho;
            std::size_t cords = 0;
            for (const auto& f : tn::detect_figures(field, p))
                if (f.kind != tn::FigureKind::envelope) ++cords;
            EXPECT_LE(cords, prev) << "rho " << rho;
            prev = cords;
        }
    }
}

TEST(Figures, DeterministicAndAffineEquivariant) {
    const auto y = walk(30, 700);
    const auto schedule = tn::compute_schedule({3, 60, 7, 200, 1.0});
    const tn::ViewWindow view{300, 700};
    const auto base = tn::detect_figures(tn::density_field(tn::build_network(y, schedule, {1}), view));
    EXPECT_EQ(base.size(), tn::detect_figures(tn::density_field(tn::build_network(y, schedule, {2}), view)).size());
    ASSERT_FALSE(base.empty());
    for (double alpha : {0.5, 10.0}) {
        for (double beta : {-3.0, 7.0}) {
            std::vector<double> z(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) z[i] = alpha * y[i] + beta;
            const auto figs = tn::detect_figures(tn::density_field(tn::build_network(z, schedule, {1}), view));
            ASSERT_EQ(figs.size(), base.size());
            for (std::size_t i = 0; i < figs.size(); ++i) {
                EXPECT_EQ(figs[i].kind, base[i].kind);
                EXPECT_EQ(figs[i].span(), base[i].span());
                ASSERT_EQ(figs[i].ridge.size(), base[i].ridge.size());
                for (std::size_t j = 0; j < figs[i].ridge.size(); ++j)
                    EXPECT_NEAR(figs[i].ridge[j].ordinate, alpha * base[i].ridge[j].ordinate + beta,
                                1e-8 * std::abs(alpha * base[i].ridge[j].ordinate + beta));
            }
        }
    }
}

tn::CharacteristicFigure line_figure(std::size_t n, double slope, double c0 = 10.0) {
    tn::CharacteristicFigure f;
    for (std::size_t i = 0; i < n; ++i) f.ridge.push_back({c0 + i, 50.0 + slope * i});
    f.markedness = 1.0;
    return f;
}

TEST(Extrapolation, StraightRidge) {
    const auto f = line_figure(30, 0.75);
    const auto proj = tn::extrapolate_figure(f, 12, 1);
    ASSERT_EQ(proj.size(), 12u);
    EXPECT_NEAR(proj.back().ordinate, f.ridge.back().ordinate + 0.75 * 12, 1e-9);
    EXPECT_EQ(proj.front().column, f.ridge.back().column + 1);
    EXPECT_TRUE(tn::extrapolate_figure(f, 0, 1).empty());
    EXPECT_THROW(tn::extrapolate_figure(line_figure(2, 1.0), 5), tn::SpanTooShort);
    EXPECT_THROW(tn::extrapolate_figure(f, 5, 3), tn::ConfigError);
}

TEST(Extrapolation, QuadraticRidgeMatchesBatchFit) {
    tn::CharacteristicFigure f;
    tn::Rng rng(9);
    for (std::size_t i = 0; i < 45; ++i) {
        const double x = static_cast<double>(i);
        f.ridge.push_back({100.0 + x, 20.0 + 0.4 * x - 0.01 * x * x + 0.05 * rng.normal()});
    }
    const auto proj = tn::extrapolate_figure(f, 20, 2);
    std::vector<double> xs, ys, xe;
    for (std::size_t i = 30; i < 45; ++i) {
        xs.push_back(f.ridge[i].column);
        ys.push_back(f.ridge[i].ordinate);
    }
    for (const auto& p : proj) xe.push_back(p.column);
    const auto ref = oracle::polyfit_eval(xs, ys, 2, xe);
    for (std::size_t i = 0; i < proj.size(); ++i) EXPECT_NEAR(proj[i].ordinate, ref[i], 1e-6);
}

}  // namespace
