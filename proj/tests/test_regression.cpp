#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tn/random.hpp"
#include "tn/rolling_regression.hpp"

namespace {

std::vector<double> random_walk(tn::Rng& rng, std::size_t len, double start = 100.0, double step = 0.5) {
    std::vector<double> y(len);
    double v = start;
    for (auto& x : y) {
        v += step * rng.normal();
        if (v < 10.0) v = 20.0 - v;
        x = v;
    }
    return y;
}

TEST(RollingRegression, ConstantSeriesIsReproduced) {
    const std::vector<double> y(300, 42.5);
    for (int d = 1; d <= 5; ++d) {
        for (std::size_t n : {7u, 19u, 120u}) {
            const auto out = tn::rolling_regression_last(y, n, d);
            ASSERT_EQ(out.size(), y.size() - n + 1);
            for (double v : out) ASSERT_NEAR(v, 42.5, 1e-9);
        }
    }
}

TEST(RollingRegression, LinearSeriesIsExactForLinearFit) {
    std::vector<double> y(500);
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = 3.0 * static_cast<double>(t) + 1.0;
    for (std::size_t n : {3u, 10u, 77u, 256u}) {
        const auto out = tn::rolling_regression_last(y, n, 1);
        for (std::size_t j = 0; j < out.size(); ++j) ASSERT_NEAR(out[j], y[j + n - 1], 1e-9 * y[j + n - 1]);
    }
}

TEST(RollingRegression, PolynomialDataOfOrderDIsReproduced) {
    std::vector<double> y(400);
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double x = static_cast<double>(t) / 100.0;
        y[t] = 50.0 + 2.0 * x - 1.5 * x * x + 0.3 * x * x * x;
    }
    const auto out = tn::rolling_regression_last(y, 41, 3);
    for (std::size_t j = 0; j < out.size(); ++j) ASSERT_NEAR(out[j], y[j + 40], 1e-9 * std::abs(y[j + 40]));
}

TEST(RollingRegression, MatchesDenseLeastSquares) {
    tn::Rng rng(2024);
    const auto y = random_walk(rng, 1500);
    const auto out = tn::rolling_regression_last(y, 37, 4);
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double ref = oracle::last_point_fit(y, j + 36, 37, 4);
        ASSERT_NEAR(out[j], ref, 1e-8 * std::abs(ref)) << "index " << j + 36;
    }
}

TEST(RollingRegression, RandomCasesAcrossOrdersAndWindows) {
    tn::Rng rng(99);
    for (int trial = 0; trial < 150; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(5));
        const std::size_t n = 7 + rng.below(3000);
        const auto y = random_walk(rng, n + rng.below(6000));
        const auto out = tn::rolling_regression_last(y, n, d);
        for (std::size_t j : {std::size_t{0}, out.size() / 2, out.size() - 1}) {
            const double ref = oracle::last_point_fit(y, j + n - 1, n, d);
            ASSERT_NEAR(out[j], ref, 1e-8 * std::abs(ref)) << "n=" << n << " D=" << d << " j=" << j;
        }
    }
}

TEST(RollingRegression, WindowTooSmall) {
    const std::vector<double> y(50, 1.0);
    EXPECT_THROW(tn::rolling_regression_last(y, 6, 5), tn::WindowTooSmall);
    EXPECT_THROW(tn::rolling_regression_last(y, 2, 1), tn::WindowTooSmall);
    EXPECT_NO_THROW(tn::rolling_regression_last(y, 7, 5));
    EXPECT_THROW(tn::rolling_regression_last(y, 60, 2), tn::SeriesTooShort);
}

TEST(RollingRegression, AffineEquivariance) {
    tn::Rng rng(5);
    const auto y = random_walk(rng, 2000);
    for (double alpha : {-2.0, 0.5, 10.0}) {
        std::vector<double> z(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) z[i] = alpha * y[i] + 3.0;
        for (int d : {1, 3, 5}) {
            const auto a = tn::rolling_regression_last(y, 333, d);
            const auto b = tn::rolling_regression_last(z, 333, d);
            for (std::size_t j = 0; j < a.size(); ++j) {
                const double expect = alpha * a[j] + 3.0;
                ASSERT_NEAR(b[j], expect, 1e-10 * std::abs(expect));
            }
        }
    }
}

TEST(RollingRegression, CausalityIsBitExact) {
    tn::Rng rng(8);
    const auto y = random_walk(rng, 3000);
    const auto full = tn::rolling_regression_last(y, 500, 3);
    for (std::size_t cut : {500u, 777u, 1623u, 2999u}) {
        const std::vector<double> prefix(y.begin(), y.begin() + cut);
        const auto part = tn::rolling_regression_last(prefix, 500, 3);
        for (std::size_t j = 0; j < part.size(); ++j) ASSERT_EQ(part[j], full[j]);
    }
}

TEST(RollingRegression, FilterTapsReproduceFit) {
    tn::Rng rng(3);
    const auto y = random_walk(rng, 400);
    tn::RollingPolyFit fit(64, 2);
    const auto taps = fit.filter_taps();
    const double direct = fit.reset(y, 300);
    double conv = 0.0;
    for (std::size_t i = 0; i < taps.size(); ++i) conv += taps[i] * y[300 - 63 + i];
    EXPECT_NEAR(direct, conv, 1e-10 * std::abs(direct));
}

}  // namespace
