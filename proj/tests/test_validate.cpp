#include <gtest/gtest.h>

#include <cmath>

#include "fixture_config.hpp"
#include "oracles.hpp"
#include "tn/validate.hpp"

namespace {

/// Ordinate of a ridge at a column by scanning its segments.
std::optional<double> ridge_at(const tn::CharacteristicFigure& f, double col) {
    for (std::size_t s = 0; s + 1 < f.ridge.size(); ++s) {
        const auto& a = f.ridge[s];
        const auto& b = f.ridge[s + 1];
        if (col >= a.column && col <= b.column)
            return a.ordinate + (b.ordinate - a.ordinate) * (col - a.column) / (b.column - a.column);
    }
    if (f.ridge.size() == 1 && f.ridge[0].column == col) return f.ridge[0].ordinate;
    return std::nullopt;
}

std::size_t rescore_count(const tn::Chart& ch, double delta, double tau) {
    const double range = ch.range.span();
    std::size_t hits = 0;
    for (const auto& e : ch.extrema) {
        const double y = e.ordinate + delta * range;
        double any = INFINITY, pref = INFINITY;
        for (const auto& f : ch.figures) {
            const auto o = ridge_at(f, static_cast<double>(e.index));
            if (!o) continue;
            const double d = std::abs(y - *o) / range;
            any = std::min(any, d);
            if (f.side == (e.kind == tn::ExtremumKind::max ? tn::FigureSide::upper : tn::FigureSide::lower))
                pref = std::min(pref, d);
        }
        if ((pref <= tau ? pref : any) <= tau) ++hits;
    }
    return hits;
}

tn::Instrument constant_instrument(std::size_t minutes_of_ticks) {
    tn::Instrument inst{"FLAT", {}};
    for (std::size_t i = 0; i < minutes_of_ticks; ++i)
        inst.ticks.push_back({static_cast<tn::Timestamp>(i) * 60'000, 50.0, 1.0});
    return inst;
}

tn::CharacteristicFigure line(std::size_t id, double y, double c0, double c1, double mark) {
    tn::CharacteristicFigure f;
    f.id = id;
    f.markedness = mark;
    f.ridge = {{c0, y}, {c1, y}};
    return f;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(ShiftTest, ZeroDeltaEqualsQualifyCount) {
    const auto& ch = fixture::chart().chart;
    const std::vector<double> deltas{0.0};
    const auto r = tn::shift_test(ch, deltas, fixture::config().chart.tau);
    EXPECT_EQ(r.base_count, ch.result.interacting_count);
    EXPECT_EQ(r.counts, std::vector<std::size_t>{ch.result.interacting_count});
}

TEST(ShiftTest, FixtureCountsMatchRescoringOracle) {
    const auto& ch = fixture::chart().chart;
    const double tau = fixture::config().chart.tau;
    const auto& e = fixture::expected()["shift"];
    const auto deltas = e["deltas"].get<std::vector<double>>();
    const auto r = tn::shift_test(ch, deltas, tau);
    EXPECT_EQ(r.counts, e["counts"].get<std::vector<std::size_t>>());
    for (std::size_t i = 0; i < deltas.size(); ++i) EXPECT_EQ(r.counts[i], rescore_count(ch, deltas[i], tau)) << deltas[i];
    // the bundled chart sits better on its figures than the shifted copies do
    double shifted = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i)
        if (deltas[i] != 0.0) shifted += static_cast<double>(r.counts[i]);
    EXPECT_GT(static_cast<double>(r.base_count), shifted / static_cast<double>(deltas.size() - 1));
}

TEST(ShiftTest, NoFiguresGivesZeros) {
    auto ch = fixture::chart().chart;
    ch.figures.clear();
    const std::vector<double> deltas{0.0, 0.01, -0.05};
    const auto r = tn::shift_test(ch, deltas, 0.02);
    EXPECT_EQ(r.counts, (std::vector<std::size_t>{0, 0, 0}));
}

TEST(ShiftTest, DeltasMustIncludeZero) {
    const std::vector<double> deltas{0.01, -0.01};
    EXPECT_THROW((void)tn::shift_test(fixture::chart().chart, deltas, 0.02), tn::ConfigError);
}

// ---------------------------------------------------------------------------

TEST(Binomial, MatchesArbitraryPrecisionOracle) {
    for (unsigned n : {1u, 2u, 5u, 10u, 20u, 37u, 60u, 100u, 250u}) {
        for (double p : {0.5, 0.37, 0.1, 0.01, 0.001}) {
            for (unsigned k = 0; k <= n; k += (n > 40 ? 7 : 1)) {
                const oracle::big want = oracle::binomial_upper_tail(n, k, oracle::big(p));
                if (want < oracle::big(1e-300)) continue;
                const double got = tn::binomial_upper_tail(n, k, p);
                const double w = want.convert_to<double>();
                EXPECT_LE(std::abs(got - w), 1e-12 * w) << "n " << n << " k " << k << " p " << p;
            }
        }
    }
    EXPECT_EQ(tn::binomial_upper_tail(5, 6, 0.3), 0.0);
    EXPECT_EQ(tn::binomial_upper_tail(5, 0, 0.3), 1.0);
}

TEST(Binomial, AllTenQualifyAtOneInAThousand) {
    const double p = tn::binomial_upper_tail(10, 10, 0.001);
    EXPECT_NEAR(p, 1e-30, 1e-42);
    tn::ProtocolReport rep;
    rep.charts.resize(10);
    for (auto& c : rep.charts) c.result.qualifies = true;
    const std::vector<double> eps{0.001};
    rep.finalize(eps);
    EXPECT_NEAR(rep.p_values[0], 1e-30, 1e-42);
    EXPECT_NEAR(rep.joint_all_qualify[0], 1e-30, 1e-42);
}

// ---------------------------------------------------------------------------

TEST(Simultaneity, NeedsTwoInstruments) {
    const auto cfg = fixture::config();
    const std::vector<tn::Instrument> one{fixture::alpha()};
    EXPECT_THROW((void)tn::run_simultaneity(one, tn::default_date(one), cfg.protocol()), tn::ConfigError);
}

TEST(Simultaneity, FixtureReportMatchesHandAggregation) {
    const auto cfg = fixture::config();
    const auto universe = tn::load_universe(cfg);
    ASSERT_EQ(universe.size(), 10u);
    const auto date = tn::default_date(universe);
    const auto pc = cfg.protocol();
    const auto rep = tn::run_simultaneity(universe, date, pc);
    ASSERT_EQ(rep.charts.size(), universe.size());
    EXPECT_TRUE(rep.errors.empty());

    tn::Rng rng(pc.seed);
    std::size_t qualified = 0;
    for (std::size_t i = 0; i < universe.size(); ++i) {
        const int subtype = 1 + static_cast<int>(rng.below(5));
        const auto bars = tn::bars_before(universe[i], pc.resolution, date);
        const auto run = tn::analyze_latest(bars, pc.schedule(subtype), pc.chart);
        EXPECT_EQ(rep.charts[i].instrument, universe[i].name);
        EXPECT_EQ(rep.charts[i].subtype, subtype);
        EXPECT_EQ(rep.charts[i].result.interacting_count, run.chart.result.interacting_count);
        EXPECT_EQ(rep.charts[i].result.extremum_count, run.chart.result.extremum_count);
        // the last bucket opens before the date and closes at or after it
        EXPECT_LT(rep.charts[i].end_time - pc.resolution * 60'000, date);
        EXPECT_GE(rep.charts[i].end_time, date);
        qualified += run.chart.result.qualifies ? 1 : 0;
    }
    EXPECT_EQ(rep.qualified, qualified);
    EXPECT_EQ(rep.qualified, fixture::expected()["simultaneity"]["qualified"].get<std::size_t>());
    for (std::size_t e = 0; e < pc.epsilons.size(); ++e) {
        const double want =
            oracle::binomial_upper_tail(10, static_cast<unsigned>(qualified), oracle::big(pc.epsilons[e])).convert_to<double>();
        EXPECT_LE(std::abs(rep.p_values[e] - want), 1e-12 * want);
    }
}

TEST(Simultaneity, MissingHistoryIsReportedNotFatal) {
    const auto cfg = fixture::config();
    std::vector<tn::Instrument> universe{fixture::alpha(), constant_instrument(30)};
    const auto rep = tn::run_simultaneity(universe, tn::default_date(universe), cfg.protocol());
    EXPECT_EQ(rep.charts.size(), 1u);
    ASSERT_EQ(rep.errors.size(), 1u);
    EXPECT_NE(rep.errors[0].find("FLAT"), std::string::npos);
}

// ---------------------------------------------------------------------------

TEST(Totality, TwentyVerdictsMatchPerChartRuns) {
    const auto cfg = fixture::config();
    const auto& inst = fixture::alpha();
    const auto date = tn::default_date(std::span(&inst, 1));
    const auto pc = cfg.protocol();
    const auto rep = tn::run_totality(inst, date, pc);
    ASSERT_EQ(rep.charts.size(), 20u);
    std::size_t k = 0, qualified = 0;
    for (int subtype = 1; subtype <= 5; ++subtype) {
        for (int minutes : pc.resolutions) {
            const auto run = tn::analyze_latest(tn::bars_before(inst, minutes, date), pc.schedule(subtype), pc.chart);
            const auto& c = rep.charts[k++];
            EXPECT_EQ(c.subtype, subtype);
            EXPECT_EQ(c.resolution, minutes);
            EXPECT_EQ(c.result.interacting_count, run.chart.result.interacting_count);
            EXPECT_EQ(c.result.verdict, run.chart.result.verdict);
            qualified += run.chart.result.qualifies ? 1 : 0;
        }
    }
    EXPECT_EQ(rep.qualified, qualified);
    EXPECT_EQ(rep.qualified, fixture::expected()["totality"]["qualified"].get<std::size_t>());
}

TEST(Totality, ShortInstrumentRaisesInsufficientHistory) {
    const auto cfg = fixture::config();
    const auto universe = tn::load_universe(cfg);
    EXPECT_THROW((void)tn::run_totality(universe.front(), tn::default_date(universe), cfg.protocol()),
                 tn::InsufficientHistory);
}

// ---------------------------------------------------------------------------

TEST(Consecutiveness, WindowsAreAdjacentAndDisjoint) {
    const auto w = tn::adjacent_windows(5000, 100, 20);
    ASSERT_EQ(w.size(), 20u);
    EXPECT_EQ(w.back().end, 5000u);
    for (std::size_t i = 0; i < w.size(); ++i) {
        EXPECT_EQ(w[i].size(), 100u);
        if (i) EXPECT_EQ(w[i].first, w[i - 1].end);
    }
}

TEST(Consecutiveness, SingleWindowEqualsLatestChart) {
    const auto cfg = fixture::config();
    const auto& inst = fixture::alpha();
    const auto rep = tn::run_consecutiveness(inst, 10, 3, 1, tn::default_date(std::span(&inst, 1)), cfg.protocol());
    ASSERT_EQ(rep.charts.size(), 1u);
    EXPECT_EQ(rep.charts[0].result.interacting_count, fixture::chart().chart.result.interacting_count);
    EXPECT_EQ(rep.charts[0].result.extremum_count, fixture::chart().chart.result.extremum_count);
    EXPECT_THROW((void)tn::run_consecutiveness(inst, 10, 3, 0, 0, cfg.protocol()), tn::ConfigError);
}

TEST(Consecutiveness, TwentyWindowsOnOneNetwork) {
    const auto cfg = fixture::config();
    const auto& inst = fixture::alpha();
    const auto rep = tn::run_consecutiveness(inst, 10, 3, 20, tn::default_date(std::span(&inst, 1)), cfg.protocol());
    ASSERT_EQ(rep.charts.size(), 20u);
    for (std::size_t i = 1; i < rep.charts.size(); ++i) {
        EXPECT_EQ(rep.charts[i].view.first, rep.charts[i - 1].view.end);
        EXPECT_GT(rep.charts[i].end_time, rep.charts[i - 1].end_time);
    }
    // the last window is the latest chart
    EXPECT_EQ(rep.charts.back().result.interacting_count, fixture::chart().chart.result.interacting_count);
}

// ---------------------------------------------------------------------------

TEST(Surrogate, RequiresTwentySeeds) {
    const auto cfg = fixture::config();
    const std::vector methods{tn::SurrogateMethod::shuffled_returns};
    EXPECT_THROW((void)tn::surrogate_comparison(fixture::chart().bars, "ALPHA", 3, methods, 19, cfg.protocol()),
                 tn::ConfigError);
}

TEST(Surrogate, ZeroVarianceSeriesIsNotAssessable) {
    const auto cfg = fixture::config();
    const auto inst = constant_instrument(10 * 400);
    const auto bars = tn::bars_before(inst, 10, 10 * 400 * 60'000);
    const std::vector methods{tn::SurrogateMethod::shuffled_returns, tn::SurrogateMethod::phase_randomized};
    const auto rep = tn::surrogate_comparison(bars, "FLAT", 3, methods, 20, cfg.protocol(), 1, 1);
    EXPECT_EQ(rep.real.verdict, tn::Verdict::not_assessable);
    for (const auto& m : rep.methods) {
        EXPECT_EQ(m.assessable, 0u);
        EXPECT_EQ(m.rate, 0.0);
    }
}

TEST(Surrogate, EachSeedMatchesAnIndependentRerun) {
    const auto cfg = fixture::config();
    const auto pc = cfg.protocol();
    const auto& bars = fixture::chart().bars;
    const std::vector methods{tn::SurrogateMethod::shuffled_returns, tn::SurrogateMethod::phase_randomized};
    const auto rep = tn::surrogate_comparison(bars, "ALPHA", 3, methods, 20, pc, 7, 2);
    EXPECT_EQ(rep.real.interacting_count, fixture::chart().chart.result.interacting_count);
    ASSERT_EQ(rep.methods.size(), 2u);
    for (const auto& m : rep.methods) {
        ASSERT_EQ(m.runs.size(), 20u);
        std::size_t q = 0;
        for (std::size_t s = 0; s < m.runs.size(); ++s) {
            EXPECT_EQ(m.runs[s].seed, 7 + s);
            const auto sur = tn::make_surrogate(bars, m.method, m.runs[s].seed);
            const auto one = tn::analyze_latest(sur, pc.schedule(3), pc.chart);
            EXPECT_EQ(m.runs[s].result.interacting_count, one.chart.result.interacting_count);
            EXPECT_EQ(m.runs[s].result.extremum_count, one.chart.result.extremum_count);
            q += one.chart.result.qualifies ? 1 : 0;
        }
        EXPECT_DOUBLE_EQ(m.rate, static_cast<double>(q) / 20.0);
    }
    // thread count does not change the report
    const auto serial = tn::surrogate_comparison(bars, "ALPHA", 3, methods, 20, pc, 7, 1);
    EXPECT_EQ(tn::surrogate_to_json(serial).dump(), tn::surrogate_to_json(rep).dump());
}

// ---------------------------------------------------------------------------

TEST(TopologyOverlap, IdenticalAndDisjointSets) {
    const std::vector a{line(0, 10.0, 0, 50, 3.0), line(1, 20.0, 10, 80, 1.0)};
    const std::vector far{line(0, 60.0, 0, 50, 3.0), line(1, 90.0, 10, 80, 1.0)};
    const tn::ColumnMap id;
    EXPECT_DOUBLE_EQ(tn::topology_overlap(a, a, id, 100.0, 0.02), 1.0);
    EXPECT_DOUBLE_EQ(tn::topology_overlap(a, far, id, 100.0, 0.02), 0.0);
    // columns that never meet under the map
    EXPECT_DOUBLE_EQ(tn::topology_overlap(a, a, {1.0, 1000.0}, 100.0, 0.5), 0.0);
}

TEST(TopologyOverlap, RankWeightingAndSymmetry) {
    // only the more marked figure of `a` finds a partner: weight 1 / (1 + 1/2)
    const std::vector a{line(0, 10.0, 0, 50, 3.0), line(1, 20.0, 10, 80, 1.0)};
    const std::vector b{line(5, 10.5, 0, 60, 1.0)};
    const double ab = tn::topology_overlap(a, b, {}, 100.0, 0.01);
    EXPECT_NEAR(ab, 0.5 * (1.0 / 1.5 + 1.0), 1e-15);
    EXPECT_DOUBLE_EQ(ab, tn::topology_overlap(b, a, {}, 100.0, 0.01));
    EXPECT_THROW((void)tn::topology_overlap({}, b, {}, 100.0, 0.01), tn::EmptyFigureSet);
    EXPECT_THROW((void)tn::topology_overlap(a, {}, {}, 100.0, 0.01), tn::EmptyFigureSet);
    EXPECT_THROW((void)tn::topology_overlap(a, b, {0.0, 0.0}, 100.0, 0.01), tn::ConfigError);
}

TEST(TopologyOverlap, FixtureSubtypesMatchBruteForce) {
    const auto cfg = fixture::config();
    const auto r1 = tn::run_chart(cfg, fixture::alpha(), {"ALPHA", 10, 1});
    const auto r2 = tn::run_chart(cfg, fixture::alpha(), {"ALPHA", 10, 2});
    const auto& a = r1.chart;
    const auto& b = r2.chart;
    const tn::ColumnMap map{1.0, static_cast<double>(b.view.first) - static_cast<double>(a.view.first)};
    const double range = a.range.span();
    const double tau = cfg.chart.tau;

    auto share = [&](const std::vector<tn::CharacteristicFigure>& from, const std::vector<tn::CharacteristicFigure>& to,
                     double offset) {
        std::vector<double> marks;
        for (const auto& f : from) marks.push_back(f.markedness);
        double matched = 0.0, total = 0.0;
        for (std::size_t i = 0; i < from.size(); ++i) {
            std::size_t rank = 0;
            for (std::size_t j = 0; j < from.size(); ++j)
                if (marks[j] > marks[i] || (marks[j] == marks[i] && j < i)) ++rank;
            const double w = 1.0 / static_cast<double>(rank + 1);
            total += w;
            bool hit = false;
            for (const auto& g : to) {
                double sum = 0.0;
                std::size_t n = 0;
                for (const auto& p : from[i].ridge) {
                    const auto o = ridge_at(g, p.column + offset);
                    if (!o) continue;
                    sum += std::abs(p.ordinate - *o);
                    ++n;
                }
                if (n && sum / static_cast<double>(n) / range <= tau) hit = true;
            }
            if (hit) matched += w;
        }
        return matched / total;
    };
    const double want = 0.5 * (share(a.figures, b.figures, map.offset) + share(b.figures, a.figures, -map.offset));
    const double got = tn::topology_overlap(a.figures, b.figures, map, range, tau);
    EXPECT_NEAR(got, want, 1e-12);
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0);
    std::cout << "TN1/TN2 overlap " << got << "\n";
}

// ---------------------------------------------------------------------------

TEST(Reports, JsonIsByteStable) {
    const auto cfg = fixture::config();
    const auto& inst = fixture::alpha();
    const auto date = tn::default_date(std::span(&inst, 1));
    const auto a = tn::protocol_to_json(tn::run_consecutiveness(inst, 10, 3, 3, date, cfg.protocol())).dump(2);
    const auto b = tn::protocol_to_json(tn::run_consecutiveness(inst, 10, 3, 3, date, cfg.protocol())).dump(2);
    EXPECT_EQ(a, b);
    const std::vector<double> d{0.0, 0.01};
    EXPECT_EQ(tn::shift_test_to_json(tn::shift_test(fixture::chart().chart, d, 0.02)).dump(),
              R"({"base_count":16,"counts":[16,14],"deltas":[0.0,0.01]})");
}
