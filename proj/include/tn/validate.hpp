#pragma once

// Falsification harness: vertical shift test, the three batch qualification
// protocols (simultaneity, totality, consecutiveness), surrogate comparison
// and the topology-overlap score between two figure sets.
//
// The harness measures; it never asserts that figures drive the price. Every
// report carries the raw counts next to any probability derived from them.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tn/chart.hpp"
#include "tn/error.hpp"
#include "tn/ingest.hpp"
#include "tn/random.hpp"
#include "tn/schedule.hpp"
#include "tn/surrogate.hpp"

namespace tn {

// ---------------------------------------------------------------------------
// Binomial tail

/// P(X >= k) for X ~ Binomial(n, p), summed term by term in extended
/// precision (all terms are positive, so there is no cancellation).
[[nodiscard]] inline double binomial_upper_tail(std::size_t n, std::size_t k, double p) {
    if (k == 0) return 1.0;
    if (k > n) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    const long double lp = p;
    const long double lq = 1.0L - lp;
    // term(j) = C(n, j) p^j q^(n-j); start at j = k and walk upwards
    long double c = 1.0L;
    for (std::size_t i = 0; i < k; ++i) c = c * static_cast<long double>(n - i) / static_cast<long double>(i + 1);
    long double term = c * std::pow(lp, static_cast<long double>(k)) * std::pow(lq, static_cast<long double>(n - k));
    long double total = term;
    for (std::size_t j = k + 1; j <= n; ++j) {
        term *= static_cast<long double>(n - j + 1) / static_cast<long double>(j) * (lp / lq);
        total += term;
    }
    return static_cast<double>(std::min(total, 1.0L));
}

// ---------------------------------------------------------------------------
// Shift test

struct ShiftTestResult {
    std::vector<double> deltas;  // fractions of the view range
    std::vector<std::size_t> counts;
    std::size_t base_count = 0;  // count at delta = 0
};

/// Re-scores interactions with every extremum displaced by delta x range;
/// figures stay put (the same as moving the network by -delta).
inline ShiftTestResult shift_test(const Chart& chart, std::span<const double> deltas, double tau) {
    if (std::find(deltas.begin(), deltas.end(), 0.0) == deltas.end()) throw ConfigError("shift deltas must include 0");
    ShiftTestResult r;
    r.deltas.assign(deltas.begin(), deltas.end());
    const double span = chart.range.span();
    for (double d : deltas) {
        const auto inter = score_interactions(chart.extrema, chart.figures, span, tau, d * span);
        const auto c = static_cast<std::size_t>(
            std::count_if(inter.begin(), inter.end(), [](const Interaction& i) { return i.interacting; }));
        r.counts.push_back(c);
        if (d == 0.0) r.base_count = c;
    }
    return r;
}

inline nlohmann::json shift_test_to_json(const ShiftTestResult& r) {
    return {{"deltas", r.deltas}, {"counts", r.counts}, {"base_count", r.base_count}};
}

// ---------------------------------------------------------------------------
// Protocols

struct Instrument {
    std::string name;
    std::vector<Tick> ticks;
};

struct ProtocolConfig {
    std::array<ScheduleParams, 5> presets{default_preset(1), default_preset(2), default_preset(3), default_preset(4),
                                          default_preset(5)};
    std::vector<int> resolutions{1, 10, 60, 360};  // minutes, for totality
    int resolution = 10;                           // minutes, for simultaneity
    ChartConfig chart;
    std::vector<double> epsilons{0.1, 0.01, 0.001};
    std::uint64_t seed = 1;
    BuildOptions build;

    [[nodiscard]] CurveSchedule schedule(int order) const { return compute_schedule(presets.at(order - 1)); }
};

struct ChartVerdict {
    std::string instrument;
    int resolution = 0;  // minutes; 0 when not time-based
    int subtype = 0;
    ViewWindow view;
    Timestamp end_time = 0;
    QualificationResult result;
};

struct ProtocolReport {
    std::string protocol;
    std::vector<ChartVerdict> charts;
    std::vector<std::string> errors;  // non-fatal, e.g. skipped instruments
    std::size_t qualified = 0;
    std::size_t assessable = 0;
    double rate = 0.0;  // qualified / charts
    std::vector<double> epsilons;
    std::vector<double> p_values;        // P(X >= qualified), X ~ Bin(charts, eps)
    std::vector<double> joint_all_qualify;  // eps^charts

    void finalize(std::span<const double> eps) {
        qualified = static_cast<std::size_t>(
            std::count_if(charts.begin(), charts.end(), [](const auto& c) { return c.result.qualifies; }));
        assessable = static_cast<std::size_t>(std::count_if(
            charts.begin(), charts.end(), [](const auto& c) { return c.result.verdict != Verdict::not_assessable; }));
        rate = charts.empty() ? 0.0 : static_cast<double>(qualified) / static_cast<double>(charts.size());
        epsilons.assign(eps.begin(), eps.end());
        p_values.clear();
        joint_all_qualify.clear();
        for (double e : eps) {
            p_values.push_back(binomial_upper_tail(charts.size(), qualified, e));
            joint_all_qualify.push_back(std::pow(e, static_cast<double>(charts.size())));
        }
    }
};

inline constexpr const char* kIndependenceNote =
    "p-values treat chart outcomes as independent Bernoulli(eps) trials; charts built from overlapping data "
    "or adjacent windows of one network are unlikely to be independent, so read the raw fraction first";

inline nlohmann::json protocol_to_json(const ProtocolReport& r) {
    auto charts = nlohmann::json::array();
    for (const auto& c : r.charts)
        charts.push_back({{"instrument", c.instrument},
                          {"resolution_minutes", c.resolution},
                          {"subtype", "TN" + std::to_string(c.subtype)},
                          {"view", {{"first", c.view.first}, {"end", c.view.end}}},
                          {"end_time", c.end_time},
                          {"qualification", qualification_to_json(c.result)}});
    auto eps = nlohmann::json::array();
    for (std::size_t i = 0; i < r.epsilons.size(); ++i)
        eps.push_back({{"epsilon", r.epsilons[i]},
                       {"p_value", r.p_values[i]},
                       {"joint_probability_all_qualify", r.joint_all_qualify[i]}});
    return {{"protocol", r.protocol},
            {"charts", std::move(charts)},
            {"chart_count", r.charts.size()},
            {"qualified", r.qualified},
            {"assessable", r.assessable},
            {"qualification_rate", r.rate},
            {"significance", std::move(eps)},
            {"assumption", kIndependenceNote},
            {"errors", r.errors}};
}

/// Bars at `minutes` resolution built from ticks strictly before `date`.
inline BarSeries bars_before(const Instrument& inst, int minutes, Timestamp date) {
    const auto end = std::lower_bound(inst.ticks.begin(), inst.ticks.end(), date,
                                      [](const Tick& t, Timestamp d) { return t.timestamp < d; });
    if (end == inst.ticks.begin()) throw InsufficientHistory(inst.name, "no ticks before the chart date");
    return aggregate_time_bars(std::span(inst.ticks.begin(), end), static_cast<Timestamp>(minutes) * 60'000);
}

namespace detail {

inline ChartVerdict run_one(const Instrument& inst, int minutes, int subtype, Timestamp date,
                            const ProtocolConfig& cfg) {
    const auto bars = bars_before(inst, minutes, date);
    const auto run = analyze_latest(bars, cfg.schedule(subtype), cfg.chart, inst.name + " @" + std::to_string(minutes) + "m", cfg.build);
    return {inst.name, minutes, subtype, run.chart.view, run.bars.bars.back().t_end, run.chart.result};
}

}  // namespace detail

/// One chart per instrument at the same date and resolution, each under a
/// subtype drawn uniformly with the configured seed.
inline ProtocolReport run_simultaneity(std::span<const Instrument> universe, Timestamp date, const ProtocolConfig& cfg) {
    if (universe.size() < 2) throw ConfigError("simultaneity needs at least two instruments");
    ProtocolReport rep;
    rep.protocol = "simultaneity";
    Rng rng(cfg.seed);
    for (const auto& inst : universe) {
        const int subtype = 1 + static_cast<int>(rng.below(5));
        try {
            rep.charts.push_back(detail::run_one(inst, cfg.resolution, subtype, date, cfg));
        } catch (const InsufficientHistory& e) {
            rep.errors.push_back(e.what());
        }
    }
    rep.finalize(cfg.epsilons);
    return rep;
}

/// All five subtypes at every configured resolution, one instrument, one date.
inline ProtocolReport run_totality(const Instrument& inst, Timestamp date, const ProtocolConfig& cfg) {
    ProtocolReport rep;
    rep.protocol = "totality";
    for (int subtype = 1; subtype <= 5; ++subtype)
        for (int minutes : cfg.resolutions) rep.charts.push_back(detail::run_one(inst, minutes, subtype, date, cfg));
    rep.finalize(cfg.epsilons);
    return rep;
}

/// W adjacent, non-overlapping view windows ending at the last bar. Window w
/// covers [first + w V, first + (w+1) V) with V = view columns.
[[nodiscard]] inline std::vector<ViewWindow> adjacent_windows(std::size_t bars, std::size_t view, std::size_t count) {
    std::vector<ViewWindow> out;
    const std::size_t first = bars - count * view;
    for (std::size_t w = 0; w < count; ++w) out.push_back({first + w * view, first + (w + 1) * view});
    return out;
}

inline ProtocolReport run_consecutiveness(const Instrument& inst, int minutes, int subtype, std::size_t windows,
                                          Timestamp date, const ProtocolConfig& cfg) {
    if (windows == 0) throw ConfigError("need at least one window");
    const auto series = bars_before(inst, minutes, date);
    const auto schedule = cfg.schedule(subtype);
    const std::size_t need = schedule.longest() - 1 + windows * cfg.chart.view_columns;
    if (series.size() < need)
        throw InsufficientHistory(inst.name, std::to_string(windows) + " windows need " + std::to_string(need) +
                                                 " bars, have " + std::to_string(series.size()));
    const auto bars = series.sub(series.size() - need, need);
    const auto net = build_network(bars, schedule, cfg.build);
    ProtocolReport rep;
    rep.protocol = "consecutiveness";
    for (const auto& view : adjacent_windows(need, cfg.chart.view_columns, windows)) {
        const auto ch = analyze_chart(bars, net, view, cfg.chart);
        rep.charts.push_back({inst.name, minutes, subtype, view, bars.bars[view.end - 1].t_end, ch.result});
    }
    rep.finalize(cfg.epsilons);
    return rep;
}

// ---------------------------------------------------------------------------
// Surrogate comparison

inline constexpr std::size_t kMinSurrogateSeeds = 20;

struct SurrogateRun {
    std::uint64_t seed = 0;
    QualificationResult result;
};

struct SurrogateMethodReport {
    SurrogateMethod method = SurrogateMethod::shuffled_returns;
    std::vector<SurrogateRun> runs;
    double rate = 0.0;           // qualified / seeds
    double mean_fraction = 0.0;  // mean interacting fraction over assessable seeds
    double sd_fraction = 0.0;
    std::size_t assessable = 0;
};

struct SurrogateReport {
    std::string instrument;
    int subtype = 0;
    QualificationResult real;
    double real_rate = 0.0;
    std::vector<SurrogateMethodReport> methods;
    std::size_t seeds_per_method = 0;
};

/// Runs the identical chart pipeline on the real tail and on surrogates of
/// it. Seeds are first_seed, first_seed + 1, ...
inline SurrogateReport surrogate_comparison(const BarSeries& series, const std::string& instrument, int subtype,
                                            std::span<const SurrogateMethod> methods, std::size_t seeds,
                                            const ProtocolConfig& cfg, std::uint64_t first_seed = 1,
                                            unsigned threads = 0) {
    if (seeds < kMinSurrogateSeeds) throw ConfigError("surrogate comparison needs at least 20 seeds per method");
    const auto schedule = cfg.schedule(subtype);
    const std::size_t need = required_history(schedule, cfg.chart.view_columns);
    if (series.size() < std::max(need, kMinSurrogateLength)) throw SeriesTooShort(series.size(), need);
    const auto tail = series.sub(series.size() - need, need);

    SurrogateReport rep;
    rep.instrument = instrument;
    rep.subtype = subtype;
    rep.seeds_per_method = seeds;
    const BuildOptions single{1};
    rep.real = analyze_latest(tail, schedule, cfg.chart, instrument, single).chart.result;
    rep.real_rate = rep.real.qualifies ? 1.0 : 0.0;

    // Fan out (method, seed) tasks; results land in fixed slots.
    const std::size_t tasks = methods.size() * seeds;
    std::vector<QualificationResult> results(tasks);
    auto run_task = [&](std::size_t i) {
        const auto m = methods[i / seeds];
        const std::uint64_t seed = first_seed + i % seeds;
        const auto sur = make_surrogate(tail, m, seed);
        results[i] = analyze_latest(sur, schedule, cfg.chart, instrument, single).chart.result;
    };
    unsigned n_threads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < tasks; ++i) run_task(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < tasks; i = next++) run_task(i);
            });
    }

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        SurrogateMethodReport mr;
        mr.method = methods[mi];
        std::vector<double> fractions;
        std::size_t qualified = 0;
        for (std::size_t s = 0; s < seeds; ++s) {
            const auto& q = results[mi * seeds + s];
            mr.runs.push_back({first_seed + s, q});
            qualified += q.qualifies ? 1 : 0;
            if (q.verdict != Verdict::not_assessable) fractions.push_back(q.fraction);
        }
        mr.rate = static_cast<double>(qualified) / static_cast<double>(seeds);
        mr.assessable = fractions.size();
        if (!fractions.empty()) {
            mr.mean_fraction = std::accumulate(fractions.begin(), fractions.end(), 0.0) / static_cast<double>(fractions.size());
            double var = 0.0;
            for (double f : fractions) var += (f - mr.mean_fraction) * (f - mr.mean_fraction);
            mr.sd_fraction = fractions.size() > 1 ? std::sqrt(var / static_cast<double>(fractions.size() - 1)) : 0.0;
        }
        rep.methods.push_back(std::move(mr));
    }
    return rep;
}

inline nlohmann::json surrogate_to_json(const SurrogateReport& r) {
    auto methods = nlohmann::json::array();
    for (const auto& m : r.methods) {
        auto runs = nlohmann::json::array();
        for (const auto& run : m.runs) runs.push_back({{"seed", run.seed}, {"qualification", qualification_to_json(run.result)}});
        methods.push_back({{"method", to_string(m.method)},
                           {"qualification_rate", m.rate},
                           {"rate_gap", r.real_rate - m.rate},
                           {"assessable", m.assessable},
                           {"mean_fraction", m.mean_fraction},
                           {"sd_fraction", m.sd_fraction},
                           {"runs", std::move(runs)}});
    }
    return {{"instrument", r.instrument},
            {"subtype", "TN" + std::to_string(r.subtype)},
            {"seeds_per_method", r.seeds_per_method},
            {"real", qualification_to_json(r.real)},
            {"real_qualification_rate", r.real_rate},
            {"methods", std::move(methods)},
            {"note", "no directional outcome is assumed; compare real and surrogate rates"}};
}

// ---------------------------------------------------------------------------
// Topology overlap

/// Monotone column correspondence b = scale * a + offset.
struct ColumnMap {
    double scale = 1.0;
    double offset = 0.0;
    [[nodiscard]] double operator()(double a) const noexcept { return scale * a + offset; }
    [[nodiscard]] ColumnMap inverse() const { return {1.0 / scale, -offset / scale}; }
};

namespace detail {

/// Mean |ridge distance| / range of figure a against figure b over the
/// columns they share under the map; infinity when they share none.
inline double mean_ridge_distance(const CharacteristicFigure& a, const CharacteristicFigure& b, ColumnMap map,
                                  double range) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : a.ridge) {
        const auto o = b.ordinate_at(map(p.column));
        if (!o) continue;
        sum += std::abs(p.ordinate - *o);
        ++n;
    }
    return n ? sum / static_cast<double>(n) / range : std::numeric_limits<double>::infinity();
}

/// Share of `from` (weighted 1/rank by markedness) that has a match in `to`.
inline double matched_share(std::span<const CharacteristicFigure> from, std::span<const CharacteristicFigure> to,
                            ColumnMap map, double range, double tau) {
    std::vector<std::size_t> order(from.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return from[x].markedness > from[y].markedness; });
    double matched = 0.0;
    double total = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const double w = 1.0 / static_cast<double>(rank + 1);
        total += w;
        const auto& f = from[order[rank]];
        for (const auto& g : to) {
            if (mean_ridge_distance(f, g, map, range) <= tau) {
                matched += w;
                break;
            }
        }
    }
    return matched / total;
}

}  // namespace detail

/// Symmetric agreement between two figure sets in [0, 1]: the mean over both
/// directions of the markedness-rank-weighted share of figures with a match
/// (mean vertical distance <= tau x range) on the other side.
inline double topology_overlap(std::span<const CharacteristicFigure> a, std::span<const CharacteristicFigure> b,
                               ColumnMap map, double range, double tau) {
    if (a.empty()) throw EmptyFigureSet("a");
    if (b.empty()) throw EmptyFigureSet("b");
    if (!(map.scale > 0.0)) throw ConfigError("column map must be increasing");
    return 0.5 * (detail::matched_share(a, b, map, range, tau) + detail::matched_share(b, a, map.inverse(), range, tau));
}

}  // namespace tn
