#pragma once

// One chart: a view window over a bar series, its network, figures, extrema
// and verdict. Everything downstream (shift test, protocols, surrogates,
// renderer, service) goes through analyze_chart so they all see the same
// numbers.

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "tn/density.hpp"
#include "tn/error.hpp"
#include "tn/figures.hpp"
#include "tn/ingest.hpp"
#include "tn/interact.hpp"
#include "tn/network.hpp"

namespace tn {

struct ChartConfig {
    std::size_t view_columns = 200;
    std::size_t rows = 512;
    Splat splat = Splat::segment;
    FigureParams figures;
    ExtremaParams extrema;
    double tau = 0.02;
    QualificationParams qualification;
    bool attribute_short = true;  // per-rank layer with the N/3 short/long split
};

struct Chart {
    ViewWindow view;
    PriceRange range;
    std::vector<CharacteristicFigure> figures;
    std::vector<Extremum> extrema;
    std::vector<Interaction> interactions;
    QualificationResult result;

    /// Few or no cords: the configuration the analyst treats as hard to read.
    /// Heuristic only.
    [[nodiscard]] bool stationary_hint() const {
        return std::count_if(figures.begin(), figures.end(),
                             [](const auto& f) { return f.kind != FigureKind::envelope; }) <= 1;
    }
};

/// Analyzes bars[view] against a network built on the same bars.
inline Chart analyze_chart(const BarSeries& bars, const Network& net, ViewWindow view, const ChartConfig& cfg) {
    if (net.columns() != bars.size()) throw DataError("network and bars differ in length");
    view.end = std::min(view.end, bars.size());
    if (view.size() < 3) throw EmptyView();
    Chart ch;
    ch.view = view;
    DensityOptions dopt{cfg.rows, cfg.splat, cfg.attribute_short ? net.curve_count() / 3 : 0};
    const auto field = density_field(net, view, dopt);
    ch.figures = detect_figures(field, cfg.figures);

    const std::span<const Bar> vb(bars.bars.data() + view.first, view.size());
    ch.range = bar_range(vb);
    ch.range.lo = std::min(ch.range.lo, field.lo());
    ch.range.hi = std::max(ch.range.hi, field.hi());
    ch.extrema = detect_extrema(vb, cfg.extrema, ch.range.span(), view.first);
    ch.interactions = score_interactions(ch.extrema, ch.figures, ch.range.span(), cfg.tau);
    ch.result = qualify_chart(ch.interactions, cfg.qualification);
    return ch;
}

/// Bars needed for a view of `view_columns` complete columns.
[[nodiscard]] inline std::size_t required_history(const CurveSchedule& s, std::size_t view_columns) {
    return s.longest() - 1 + view_columns;
}

struct ChartRun {
    BarSeries bars;  // the tail the network was built on
    Network network;
    Chart chart;
};

/// Builds the network on exactly the history a chart over the last
/// `view_columns` bars needs and analyzes it.
inline ChartRun analyze_latest(const BarSeries& series, const CurveSchedule& schedule, const ChartConfig& cfg,
                               const std::string& instrument = "series", const BuildOptions& build = {}) {
    const std::size_t need = required_history(schedule, cfg.view_columns);
    if (series.size() < need)
        throw InsufficientHistory(instrument, schedule.label() + " needs " + std::to_string(need) + " bars, have " +
                                                  std::to_string(series.size()));
    ChartRun run;
    run.bars = series.sub(series.size() - need, need);
    run.network = build_network(run.bars, schedule, build);
    run.chart = analyze_chart(run.bars, run.network, {need - cfg.view_columns, need}, cfg);
    return run;
}

inline nlohmann::json chart_to_json(const Chart& ch) {
    auto figs = nlohmann::json::array();
    for (const auto& f : ch.figures) figs.push_back(figure_to_json(f));
    auto ext = nlohmann::json::array();
    for (const auto& e : ch.extrema) ext.push_back(extremum_to_json(e));
    auto inter = nlohmann::json::array();
    for (const auto& i : ch.interactions) inter.push_back(interaction_to_json(i));
    return {{"view", {{"first", ch.view.first}, {"end", ch.view.end}}},
            {"range", {{"lo", ch.range.lo}, {"hi", ch.range.hi}}},
            {"figures", std::move(figs)},
            {"extrema", std::move(ext)},
            {"interactions", std::move(inter)},
            {"qualification", qualification_to_json(ch.result)},
            {"stationary_mode_heuristic", ch.stationary_hint()}};
}

}  // namespace tn
