#pragma once

// Command implementations shared by the CLI and the HTTP service. Each one
// returns a JSON report that embeds the effective configuration and its
// hash; writing it to disk is the caller's business.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tn/chart.hpp"
#include "tn/config.hpp"
#include "tn/figures.hpp"
#include "tn/ingest.hpp"
#include "tn/network.hpp"
#include "tn/render.hpp"
#include "tn/validate.hpp"

namespace tn {

inline std::string resolution_label(int minutes) { return std::to_string(minutes) + "m"; }

/// Parses "10", "10m", "1h", "6h".
inline int parse_resolution(const std::string& s) {
    if (s.empty()) throw ConfigError("empty resolution");
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("bad resolution '" + s + "'");
    }
    const std::string unit = s.substr(used);
    if (unit == "h") v *= 60;
    else if (!unit.empty() && unit != "m") throw ConfigError("bad resolution unit in '" + s + "'");
    if (v <= 0) throw ConfigError("resolution must be positive");
    return v;
}

inline Timestamp chart_date(const RunConfig& cfg, const Instrument& inst) {
    return cfg.date ? *cfg.date : default_date(std::span(&inst, 1));
}

inline BarSeries load_bars(const RunConfig& cfg, const Instrument& inst, int minutes) {
    return bars_before(inst, minutes, chart_date(cfg, inst));
}

struct ChartTarget {
    std::string symbol;
    int minutes = 10;
    int subtype = 3;
};

/// Loads, aggregates, builds and analyzes the latest view of one target.
inline ChartRun run_chart(const RunConfig& cfg, const Instrument& inst, const ChartTarget& t) {
    return analyze_latest(load_bars(cfg, inst, t.minutes), cfg.schedule(t.subtype), cfg.chart, inst.name,
                          {cfg.threads});
}

inline nlohmann::json wrap_report(const RunConfig& cfg, const std::string& command, nlohmann::json result) {
    return {{"command", command},
            {"config_hash", config_hash(cfg)},
            {"config", config_to_json(cfg)},
            {"result", std::move(result)}};
}

inline nlohmann::json target_json(const ChartTarget& t) {
    return {{"symbol", t.symbol}, {"resolution_minutes", t.minutes}, {"subtype", "TN" + std::to_string(t.subtype)}};
}

inline std::string dump_report(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    return path;
}

inline std::filesystem::path write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    return path;
}

inline std::string target_stem(const ChartTarget& t) {
    return t.symbol + "_" + resolution_label(t.minutes) + "_TN" + std::to_string(t.subtype);
}

inline nlohmann::json figures_with_extrapolations(const Chart& ch, std::size_t horizon) {
    auto out = nlohmann::json::array();
    for (const auto& f : ch.figures) {
        auto j = figure_to_json(f);
        if (f.span() >= 3 && horizon > 0) {
            for (int order : {1, 2}) {
                auto pts = nlohmann::json::array();
                for (const auto& p : extrapolate_figure(f, horizon, order)) pts.push_back({p.column, p.ordinate});
                j["extrapolation"]["order" + std::to_string(order)] = std::move(pts);
            }
        }
        out.push_back(std::move(j));
    }
    return out;
}

inline nlohmann::json qualify_json(const ChartRun& run, const ChartTarget& t, double tau) {
    auto j = chart_to_json(run.chart);
    j["target"] = target_json(t);
    j["tau"] = tau;
    return j;
}

inline nlohmann::json shift_json(const ChartRun& run, const ChartTarget& t, std::span<const double> deltas, double tau) {
    auto j = shift_test_to_json(shift_test(run.chart, deltas, tau));
    j["target"] = target_json(t);
    j["tau"] = tau;
    return j;
}

/// Resolves surrogate method names.
inline std::vector<SurrogateMethod> surrogate_methods(const RunConfig& cfg) {
    std::vector<SurrogateMethod> out;
    for (const auto& m : cfg.surrogate_methods) out.push_back(parse_surrogate_method(m));
    return out;
}

}  // namespace tn
