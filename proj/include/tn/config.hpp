#pragma once

// Run configuration shared by the CLI and the service. Every field has a
// default; JSON input may override any subset. The effective configuration
// and its hash are echoed into every report.

#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tn/chart.hpp"
#include "tn/error.hpp"
#include "tn/ingest.hpp"
#include "tn/schedule.hpp"
#include "tn/validate.hpp"

namespace tn {

inline constexpr const char* kDataRootEnv = "TN_DATA_ROOT";

using PresetSet = std::array<ScheduleParams, 5>;

/// Built-in schedule presets. "full" spans 1500..7500 points at N = 600;
/// "compact" keeps every subtype short enough for a few months of 6-hour bars.
inline PresetSet builtin_presets(const std::string& name) {
    PresetSet p;
    for (int d = 1; d <= 5; ++d) {
        const auto D = static_cast<std::size_t>(d);
        if (name == "full")
            p[D - 1] = default_preset(d);
        else if (name == "compact")
            p[D - 1] = {d, 100, D + 4, 120 + 30 * D, 1.0};
        else
            throw ConfigError("unknown preset '" + name + "'");
    }
    return p;
}

inline nlohmann::json schedule_params_to_json(const ScheduleParams& s) {
    return {{"order", s.order}, {"count", s.count}, {"first", s.first}, {"last", s.last}, {"spacing", s.spacing}};
}

inline ScheduleParams schedule_params_from_json(const nlohmann::json& j, ScheduleParams s = {}) {
    s.order = j.value("order", s.order);
    s.count = j.value("count", s.count);
    s.first = j.value("first", s.first);
    s.last = j.value("last", s.last);
    s.spacing = j.value("spacing", s.spacing);
    return s;
}

/// Reads {"<name>": {"TN1": {...}, ..., "TN5": {...}}, ...}.
inline PresetSet load_preset_file(const std::filesystem::path& path, const std::string& name) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open preset file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!j.contains(name)) throw ConfigError("preset '" + name + "' not in " + path.string());
    PresetSet p;
    for (int d = 1; d <= 5; ++d) {
        const auto key = "TN" + std::to_string(d);
        if (!j[name].contains(key)) throw ConfigError("preset '" + name + "' lacks " + key);
        p[static_cast<std::size_t>(d - 1)] = schedule_params_from_json(j[name][key]);
        if (p[static_cast<std::size_t>(d - 1)].order != d) throw ConfigError(key + " must have order " + std::to_string(d));
    }
    return p;
}

struct RunConfig {
    std::string data_root;          // empty: $TN_DATA_ROOT, then "."
    std::string universe_dir = "universe";
    std::string preset = "full";
    std::string preset_file;        // optional JSON preset file
    std::string output_dir = "out";
    std::vector<int> resolutions{1, 10, 60, 360};  // minutes, totality sweep
    int resolution = 10;                           // minutes, single-chart commands
    int subtype = 3;
    std::size_t windows = 20;                      // consecutiveness
    std::vector<double> deltas{0.0, 0.01, -0.01, 0.02, -0.02, 0.05, -0.05};
    std::vector<double> epsilons{0.1, 0.01, 0.001};
    std::vector<std::string> surrogate_methods{"shuffled-returns", "phase-randomized"};
    std::size_t surrogate_seeds = 20;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::optional<Timestamp> date;                 // chart date; default: after the last tick
    std::size_t extrapolation_horizon = 20;
    std::size_t service_views = 10;   // complete view widths the service keeps per network
    std::string host = "127.0.0.1";
    int port = 8080;
    unsigned poll_ms = 2000;          // data-file change polling
    ChartConfig chart;
    CsvFormat csv;
    std::optional<PresetSet> schedule_overrides;

    [[nodiscard]] std::filesystem::path root() const {
        if (!data_root.empty()) return data_root;
        if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
        return ".";
    }

    [[nodiscard]] PresetSet presets() const {
        if (schedule_overrides) return *schedule_overrides;
        return preset_file.empty() ? builtin_presets(preset) : load_preset_file(preset_file, preset);
    }

    [[nodiscard]] CurveSchedule schedule(int order) const {
        if (order < 1 || order > 5) throw ConfigError("subtype must be TN1..TN5");
        return compute_schedule(presets()[static_cast<std::size_t>(order - 1)]);
    }

    [[nodiscard]] ProtocolConfig protocol() const {
        ProtocolConfig p;
        p.presets = presets();
        p.resolutions = resolutions;
        p.resolution = resolution;
        p.chart = chart;
        p.epsilons = epsilons;
        p.seed = seed;
        p.build = {threads};
        return p;
    }
};

inline nlohmann::json config_to_json(const RunConfig& c) {
    const auto& ch = c.chart;
    const auto& f = ch.figures;
    nlohmann::json presets = nlohmann::json::object();
    const auto ps = c.presets();
    for (int d = 1; d <= 5; ++d) presets["TN" + std::to_string(d)] = schedule_params_to_json(ps[static_cast<std::size_t>(d - 1)]);
    return {
        {"data_root", c.root().string()},
        {"universe_dir", c.universe_dir},
        {"preset", c.preset},
        {"schedules", std::move(presets)},
        {"output_dir", c.output_dir},
        {"resolutions", c.resolutions},
        {"resolution", c.resolution},
        {"subtype", c.subtype},
        {"windows", c.windows},
        {"deltas", c.deltas},
        {"epsilons", c.epsilons},
        {"surrogate_methods", c.surrogate_methods},
        {"surrogate_seeds", c.surrogate_seeds},
        {"seed", c.seed},
        {"date", c.date ? nlohmann::json(*c.date) : nlohmann::json(nullptr)},
        {"extrapolation_horizon", c.extrapolation_horizon},
        {"service_views", c.service_views},
        {"chart",
         {{"view_columns", ch.view_columns},
          {"rows", ch.rows},
          {"splat", ch.splat == Splat::segment ? "segment" : "none"},
          {"tau", ch.tau},
          {"attribute_short", ch.attribute_short},
          {"prominence", ch.extrema.prominence},
          {"min_separation", ch.extrema.min_separation},
          {"fraction_threshold", ch.qualification.fraction_threshold},
          {"min_extrema", ch.qualification.min_extrema},
          {"figures",
           {{"peak_factor", f.peak_factor},
            {"max_jump", f.max_jump},
            {"max_gap", f.max_gap},
            {"min_span_fraction", f.min_span_fraction},
            {"envelope_quantile", f.envelope_quantile},
            {"envelope_curvature", f.envelope_curvature},
            {"envelope_contrast", f.envelope_contrast},
            {"boltrope_proximity", f.boltrope_proximity},
            {"smoothing", f.smoothing}}}}},
        {"csv",
         {{"delimiter", std::string(1, c.csv.delimiter)},
          {"has_header", c.csv.has_header},
          {"timestamp_column", c.csv.timestamp_column},
          {"value_column", c.csv.value_column},
          {"volume_column", c.csv.volume_column},
          {"strict", c.csv.strict}}},
    };
}

/// Applies the keys present in `j` on top of `c`. Unknown keys are errors so
/// typos do not silently fall back to defaults.
namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                           const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ConfigError("unknown config key '" + where + k + "'");
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j, RunConfig c = {}) {
    static const std::vector<std::string> known{"data_root", "universe_dir", "preset", "preset_file", "schedules",
                                                "output_dir", "resolutions", "resolution", "subtype", "windows",
                                                "deltas", "epsilons", "surrogate_methods", "surrogate_seeds", "seed",
                                                "threads", "date", "extrapolation_horizon", "service_views", "host",
                                                "port", "poll_ms", "chart", "csv"};
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config key '" + k + "'");
    try {
        c.data_root = j.value("data_root", c.data_root);
        c.universe_dir = j.value("universe_dir", c.universe_dir);
        c.preset = j.value("preset", c.preset);
        c.preset_file = j.value("preset_file", c.preset_file);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.resolutions = j.value("resolutions", c.resolutions);
        c.resolution = j.value("resolution", c.resolution);
        c.subtype = j.value("subtype", c.subtype);
        c.windows = j.value("windows", c.windows);
        c.deltas = j.value("deltas", c.deltas);
        c.epsilons = j.value("epsilons", c.epsilons);
        c.surrogate_methods = j.value("surrogate_methods", c.surrogate_methods);
        c.surrogate_seeds = j.value("surrogate_seeds", c.surrogate_seeds);
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
        c.extrapolation_horizon = j.value("extrapolation_horizon", c.extrapolation_horizon);
        c.service_views = j.value("service_views", c.service_views);
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.poll_ms = j.value("poll_ms", c.poll_ms);
        if (j.contains("date")) c.date = j["date"].is_null() ? std::nullopt : std::optional<Timestamp>(j["date"].get<Timestamp>());
        if (j.contains("schedules")) {
            PresetSet p = c.presets();
            for (int d = 1; d <= 5; ++d) {
                const auto key = "TN" + std::to_string(d);
                if (j["schedules"].contains(key))
                    p[static_cast<std::size_t>(d - 1)] = schedule_params_from_json(j["schedules"][key], p[static_cast<std::size_t>(d - 1)]);
            }
            c.schedule_overrides = p;
        }
        if (j.contains("chart")) {
            const auto& cj = j["chart"];
            detail::reject_unknown(cj, {"view_columns", "rows", "splat", "tau", "attribute_short", "prominence",
                                        "min_separation", "fraction_threshold", "min_extrema", "figures"},
                                   "chart.");
            auto& ch = c.chart;
            ch.view_columns = cj.value("view_columns", ch.view_columns);
            ch.rows = cj.value("rows", ch.rows);
            if (cj.contains("splat")) {
                const auto s = cj["splat"].get<std::string>();
                if (s != "segment" && s != "none") throw ConfigError("splat must be 'segment' or 'none'");
                ch.splat = s == "segment" ? Splat::segment : Splat::none;
            }
            ch.tau = cj.value("tau", ch.tau);
            ch.attribute_short = cj.value("attribute_short", ch.attribute_short);
            ch.extrema.prominence = cj.value("prominence", ch.extrema.prominence);
            ch.extrema.min_separation = cj.value("min_separation", ch.extrema.min_separation);
            ch.qualification.fraction_threshold = cj.value("fraction_threshold", ch.qualification.fraction_threshold);
            ch.qualification.min_extrema = cj.value("min_extrema", ch.qualification.min_extrema);
            if (cj.contains("figures")) {
                const auto& fj = cj["figures"];
                detail::reject_unknown(fj, {"peak_factor", "max_jump", "max_gap", "min_span_fraction",
                                            "envelope_quantile", "envelope_curvature", "envelope_contrast",
                                            "boltrope_proximity", "smoothing"},
                                       "chart.figures.");
                auto& f = ch.figures;
                f.peak_factor = fj.value("peak_factor", f.peak_factor);
                f.max_jump = fj.value("max_jump", f.max_jump);
                f.max_gap = fj.value("max_gap", f.max_gap);
                f.min_span_fraction = fj.value("min_span_fraction", f.min_span_fraction);
                f.envelope_quantile = fj.value("envelope_quantile", f.envelope_quantile);
                f.envelope_curvature = fj.value("envelope_curvature", f.envelope_curvature);
                f.envelope_contrast = fj.value("envelope_contrast", f.envelope_contrast);
                f.boltrope_proximity = fj.value("boltrope_proximity", f.boltrope_proximity);
                f.smoothing = fj.value("smoothing", f.smoothing);
            }
        }
        if (j.contains("csv")) {
            const auto& cj = j["csv"];
            detail::reject_unknown(cj, {"delimiter", "has_header", "timestamp_column", "value_column", "volume_column",
                                        "strict"},
                                   "csv.");
            const auto delim = cj.value("delimiter", std::string(1, c.csv.delimiter));
            if (delim.size() != 1) throw ConfigError("csv delimiter must be one character");
            c.csv.delimiter = delim[0];
            c.csv.has_header = cj.value("has_header", c.csv.has_header);
            c.csv.timestamp_column = cj.value("timestamp_column", c.csv.timestamp_column);
            c.csv.value_column = cj.value("value_column", c.csv.value_column);
            c.csv.volume_column = cj.value("volume_column", c.csv.volume_column);
            c.csv.strict = cj.value("strict", c.csv.strict);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    c.chart.figures.validate();
    if (c.chart.view_columns < 3) throw ConfigError("view_columns must be at least 3");
    if (!(c.chart.tau >= 0.0)) throw ConfigError("tau must be non-negative");
    if (c.subtype < 1 || c.subtype > 5) throw ConfigError("subtype must be 1..5");
    if (c.resolution <= 0) throw ConfigError("resolution must be positive");
    if (c.surrogate_seeds < kMinSurrogateSeeds) throw ConfigError("surrogate_seeds must be at least 20");
    (void)c.presets();  // surfaces bad preset names early
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return config_from_json(nlohmann::json::parse(in), std::move(base));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Hash of the effective configuration (keys are serialized sorted).
[[nodiscard]] inline std::string config_hash(const RunConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_to_json(c).dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// Data access

inline std::filesystem::path instrument_path(const RunConfig& c, const std::string& symbol) {
    const auto root = c.root();
    for (const auto& p : {root / (symbol + ".csv"), root / c.universe_dir / (symbol + ".csv")})
        if (std::filesystem::exists(p)) return p;
    throw DataError("no data for instrument '" + symbol + "' under " + root.string());
}

inline Instrument load_instrument(const RunConfig& c, const std::string& symbol) {
    auto load = load_ticks_file(instrument_path(c, symbol).string(), c.csv);
    if (load.ticks.empty()) throw DataError("instrument '" + symbol + "' has no valid ticks");
    return {symbol, std::move(load.ticks)};
}

namespace detail {

inline std::vector<std::string> csv_stems(const std::filesystem::path& dir) {
    std::vector<std::string> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// Instruments at the data root, then those in the universe directory.
inline std::vector<std::string> list_instruments(const RunConfig& c) {
    auto out = detail::csv_stems(c.root());
    for (auto& s : detail::csv_stems(c.root() / c.universe_dir))
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
    return out;
}

inline std::vector<Instrument> load_universe(const RunConfig& c) {
    std::vector<Instrument> out;
    for (const auto& s : detail::csv_stems(c.root() / c.universe_dir)) out.push_back(load_instrument(c, s));
    return out;
}

/// Default chart date: one millisecond after the latest tick.
inline Timestamp default_date(std::span<const Instrument> insts) {
    Timestamp d = std::numeric_limits<Timestamp>::min();
    for (const auto& i : insts)
        if (!i.ticks.empty()) d = std::max(d, i.ticks.back().timestamp + 1);
    if (d == std::numeric_limits<Timestamp>::min()) throw DataError("no ticks");
    return d;
}

}  // namespace tn
