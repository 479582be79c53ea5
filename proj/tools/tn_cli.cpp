// tn: command-line front end. Reports go to <out>/reports, artifacts to
// <out>/{bars,networks,renders}; a short summary goes to stdout. Verdicts
// never change the exit status; configuration and data problems do.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tn/config.hpp"
#include "tn/pipeline.hpp"
#include "tn/render.hpp"
#include "tn/service.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config_file;
    std::string data_root;
    std::string out;
    std::string preset;
    std::string preset_file;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<double> tau;
    std::optional<std::size_t> view;
    std::optional<std::int64_t> date;
    std::string symbol;
    std::string res;
    std::optional<int> subtype;
};

tn::RunConfig effective(const Options& o) {
    tn::RunConfig c;
    if (!o.config_file.empty()) c = tn::load_config(o.config_file);
    if (!o.data_root.empty()) c.data_root = o.data_root;
    if (!o.out.empty()) c.output_dir = o.out;
    if (!o.preset.empty()) c.preset = o.preset;
    if (!o.preset_file.empty()) c.preset_file = o.preset_file;
    if (o.seed) c.seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    if (o.tau) c.chart.tau = *o.tau;
    if (o.view) c.chart.view_columns = *o.view;
    if (o.date) c.date = *o.date;
    if (!o.res.empty()) c.resolution = tn::parse_resolution(o.res);
    if (o.subtype) c.subtype = *o.subtype;
    (void)c.schedule(c.subtype);
    return c;
}

tn::ChartTarget target(const Options& o, const tn::RunConfig& c) {
    if (o.symbol.empty()) throw tn::ConfigError("--symbol is required");
    return {o.symbol, c.resolution, c.subtype};
}

fs::path report_path(const tn::RunConfig& c, const std::string& name) {
    return fs::path(c.output_dir) / "reports" / (name + ".json");
}

void emit(const tn::RunConfig& c, const std::string& command, const std::string& name, nlohmann::json result) {
    const auto path = tn::write_text(report_path(c, name), tn::dump_report(tn::wrap_report(c, command, std::move(result))));
    std::cout << "report: " << path.string() << '\n';
}

void print_qualification(const std::string& label, const tn::QualificationResult& q) {
    std::cout << label << ": " << q.interacting_count << '/' << q.extremum_count << " extrema interacting ("
              << q.fraction << ") -> " << tn::to_string(q.verdict) << '\n';
}

void print_protocol(const tn::ProtocolReport& r) {
    for (const auto& c : r.charts)
        print_qualification(c.instrument + " " + tn::resolution_label(c.resolution) + " TN" + std::to_string(c.subtype),
                            c.result);
    for (const auto& e : r.errors) std::cout << "skipped: " << e << '\n';
    std::cout << r.protocol << ": " << r.qualified << " of " << r.charts.size() << " charts qualify (rate " << r.rate
              << ")\n";
    for (std::size_t i = 0; i < r.epsilons.size(); ++i)
        std::cout << "  eps=" << r.epsilons[i] << "  p=" << r.p_values[i] << "  eps^n=" << r.joint_all_qualify[i] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topological network analysis of price series"};
    app.require_subcommand(1);
    Options o;
    app.add_option("-c,--config", o.config_file, "JSON run configuration");
    app.add_option("--data-root", o.data_root, std::string("data directory (default $") + tn::kDataRootEnv + ")");
    app.add_option("-o,--out", o.out, "output directory");
    app.add_option("--preset", o.preset, "schedule preset: full | compact");
    app.add_option("--preset-file", o.preset_file, "JSON file with schedule presets");
    app.add_option("--seed", o.seed, "random seed");
    app.add_option("--threads", o.threads, "worker threads (0 = all cores)");
    app.add_option("--tau", o.tau, "interaction tolerance, fraction of view range");
    app.add_option("--view", o.view, "view width in bars");
    app.add_option("--date", o.date, "chart date, epoch ms (ticks strictly before it are used)");

    auto chart_opts = [&](CLI::App* sub, bool needs_subtype = true) {
        sub->add_option("-s,--symbol", o.symbol, "instrument")->required();
        sub->add_option("-r,--res", o.res, "bar resolution, e.g. 10m, 6h");
        if (needs_subtype) sub->add_option("-t,--subtype", o.subtype, "TN subtype 1..5");
    };

    auto* bars = app.add_subcommand("bars", "aggregate ticks into bars and write a bar cache");
    chart_opts(bars, false);
    std::optional<double> nvb;
    bars->add_option("--nvb", nvb, "normalized volume bars with this volume quota instead of time bars");

    auto* build = app.add_subcommand("build", "build a network and write it in binary form");
    chart_opts(build);

    auto* render = app.add_subcommand("render", "render the latest chart to PNG (and SVG)");
    chart_opts(render);
    std::size_t width = 1200, height = 800;
    bool svg = false, no_overlay = false;
    render->add_option("--width", width);
    render->add_option("--height", height);
    render->add_flag("--svg", svg, "also write SVG");
    render->add_flag("--no-overlay", no_overlay, "omit figure ridges");

    auto* figures = app.add_subcommand("figures", "detect characteristic figures");
    chart_opts(figures);
    auto* qualify = app.add_subcommand("qualify", "score extrema against figures and qualify the chart");
    chart_opts(qualify);
    auto* shift = app.add_subcommand("shift-test", "vertical shift test");
    chart_opts(shift);
    std::vector<double> deltas;
    shift->add_option("--deltas", deltas, "shifts as fractions of the view range (must include 0)")->delimiter(',');

    auto* protocol = app.add_subcommand("protocol", "batch qualification protocols");
    protocol->require_subcommand(1);
    auto* simul = protocol->add_subcommand("simultaneity", "one chart per universe instrument at one date");
    simul->add_option("-r,--res", o.res, "bar resolution");
    auto* total = protocol->add_subcommand("totality", "five subtypes x four resolutions for one instrument");
    total->add_option("-s,--symbol", o.symbol, "instrument")->required();
    auto* consec = protocol->add_subcommand("consecutiveness", "adjacent windows of one network");
    chart_opts(consec);
    std::optional<std::size_t> windows;
    consec->add_option("-w,--windows", windows, "number of adjacent windows");

    auto* surrogate = app.add_subcommand("surrogate", "compare real and surrogate qualification rates");
    chart_opts(surrogate);
    std::vector<std::string> methods;
    std::optional<std::size_t> seeds;
    surrogate->add_option("--methods", methods, "shuffled-returns, phase-randomized, gbm-fit")->delimiter(',');
    surrogate->add_option("--seeds", seeds, "seeds per method (>= 20)");

    auto* serve = app.add_subcommand("serve", "HTTP JSON service for the viewer");
    std::string host;
    std::optional<int> port;
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = effective(o);
        if (*bars) {
            const auto inst = tn::load_instrument(cfg, o.symbol);
            tn::BarSeries series;
            std::string name;
            if (nvb) {
                series = tn::aggregate_nvb(inst.ticks, *nvb);
                name = o.symbol + "_nvb" + std::to_string(static_cast<long long>(*nvb));
            } else {
                series = tn::load_bars(cfg, inst, cfg.resolution);
                name = o.symbol + "_" + tn::resolution_label(cfg.resolution);
            }
            const auto path = fs::path(cfg.output_dir) / "bars" / (name + ".bars");
            fs::create_directories(path.parent_path());
            std::ofstream os(path, std::ios::binary);
            tn::write_bar_cache(os, series);
            std::cout << series.size() << " bars from " << inst.ticks.size() << " ticks -> " << path.string() << '\n';
        } else if (*build) {
            const auto t = target(o, cfg);
            const auto run = tn::run_chart(cfg, tn::load_instrument(cfg, t.symbol), t);
            const auto path = fs::path(cfg.output_dir) / "networks" / (tn::target_stem(t) + ".tnn");
            fs::create_directories(path.parent_path());
            {
                std::ofstream os(path, std::ios::binary);
                tn::write_network(os, run.network);
            }
            std::ifstream is(path, std::ios::binary);
            const bool same = tn::read_network(is) == run.network;
            std::cout << run.network.label() << ": " << run.network.curve_count() << " curves x "
                      << run.network.columns() << " columns -> " << path.string()
                      << (same ? " (reload verified)" : " (RELOAD MISMATCH)") << '\n';
            if (!same) return 1;
        } else if (*render) {
            const auto t = target(o, cfg);
            const auto run = tn::run_chart(cfg, tn::load_instrument(cfg, t.symbol), t);
            tn::RenderStyle style;
            style.width = width;
            style.height = height;
            style.overlay_figures = !no_overlay;
            const auto img = tn::render_chart(run.network, run.bars, run.chart.view, run.chart.figures, style);
            const auto dir = fs::path(cfg.output_dir) / "renders";
            const auto png = tn::write_bytes(
                dir / tn::render_file_name(t.symbol, tn::resolution_label(t.minutes), t.subtype, run.chart.view),
                tn::encode_png(img));
            std::cout << "png: " << png.string() << '\n';
            if (svg) {
                const auto s = tn::write_text(
                    dir / tn::render_file_name(t.symbol, tn::resolution_label(t.minutes), t.subtype, run.chart.view, "svg"),
                    tn::render_svg(run.network, run.bars, run.chart.view, run.chart.figures, style));
                std::cout << "svg: " << s.string() << '\n';
            }
        } else if (*figures) {
            const auto t = target(o, cfg);
            const auto run = tn::run_chart(cfg, tn::load_instrument(cfg, t.symbol), t);
            std::cout << run.chart.figures.size() << " figures\n";
            emit(cfg, "figures", "figures_" + tn::target_stem(t),
                 {{"target", tn::target_json(t)},
                  {"figures", tn::figures_with_extrapolations(run.chart, cfg.extrapolation_horizon)},
                  {"stationary_mode_heuristic", run.chart.stationary_hint()}});
        } else if (*qualify) {
            const auto t = target(o, cfg);
            const auto run = tn::run_chart(cfg, tn::load_instrument(cfg, t.symbol), t);
            print_qualification(tn::target_stem(t), run.chart.result);
            emit(cfg, "qualify", "qualify_" + tn::target_stem(t), tn::qualify_json(run, t, cfg.chart.tau));
        } else if (*shift) {
            const auto t = target(o, cfg);
            if (!deltas.empty()) cfg.deltas = deltas;
            const auto run = tn::run_chart(cfg, tn::load_instrument(cfg, t.symbol), t);
            const auto j = tn::shift_json(run, t, cfg.deltas, cfg.chart.tau);
            for (std::size_t i = 0; i < cfg.deltas.size(); ++i)
                std::cout << "delta=" << cfg.deltas[i] << "  interacting=" << j["counts"][i] << '\n';
            emit(cfg, "shift-test", "shift_" + tn::target_stem(t), j);
        } else if (*protocol) {
            const auto pc = cfg.protocol();
            tn::ProtocolReport rep;
            std::string name;
            if (*simul) {
                const auto universe = tn::load_universe(cfg);
                const auto date = cfg.date ? *cfg.date : tn::default_date(universe);
                rep = tn::run_simultaneity(universe, date, pc);
                name = "protocol_simultaneity_" + tn::resolution_label(cfg.resolution);
            } else if (*total) {
                const auto inst = tn::load_instrument(cfg, o.symbol);
                rep = tn::run_totality(inst, tn::chart_date(cfg, inst), pc);
                name = "protocol_totality_" + o.symbol;
            } else {
                const auto t = target(o, cfg);
                if (windows) cfg.windows = *windows;
                const auto inst = tn::load_instrument(cfg, t.symbol);
                rep = tn::run_consecutiveness(inst, t.minutes, t.subtype, cfg.windows, tn::chart_date(cfg, inst), pc);
                name = "protocol_consecutiveness_" + tn::target_stem(t) + "_W" + std::to_string(cfg.windows);
            }
            print_protocol(rep);
            emit(cfg, "protocol " + rep.protocol, name, tn::protocol_to_json(rep));
        } else if (*surrogate) {
            const auto t = target(o, cfg);
            if (!methods.empty()) cfg.surrogate_methods = methods;
            if (seeds) cfg.surrogate_seeds = *seeds;
            const auto ms = tn::surrogate_methods(cfg);
            const auto inst = tn::load_instrument(cfg, t.symbol);
            const auto rep = tn::surrogate_comparison(tn::load_bars(cfg, inst, t.minutes), t.symbol, t.subtype, ms,
                                                      cfg.surrogate_seeds, cfg.protocol(), cfg.seed, cfg.threads);
            std::cout << "real: " << tn::to_string(rep.real.verdict) << " (fraction " << rep.real.fraction << ")\n";
            for (const auto& m : rep.methods)
                std::cout << tn::to_string(m.method) << ": rate " << m.rate << ", mean fraction " << m.mean_fraction
                          << " over " << m.assessable << " assessable seeds\n";
            emit(cfg, "surrogate", "surrogate_" + tn::target_stem(t), tn::surrogate_to_json(rep));
        } else if (*serve) {
            if (!host.empty()) cfg.host = host;
            if (port) cfg.port = *port;
            tn::Service svc(cfg);
            std::cout << "serving " << cfg.root().string() << " on http://" << cfg.host << ':' << cfg.port << '\n';
            svc.run(cfg.host, cfg.port);
        }
    } catch (const tn::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const tn::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
