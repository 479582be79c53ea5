#pragma once

// Local HTTP/JSON service for the browser workbench. All analytics endpoints
// are GET over cached networks; the one write path appends journal entries.
//
//   GET  /instruments
//   GET  /network?symbol=&res=&subtype=&from=&to=&points=
//   GET  /figures?...        polylines, markedness, extrapolations
//   GET  /extrema?...
//   GET  /interactions?...&tau=
//   GET  /shift-test?...&deltas=0,0.01,-0.01
//   GET  /reports, /reports/<file>
//   GET  /journal, POST /journal
//
// Networks are built on first use and kept per (symbol, resolution,
// subtype). A poller thread is the single writer that rebuilds entries whose
// source file changed; readers hold shared_ptr snapshots and never block on
// a rebuild.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>

#include <httplib.h>
#include <json.hpp>

#include "tn/config.hpp"
#include "tn/pipeline.hpp"

namespace tn {

class Service {
public:
    struct Entry {
        std::string symbol;
        int minutes = 0;
        int subtype = 0;
        BarSeries bars;  // tail the network was built on
        Network network;
        std::filesystem::file_time_type mtime;
        std::size_t generation = 0;
    };
    using Key = std::tuple<std::string, int, int>;

    explicit Service(RunConfig cfg) : cfg_(std::move(cfg)) { routes(); }
    ~Service() { stop(); }
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int start(const std::string& host, int port) {
        const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
        listener_ = std::jthread([this] { server_.listen_after_bind(); });
        poller_ = std::jthread([this](std::stop_token st) { poll(st); });
        server_.wait_until_ready();
        return bound;
    }

    /// Blocks serving in the calling thread.
    void run(const std::string& host, int port) {
        poller_ = std::jthread([this](std::stop_token st) { poll(st); });
        if (!server_.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (listener_.joinable()) listener_.join();
        if (poller_.joinable()) {
            poller_.request_stop();
            poller_.join();
        }
    }

    /// Cached entry, building it on a miss.
    std::shared_ptr<const Entry> entry(const std::string& symbol, int minutes, int subtype) {
        const Key key{symbol, minutes, subtype};
        {
            std::shared_lock lock(cache_mutex_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        std::lock_guard writer(build_mutex_);
        {
            std::shared_lock lock(cache_mutex_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        auto e = build(symbol, minutes, subtype, 0);
        std::unique_lock lock(cache_mutex_);
        return cache_[key] = std::move(e);
    }

    /// Rebuilds every cached entry whose data file changed. Returns the
    /// number of rebuilt entries.
    std::size_t refresh() {
        std::lock_guard writer(build_mutex_);
        std::vector<std::pair<Key, std::shared_ptr<const Entry>>> snapshot;
        {
            std::shared_lock lock(cache_mutex_);
            snapshot.assign(cache_.begin(), cache_.end());
        }
        std::size_t rebuilt = 0;
        for (auto& [key, e] : snapshot) {
            std::error_code ec;
            const auto mtime = std::filesystem::last_write_time(instrument_path(cfg_, e->symbol), ec);
            if (ec || mtime == e->mtime) continue;
            try {
                auto fresh = build(e->symbol, e->minutes, e->subtype, e->generation + 1);
                std::unique_lock lock(cache_mutex_);
                cache_[key] = std::move(fresh);
                ++rebuilt;
            } catch (const Error&) {
                // keep serving the previous snapshot
            }
        }
        return rebuilt;
    }

    [[nodiscard]] const RunConfig& config() const { return cfg_; }
    [[nodiscard]] std::filesystem::path journal_path() const {
        return std::filesystem::path(cfg_.output_dir) / "journal.jsonl";
    }

    /// Handler table, exposed for in-process tests.
    httplib::Server& server() { return server_; }

private:
    std::shared_ptr<const Entry> build(const std::string& symbol, int minutes, int subtype, std::size_t generation) {
        const auto path = instrument_path(cfg_, symbol);
        const auto mtime = std::filesystem::last_write_time(path);
        const auto inst = load_instrument(cfg_, symbol);
        const auto series = bars_before(inst, minutes, cfg_.date ? *cfg_.date : default_date(std::span(&inst, 1)));
        const auto schedule = cfg_.schedule(subtype);
        const std::size_t want = schedule.longest() - 1 + cfg_.service_views * cfg_.chart.view_columns;
        const std::size_t need = required_history(schedule, cfg_.chart.view_columns);
        if (series.size() < need)
            throw InsufficientHistory(symbol, schedule.label() + " needs " + std::to_string(need) + " bars, have " +
                                                  std::to_string(series.size()));
        auto e = std::make_shared<Entry>();
        e->symbol = symbol;
        e->minutes = minutes;
        e->subtype = subtype;
        const std::size_t take = std::min(want, series.size());
        e->bars = series.sub(series.size() - take, take);
        e->network = build_network(e->bars, schedule, {cfg_.threads});
        e->mtime = mtime;
        e->generation = generation;
        return e;
    }

    void poll(std::stop_token st) {
        std::mutex m;
        std::condition_variable_any cv;
        while (!st.stop_requested()) {
            std::unique_lock lock(m);
            cv.wait_for(lock, st, std::chrono::milliseconds(cfg_.poll_ms), [] { return false; });
            if (st.stop_requested()) break;
            refresh();
        }
    }

    struct Query {
        std::string symbol;
        int minutes;
        int subtype;
    };

    Query query(const httplib::Request& req) const {
        if (!req.has_param("symbol")) throw ConfigError("missing 'symbol'");
        Query q{req.get_param_value("symbol"), cfg_.resolution, cfg_.subtype};
        if (req.has_param("res")) q.minutes = parse_resolution(req.get_param_value("res"));
        if (req.has_param("subtype")) {
            auto s = req.get_param_value("subtype");
            if (s.rfind("TN", 0) == 0) s = s.substr(2);
            try {
                q.subtype = std::stoi(s);
            } catch (const std::exception&) {
                throw ConfigError("bad subtype");
            }
        }
        if (q.subtype < 1 || q.subtype > 5) throw ConfigError("subtype must be 1..5");
        return q;
    }

    static std::size_t size_param(const httplib::Request& req, const char* name, std::size_t fallback) {
        if (!req.has_param(name)) return fallback;
        try {
            return static_cast<std::size_t>(std::stoull(req.get_param_value(name)));
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad '") + name + "'");
        }
    }

    static double double_param(const httplib::Request& req, const char* name, double fallback) {
        if (!req.has_param(name)) return fallback;
        try {
            return std::stod(req.get_param_value(name));
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad '") + name + "'");
        }
    }

    /// View [from, to) in the entry's columns; default is the latest view.
    ViewWindow view_of(const httplib::Request& req, const Entry& e) const {
        const std::size_t n = e.bars.size();
        const std::size_t first_ok = e.network.first_complete_column();
        const std::size_t to = std::min(n, size_param(req, "to", n));
        const std::size_t from = size_param(req, "from", to >= cfg_.chart.view_columns ? to - cfg_.chart.view_columns : 0);
        if (from >= to) throw ConfigError("empty view");
        if (from < first_ok) throw ConfigError("view starts before the first complete column " + std::to_string(first_ok));
        return {from, to};
    }

    Chart chart_for(const httplib::Request& req, const Entry& e, ChartConfig cc) const {
        return analyze_chart(e.bars, e.network, view_of(req, e), cc);
    }

    static nlohmann::json head(const Entry& e, ViewWindow v) {
        return {{"symbol", e.symbol},
                {"resolution_minutes", e.minutes},
                {"subtype", "TN" + std::to_string(e.subtype)},
                {"generation", e.generation},
                {"columns", e.bars.size()},
                {"view", {{"from", v.first}, {"to", v.end}}},
                {"t_start", e.bars[v.first].t_start},
                {"t_end", e.bars[v.end - 1].t_end}};
    }

    template <typename F>
    void get(const std::string& pattern, F body) {
        server_.Get(pattern, [this, body](const httplib::Request& req, httplib::Response& res) {
            respond(res, [&] { return body(req); });
        });
    }

    template <typename F>
    static void respond(httplib::Response& res, F&& body) {
        try {
            res.set_content(body().dump(), "application/json");
        } catch (const InsufficientHistory& e) {
            error(res, 422, e.what());
        } catch (const DataError& e) {
            error(res, 404, e.what());
        } catch (const Error& e) {
            error(res, 400, e.what());
        } catch (const std::exception& e) {
            error(res, 500, e.what());
        }
    }

    static void error(httplib::Response& res, int status, const std::string& msg) {
        res.status = status;
        res.set_content(nlohmann::json{{"error", msg}}.dump(), "application/json");
    }

    void routes() {
        get("/instruments", [this](const httplib::Request&) {
            auto arr = nlohmann::json::array();
            for (const auto& s : list_instruments(cfg_)) arr.push_back({{"symbol", s}});
            return nlohmann::json{{"instruments", arr}, {"config_hash", config_hash(cfg_)}};
        });
        get("/network", [this](const httplib::Request& req) {
            const auto q = query(req);
            const auto e = entry(q.symbol, q.minutes, q.subtype);
            const auto v = view_of(req, *e);
            auto j = head(*e, v);
            j["network"] = network_to_json(e->network, v.first, v.end, size_param(req, "points", 2000));
            j["slice"] = slice_to_json(slice(e->network, v.end - 1));
            auto bars = nlohmann::json::array();
            for (std::size_t t = v.first; t < v.end; ++t)
                bars.push_back({{"index", t}, {"mid", e->bars[t].mid}, {"half", e->bars[t].half}});
            j["bars"] = std::move(bars);
            return j;
        });
        get("/figures", [this](const httplib::Request& req) {
            const auto q = query(req);
            const auto e = entry(q.symbol, q.minutes, q.subtype);
            const auto ch = chart_for(req, *e, cfg_.chart);
            auto j = head(*e, ch.view);
            j["figures"] = figures_with_extrapolations(ch, size_param(req, "horizon", cfg_.extrapolation_horizon));
            j["stationary_mode_heuristic"] = ch.stationary_hint();
            return j;
        });
        get("/extrema", [this](const httplib::Request& req) {
            const auto q = query(req);
            const auto e = entry(q.symbol, q.minutes, q.subtype);
            const auto ch = chart_for(req, *e, cfg_.chart);
            auto j = head(*e, ch.view);
            auto arr = nlohmann::json::array();
            for (const auto& x : ch.extrema) arr.push_back(extremum_to_json(x));
            j["extrema"] = std::move(arr);
            return j;
        });
        get("/interactions", [this](const httplib::Request& req) {
            const auto q = query(req);
            const auto e = entry(q.symbol, q.minutes, q.subtype);
            auto cc = cfg_.chart;
            cc.tau = double_param(req, "tau", cc.tau);
            if (!(cc.tau >= 0.0)) throw ConfigError("tau must be non-negative");
            const auto ch = chart_for(req, *e, cc);
            auto j = head(*e, ch.view);
            auto arr = nlohmann::json::array();
            for (const auto& i : ch.interactions) arr.push_back(interaction_to_json(i));
            j["tau"] = cc.tau;
            j["interactions"] = std::move(arr);
            j["qualification"] = qualification_to_json(ch.result);
            return j;
        });
        get("/shift-test", [this](const httplib::Request& req) {
            const auto q = query(req);
            const auto e = entry(q.symbol, q.minutes, q.subtype);
            auto cc = cfg_.chart;
            cc.tau = double_param(req, "tau", cc.tau);
            std::vector<double> deltas = cfg_.deltas;
            if (req.has_param("deltas")) {
                deltas.clear();
                std::stringstream ss(req.get_param_value("deltas"));
                for (std::string tok; std::getline(ss, tok, ',');) {
                    try {
                        deltas.push_back(std::stod(tok));
                    } catch (const std::exception&) {
                        throw ConfigError("bad delta '" + tok + "'");
                    }
                }
            }
            const auto ch = chart_for(req, *e, cc);
            auto j = head(*e, ch.view);
            j["tau"] = cc.tau;
            j["shift_test"] = shift_test_to_json(shift_test(ch, deltas, cc.tau));
            return j;
        });
        get("/reports", [this](const httplib::Request&) {
            auto arr = nlohmann::json::array();
            const auto dir = std::filesystem::path(cfg_.output_dir) / "reports";
            if (std::filesystem::is_directory(dir)) {
                std::vector<std::string> names;
                for (const auto& f : std::filesystem::directory_iterator(dir))
                    if (f.path().extension() == ".json") names.push_back(f.path().filename().string());
                std::sort(names.begin(), names.end());
                for (auto& n : names) arr.push_back(n);
            }
            return nlohmann::json{{"reports", arr}};
        });
        get(R"(/reports/([A-Za-z0-9_.\-]+\.json))", [this](const httplib::Request& req) {
            const auto path = std::filesystem::path(cfg_.output_dir) / "reports" / req.matches[1].str();
            std::ifstream in(path);
            if (!in) throw DataError("no report " + req.matches[1].str());
            return nlohmann::json::parse(in);
        });
        get("/journal", [this](const httplib::Request&) {
            std::lock_guard lock(journal_mutex_);
            auto arr = nlohmann::json::array();
            std::ifstream in(journal_path());
            for (std::string line; std::getline(in, line);)
                if (!line.empty()) arr.push_back(nlohmann::json::parse(line));
            return nlohmann::json{{"entries", arr}};
        });
        server_.Post("/journal", [this](const httplib::Request& req, httplib::Response& res) {
            respond(res, [&] {
                nlohmann::json entry;
                try {
                    entry = nlohmann::json::parse(req.body);
                } catch (const nlohmann::json::exception&) {
                    throw ConfigError("journal entry must be JSON");
                }
                if (!entry.is_object()) throw ConfigError("journal entry must be a JSON object");
                std::lock_guard lock(journal_mutex_);
                std::filesystem::create_directories(journal_path().parent_path());
                std::ofstream out(journal_path(), std::ios::app);
                if (!out) throw DataError("cannot open journal");
                out << entry.dump() << '\n';
                return nlohmann::json{{"ok", true}};
            });
        });
    }

    RunConfig cfg_;
    httplib::Server server_;
    std::shared_mutex cache_mutex_;
    std::mutex build_mutex_;  // single writer for builds and refreshes
    std::mutex journal_mutex_;
    std::map<Key, std::shared_ptr<const Entry>> cache_;
    std::jthread listener_;
    std::jthread poller_;
};

}  // namespace tn
