#pragma once

// The curve bundle ("topological network") for one series and one subtype.
//
// Curves are stored per rank (column-major by curve); curve k holds values
// for bar indices t >= n_k - 1. Only bar midpoints enter the regressions.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tn/binary_io.hpp"
#include "tn/error.hpp"
#include "tn/ingest.hpp"
#include "tn/rolling_regression.hpp"
#include "tn/schedule.hpp"

namespace tn {

struct BuildOptions {
    unsigned threads = 0;  // 0: hardware concurrency
};

struct NetworkSlice {
    std::size_t t = 0;
    std::vector<std::size_t> ranks;  // 0-based curve ranks defined at t
    std::vector<double> ordinates;
};

class Network {
public:
    Network() = default;

    [[nodiscard]] const CurveSchedule& schedule() const noexcept { return schedule_; }
    [[nodiscard]] std::string label() const { return schedule_.label(); }
    [[nodiscard]] std::size_t curve_count() const noexcept { return curves_.size(); }
    [[nodiscard]] std::size_t columns() const noexcept { return mids_.size(); }
    [[nodiscard]] std::span<const double> mids() const noexcept { return mids_; }

    /// First bar index at which curve k (0-based rank) is defined.
    [[nodiscard]] std::size_t start(std::size_t k) const { return schedule_.windows[k] - 1; }
    [[nodiscard]] std::span<const double> curve(std::size_t k) const { return curves_[k]; }
    [[nodiscard]] bool defined(std::size_t k, std::size_t t) const { return t >= start(k) && t < columns(); }
    [[nodiscard]] double value(std::size_t k, std::size_t t) const { return curves_[k][t - start(k)]; }

    /// Columns before this index lack the longest curves.
    [[nodiscard]] std::size_t first_complete_column() const { return schedule_.longest() - 1; }
    [[nodiscard]] bool complete_at(std::size_t t) const { return t >= first_complete_column() && t < columns(); }
    [[nodiscard]] bool partial() const { return columns() < schedule_.longest(); }
    [[nodiscard]] const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    /// Number of curves defined at column t.
    [[nodiscard]] std::size_t defined_count(std::size_t t) const {
        const auto& w = schedule_.windows;
        return static_cast<std::size_t>(std::upper_bound(w.begin(), w.end(), t + 1) - w.begin());
    }

    /// Series values consumed by the regressions at column t.
    [[nodiscard]] std::uint64_t slice_value_count(std::size_t t) const {
        std::uint64_t total = 0;
        for (std::size_t k = 0; k < curve_count(); ++k)
            if (defined(k, t)) total += schedule_.windows[k];
        return total;
    }

    /// Extends every curve by one column; existing values never change.
    void append(double mid) {
        if (fits_.size() != curves_.size()) resume();
        mids_.push_back(mid);
        const std::size_t t = mids_.size() - 1;
        for (std::size_t k = 0; k < curves_.size(); ++k) {
            if (t < start(k)) continue;
            auto& fit = fits_[k];
            curves_[k].push_back(t == start(k) ? fit.reset(mids_, t) : fit.advance(mids_, t));
        }
        if (!partial()) warnings_.clear();
    }

    void append(const Bar& bar) { append(bar.mid); }

    friend Network build_network(std::span<const double>, const CurveSchedule&, const BuildOptions&);
    friend Network read_network(std::istream&);
    friend bool operator==(const Network& a, const Network& b) {
        return a.schedule_.params == b.schedule_.params && a.schedule_.windows == b.schedule_.windows &&
               a.mids_ == b.mids_ && a.curves_ == b.curves_;
    }

private:
    // Rebuilds the rolling states by replaying history (after a reload).
    void resume() {
        fits_.clear();
        fits_.reserve(curves_.size());
        for (std::size_t k = 0; k < curves_.size(); ++k) {
            fits_.emplace_back(schedule_.windows[k], schedule_.order());
            for (std::size_t t = start(k); t < columns(); ++t)
                (t == start(k)) ? fits_[k].reset(mids_, t) : fits_[k].advance(mids_, t);
        }
    }

    CurveSchedule schedule_;
    std::vector<double> mids_;
    std::vector<std::vector<double>> curves_;
    std::vector<RollingPolyFit> fits_;
    std::vector<std::string> warnings_;
};

inline Network build_network(std::span<const double> mids, const CurveSchedule& schedule,
                             const BuildOptions& opts = {}) {
    if (schedule.size() == 0) throw InvalidSchedule("empty schedule");
    if (mids.size() < schedule.shortest() + 1) throw SeriesTooShort(mids.size(), schedule.shortest() + 1);
    Network net;
    net.schedule_ = schedule;
    net.mids_.assign(mids.begin(), mids.end());
    const std::size_t n_curves = schedule.size();
    net.curves_.resize(n_curves);
    net.fits_.reserve(n_curves);
    for (std::size_t k = 0; k < n_curves; ++k) net.fits_.emplace_back(schedule.windows[k], schedule.order());
    if (net.partial())
        net.warnings_.push_back("partial network: " + std::to_string(mids.size()) + " bars < longest window " +
                                std::to_string(schedule.longest()));

    auto run_curve = [&net](std::size_t k) {
        const std::size_t first = net.start(k);
        auto& out = net.curves_[k];
        if (first >= net.columns()) return;
        out.reserve(net.columns() - first);
        auto& fit = net.fits_[k];
        out.push_back(fit.reset(net.mids_, first));
        for (std::size_t t = first + 1; t < net.columns(); ++t) out.push_back(fit.advance(net.mids_, t));
    };

    unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_curves));
    if (threads <= 1) {
        for (std::size_t k = 0; k < n_curves; ++k) run_curve(k);
        return net;
    }
    // Curves are independent; each worker pulls ranks from a shared counter.
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i)
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < n_curves; k = next++) run_curve(k);
            });
    }
    return net;
}

inline Network build_network(const BarSeries& series, const CurveSchedule& schedule, const BuildOptions& opts = {}) {
    const auto m = series.mids();
    return build_network(m, schedule, opts);
}

inline NetworkSlice slice(const Network& net, std::size_t t) {
    if (t >= net.columns()) throw IndexOutOfRange(t, net.columns());
    NetworkSlice s;
    s.t = t;
    for (std::size_t k = 0; k < net.curve_count(); ++k) {
        if (!net.defined(k, t)) continue;
        s.ranks.push_back(k);
        s.ordinates.push_back(net.value(k, t));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Binary form: magic, version, schedule, source midpoints, then each curve's
// ordinates contiguously.

inline constexpr bin::Magic kNetworkMagic = bin::make_magic("TN-NETWORK\x1a\r\n");
inline constexpr std::uint8_t kNetworkVersion = 1;

inline void write_network(std::ostream& os, const Network& net) {
    const auto& p = net.schedule().params;
    bin::put_header(os, kNetworkMagic, kNetworkVersion);
    bin::put(os, static_cast<std::int32_t>(p.order));
    bin::put(os, static_cast<std::uint64_t>(p.count));
    bin::put(os, static_cast<std::uint64_t>(p.first));
    bin::put(os, static_cast<std::uint64_t>(p.last));
    bin::put(os, p.spacing);
    std::vector<std::uint64_t> windows(net.schedule().windows.begin(), net.schedule().windows.end());
    bin::put_span<std::uint64_t>(os, windows);
    bin::put(os, static_cast<std::uint64_t>(net.columns()));
    bin::put_span<double>(os, net.mids());
    for (std::size_t k = 0; k < net.curve_count(); ++k) bin::put_span<double>(os, net.curve(k));
}

inline Network read_network(std::istream& is) {
    bin::expect_header(is, kNetworkMagic, kNetworkVersion);
    Network net;
    auto& p = net.schedule_.params;
    p.order = bin::get<std::int32_t>(is);
    p.count = static_cast<std::size_t>(bin::get<std::uint64_t>(is));
    p.first = static_cast<std::size_t>(bin::get<std::uint64_t>(is));
    p.last = static_cast<std::size_t>(bin::get<std::uint64_t>(is));
    p.spacing = bin::get<double>(is);
    const auto windows = bin::get_vector<std::uint64_t>(is, p.count);
    net.schedule_.windows.assign(windows.begin(), windows.end());
    const auto columns = static_cast<std::size_t>(bin::get<std::uint64_t>(is));
    net.mids_ = bin::get_vector<double>(is, columns);
    net.curves_.resize(p.count);
    for (std::size_t k = 0; k < p.count; ++k) {
        const std::size_t first = net.start(k);
        net.curves_[k] = bin::get_vector<double>(is, columns > first ? columns - first : 0);
    }
    if (net.partial()) net.warnings_.push_back("partial network");
    return net;
}

/// JSON view of bar columns [from, to), keeping at most `max_points` samples
/// per curve (every stride-th column).
inline nlohmann::json network_to_json(const Network& net, std::size_t from, std::size_t to,
                                      std::size_t max_points = 0) {
    to = std::min(to, net.columns());
    from = std::min(from, to);
    const std::size_t span = to - from;
    const std::size_t stride = (max_points && span > max_points) ? (span + max_points - 1) / max_points : 1;
    const auto& p = net.schedule().params;
    nlohmann::json j;
    j["subtype"] = net.label();
    j["schedule"] = {{"order", p.order}, {"count", p.count}, {"first", p.first}, {"last", p.last}, {"spacing", p.spacing}};
    j["windows"] = net.schedule().windows;
    j["columns"] = net.columns();
    j["from"] = from;
    j["to"] = to;
    j["stride"] = stride;
    j["first_complete_column"] = net.first_complete_column();
    auto curves = nlohmann::json::array();
    for (std::size_t k = 0; k < net.curve_count(); ++k) {
        auto cols = nlohmann::json::array();
        auto vals = nlohmann::json::array();
        for (std::size_t t = from; t < to; t += stride) {
            if (!net.defined(k, t)) continue;
            cols.push_back(t);
            vals.push_back(net.value(k, t));
        }
        if (cols.empty()) continue;
        curves.push_back({{"rank", k + 1}, {"window", net.schedule().windows[k]}, {"columns", cols}, {"values", vals}});
    }
    j["curves"] = std::move(curves);
    return j;
}

inline nlohmann::json slice_to_json(const NetworkSlice& s) {
    nlohmann::json ranks = nlohmann::json::array();
    for (auto k : s.ranks) ranks.push_back(k + 1);
    return {{"t", s.t}, {"ranks", ranks}, {"ordinates", s.ordinates}};
}

}  // namespace tn
