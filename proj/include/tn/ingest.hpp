#pragma once

// Tick loading and bar aggregation.
//
// A bar is stored as its midpoint M and half-range d, so that H = M + d and
// L = M - d bracket every tick of the group exactly.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tn/binary_io.hpp"
#include "tn/error.hpp"

namespace tn {

/// Epoch milliseconds, exchange-local.
using Timestamp = std::int64_t;

struct Tick {
    Timestamp timestamp = 0;
    double value = 0.0;
    double volume = 0.0;
};

struct Bar {
    std::size_t index = 0;
    Timestamp t_start = 0;
    Timestamp t_end = 0;
    double mid = 0.0;   // M
    double half = 0.0;  // d
    double volume = 0.0;

    [[nodiscard]] double high() const noexcept { return mid + half; }
    [[nodiscard]] double low() const noexcept { return mid - half; }
};

struct Granularity {
    enum class Kind : std::uint8_t { time = 0, volume = 1, external = 2 };
    Kind kind = Kind::external;
    double amount = 0.0;  // period in ms for time bars, quota for volume bars

    friend bool operator==(const Granularity&, const Granularity&) = default;
};

/// How M is derived from a group of ticks. Midrange keeps the band symmetric
/// around the extremes; the volume-weighted mode widens d to still cover them.
enum class MidpointMode : std::uint8_t { midrange, volume_weighted };

struct BarSeries {
    std::vector<Bar> bars;
    Granularity granularity;

    [[nodiscard]] std::size_t size() const noexcept { return bars.size(); }
    [[nodiscard]] bool empty() const noexcept { return bars.empty(); }
    [[nodiscard]] const Bar& operator[](std::size_t i) const { return bars[i]; }

    [[nodiscard]] std::vector<double> mids() const {
        std::vector<double> m(bars.size());
        std::transform(bars.begin(), bars.end(), m.begin(), [](const Bar& b) { return b.mid; });
        return m;
    }

    /// Bars [first, first + count) renumbered from zero.
    [[nodiscard]] BarSeries sub(std::size_t first, std::size_t count) const {
        BarSeries out;
        out.granularity = granularity;
        first = std::min(first, bars.size());
        count = std::min(count, bars.size() - first);
        out.bars.assign(bars.begin() + static_cast<std::ptrdiff_t>(first),
                        bars.begin() + static_cast<std::ptrdiff_t>(first + count));
        for (std::size_t i = 0; i < out.bars.size(); ++i) out.bars[i].index = i;
        return out;
    }
};

/// Column mapping for tick CSV input.
struct CsvFormat {
    char delimiter = ',';
    bool has_header = true;
    // Column names are used when the file has a header, indices otherwise.
    std::string timestamp_column = "timestamp";
    std::string value_column = "value";
    std::string volume_column = "volume";
    std::size_t timestamp_index = 0;
    std::size_t value_index = 1;
    std::size_t volume_index = 2;
    // Strict loading throws on the first bad row; lenient loading skips it
    // and records it in the report.
    bool strict = true;
};

struct RowError {
    std::size_t line = 0;
    std::string message;
};

struct TickLoad {
    std::vector<Tick> ticks;
    std::vector<RowError> errors;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    T v{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return v;
}

}  // namespace detail

/// Parses ticks from a CSV stream. Rows must be in non-decreasing timestamp
/// order; NaN prices and negative volumes are rejected.
inline TickLoad load_ticks(std::istream& in, const CsvFormat& fmt = {}) {
    TickLoad out;
    std::string line;
    std::size_t lineno = 0;
    std::size_t ts_col = fmt.timestamp_index;
    std::size_t val_col = fmt.value_index;
    std::size_t vol_col = fmt.volume_index;

    auto reject = [&](std::size_t ln, std::string msg) {
        if (fmt.strict) throw MalformedRow(ln, msg);
        out.errors.push_back({ln, std::move(msg)});
    };

    if (fmt.has_header) {
        if (!std::getline(in, line)) return out;
        ++lineno;
        const auto names = detail::split(line, fmt.delimiter);
        auto find = [&](const std::string& name) {
            auto it = std::find(names.begin(), names.end(), name);
            if (it == names.end()) throw MalformedRow(lineno, "missing column '" + name + "'");
            return static_cast<std::size_t>(it - names.begin());
        };
        ts_col = find(fmt.timestamp_column);
        val_col = find(fmt.value_column);
        vol_col = find(fmt.volume_column);
    }
    const std::size_t need = std::max({ts_col, val_col, vol_col}) + 1;

    Timestamp last = std::numeric_limits<Timestamp>::min();
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split(line, fmt.delimiter);
        if (fields.size() < need) {
            reject(lineno, "expected at least " + std::to_string(need) + " fields");
            continue;
        }
        const auto ts = detail::parse_number<Timestamp>(fields[ts_col]);
        const auto value = detail::parse_number<double>(fields[val_col]);
        const auto volume = detail::parse_number<double>(fields[vol_col]);
        if (!ts) {
            reject(lineno, "bad timestamp");
            continue;
        }
        if (!value || !std::isfinite(*value)) {
            reject(lineno, "bad value");
            continue;
        }
        if (!volume || !std::isfinite(*volume) || *volume < 0.0) {
            reject(lineno, "bad volume");
            continue;
        }
        if (*ts < last) {
            if (fmt.strict) throw NonMonotonicTimestamp(lineno);
            out.errors.push_back({lineno, "timestamp decreases"});
            continue;
        }
        last = *ts;
        out.ticks.push_back({*ts, *value, *volume});
    }
    return out;
}

inline TickLoad load_ticks_file(const std::string& path, const CsvFormat& fmt = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return load_ticks(in, fmt);
}

namespace detail {

inline Bar make_bar(std::span<const Tick> group, std::size_t index, Timestamp t0, Timestamp t1,
                    MidpointMode mode) {
    double hi = group.front().value;
    double lo = group.front().value;
    double vol = 0.0;
    double pv = 0.0;
    for (const auto& t : group) {
        hi = std::max(hi, t.value);
        lo = std::min(lo, t.value);
        vol += t.volume;
        pv += t.value * t.volume;
    }
    Bar b;
    b.index = index;
    b.t_start = t0;
    b.t_end = t1;
    b.volume = vol;
    if (mode == MidpointMode::volume_weighted && vol > 0.0) {
        b.mid = std::clamp(pv / vol, lo, hi);
        b.half = std::max(hi - b.mid, b.mid - lo);
    } else {
        b.mid = 0.5 * (hi + lo);
        b.half = 0.5 * (hi - lo);
    }
    return b;
}

}  // namespace detail

/// Groups ticks into epoch-aligned periods [k*period, (k+1)*period).
/// Empty periods produce no bar.
inline BarSeries aggregate_time_bars(std::span<const Tick> ticks, Timestamp period_ms,
                                     MidpointMode mode = MidpointMode::midrange) {
    if (period_ms <= 0) throw ConfigError("bar period must be positive");
    if (ticks.empty()) throw EmptyInput();
    BarSeries out;
    out.granularity = {Granularity::Kind::time, static_cast<double>(period_ms)};

    auto bucket_of = [period_ms](Timestamp t) {
        Timestamp q = t / period_ms;
        if (t % period_ms != 0 && t < 0) --q;  // floor for pre-epoch stamps
        return q;
    };
    std::size_t first = 0;
    while (first < ticks.size()) {
        const Timestamp bucket = bucket_of(ticks[first].timestamp);
        std::size_t last = first + 1;
        while (last < ticks.size() && bucket_of(ticks[last].timestamp) == bucket) ++last;
        out.bars.push_back(detail::make_bar(ticks.subspan(first, last - first), out.bars.size(),
                                            bucket * period_ms, (bucket + 1) * period_ms, mode));
        first = last;
    }
    return out;
}

/// Normalized volume bars: ticks are accumulated until their volume reaches
/// the quota, then the bar is closed. A trailing partial group still becomes a
/// bar so that volume is conserved.
inline BarSeries aggregate_nvb(std::span<const Tick> ticks, double quota,
                               MidpointMode mode = MidpointMode::midrange) {
    if (!(quota > 0.0)) throw ConfigError("volume quota must be positive");
    if (ticks.empty()) throw EmptyInput();
    BarSeries out;
    out.granularity = {Granularity::Kind::volume, quota};
    std::size_t first = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        acc += ticks[i].volume;
        if (acc >= quota || i + 1 == ticks.size()) {
            out.bars.push_back(detail::make_bar(ticks.subspan(first, i + 1 - first), out.bars.size(),
                                                ticks[first].timestamp, ticks[i].timestamp, mode));
            first = i + 1;
            acc = 0.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Columnar bar cache: 16-byte magic, version byte, granularity, count, then
// one contiguous column per field.

inline constexpr bin::Magic kBarCacheMagic = bin::make_magic("TN-BARCACHE\x1a\r\n\0");
inline constexpr std::uint8_t kBarCacheVersion = 1;

inline void write_bar_cache(std::ostream& os, const BarSeries& s) {
    bin::put_header(os, kBarCacheMagic, kBarCacheVersion);
    bin::put(os, static_cast<std::uint8_t>(s.granularity.kind));
    bin::put(os, s.granularity.amount);
    bin::put(os, static_cast<std::uint64_t>(s.size()));
    auto column = [&](auto proj) {
        using T = decltype(proj(s.bars.front()));
        std::vector<T> col;
        col.reserve(s.size());
        for (const auto& b : s.bars) col.push_back(proj(b));
        bin::put_span<T>(os, col);
    };
    if (s.empty()) return;
    column([](const Bar& b) { return static_cast<std::uint64_t>(b.index); });
    column([](const Bar& b) { return b.t_start; });
    column([](const Bar& b) { return b.t_end; });
    column([](const Bar& b) { return b.mid; });
    column([](const Bar& b) { return b.half; });
    column([](const Bar& b) { return b.volume; });
}

inline BarSeries read_bar_cache(std::istream& is) {
    bin::expect_header(is, kBarCacheMagic, kBarCacheVersion);
    BarSeries s;
    s.granularity.kind = static_cast<Granularity::Kind>(bin::get<std::uint8_t>(is));
    s.granularity.amount = bin::get<double>(is);
    const auto n = static_cast<std::size_t>(bin::get<std::uint64_t>(is));
    if (n == 0) return s;
    const auto idx = bin::get_vector<std::uint64_t>(is, n);
    const auto t0 = bin::get_vector<Timestamp>(is, n);
    const auto t1 = bin::get_vector<Timestamp>(is, n);
    const auto mid = bin::get_vector<double>(is, n);
    const auto half = bin::get_vector<double>(is, n);
    const auto vol = bin::get_vector<double>(is, n);
    s.bars.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        s.bars[i] = {static_cast<std::size_t>(idx[i]), t0[i], t1[i], mid[i], half[i], vol[i]};
    return s;
}

}  // namespace tn
