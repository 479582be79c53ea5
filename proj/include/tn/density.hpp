#pragma once

// Rasterized coverage of the curve bundle over a window of bar columns.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tn/error.hpp"
#include "tn/network.hpp"

namespace tn {

/// Half-open range of bar indices [first, end).
struct ViewWindow {
    std::size_t first = 0;
    std::size_t end = 0;
    [[nodiscard]] std::size_t size() const noexcept { return end > first ? end - first : 0; }
    [[nodiscard]] bool contains(std::size_t t) const noexcept { return t >= first && t < end; }
    friend bool operator==(const ViewWindow&, const ViewWindow&) = default;
};

enum class Splat : std::uint8_t {
    none,     // unit mass into the bin holding the ordinate
    segment,  // unit mass spread over the curve's vertical extent in the column (min. one bin)
};

struct DensityOptions {
    std::size_t rows = 512;
    Splat splat = Splat::segment;
    // Curves with rank below this (0-based) count as "short" for attribution;
    // 0 disables the per-rank layer.
    std::size_t short_rank_limit = 0;
};

inline constexpr std::size_t kMinDensityRows = 64;

class DensityField {
public:
    DensityField() = default;
    DensityField(std::size_t first_column, std::size_t columns, std::size_t rows, double lo, double hi)
        : first_(first_column), columns_(columns), rows_(rows), lo_(lo), hi_(hi),
          cells_(columns * rows, 0.0), defined_(columns, 0) {}

    [[nodiscard]] std::size_t first_column() const noexcept { return first_; }
    [[nodiscard]] std::size_t columns() const noexcept { return columns_; }
    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] double lo() const noexcept { return lo_; }
    [[nodiscard]] double hi() const noexcept { return hi_; }
    [[nodiscard]] double bin_height() const noexcept { return (hi_ - lo_) / static_cast<double>(rows_); }
    [[nodiscard]] bool empty() const noexcept { return columns_ == 0 || rows_ == 0; }

    /// Continuous bin coordinate: row r spans [r, r + 1).
    [[nodiscard]] double to_bin(double y) const noexcept { return (y - lo_) / bin_height(); }
    [[nodiscard]] double to_ordinate(double pos) const noexcept { return lo_ + pos * bin_height(); }

    [[nodiscard]] double at(std::size_t col, std::size_t row) const { return cells_[col * rows_ + row]; }
    double& at(std::size_t col, std::size_t row) { return cells_[col * rows_ + row]; }
    [[nodiscard]] std::span<const double> column(std::size_t col) const {
        return std::span(cells_).subspan(col * rows_, rows_);
    }
    std::span<double> column(std::size_t col) { return std::span(cells_).subspan(col * rows_, rows_); }

    [[nodiscard]] bool has_short_layer() const noexcept { return !short_.empty(); }
    [[nodiscard]] double short_at(std::size_t col, std::size_t row) const { return short_[col * rows_ + row]; }
    void enable_short_layer() { short_.assign(cells_.size(), 0.0); }
    double& short_at(std::size_t col, std::size_t row) { return short_[col * rows_ + row]; }
    std::span<double> short_column(std::size_t col) { return std::span(short_).subspan(col * rows_, rows_); }

    /// Number of curves contributing to a column.
    [[nodiscard]] std::size_t defined(std::size_t col) const { return defined_[col]; }
    std::size_t& defined(std::size_t col) { return defined_[col]; }

    [[nodiscard]] double column_mass(std::size_t col) const {
        double m = 0.0;
        for (double v : column(col)) m += v;
        return m;
    }

private:
    std::size_t first_ = 0;
    std::size_t columns_ = 0;
    std::size_t rows_ = 0;
    double lo_ = 0.0;
    double hi_ = 1.0;
    std::vector<double> cells_;
    std::vector<double> short_;
    std::vector<std::size_t> defined_;
};

/// Min/max ordinate of all curves defined inside the window.
inline std::pair<double, double> curve_range(const Network& net, ViewWindow view) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 0; k < net.curve_count(); ++k) {
        for (std::size_t t = std::max(view.first, net.start(k)); t < view.end; ++t) {
            const double v = net.value(k, t);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    return {lo, hi};
}

namespace detail {

// Adds unit mass spread uniformly over [a, b] (bin coordinates), kept inside
// [0, rows] and at least one bin wide.
inline void splat_interval(std::span<double> col, double a, double b, double mass,
                           std::span<double> short_col = {}) {
    const double rows = static_cast<double>(col.size());
    a = std::clamp(a, 0.0, rows);
    b = std::clamp(b, 0.0, rows);
    if (b - a < 1.0) {
        const double c = std::clamp(0.5 * (a + b), 0.5, rows - 0.5);
        a = c - 0.5;
        b = c + 0.5;
    }
    const double density = mass / (b - a);
    const auto r0 = static_cast<std::size_t>(std::floor(a));
    const auto r1 = std::min(col.size() - 1, static_cast<std::size_t>(std::floor(b)));
    for (std::size_t r = r0; r <= r1; ++r) {
        const double lo = std::max(a, static_cast<double>(r));
        const double hi = std::min(b, static_cast<double>(r + 1));
        if (hi <= lo) continue;
        col[r] += density * (hi - lo);
        if (!short_col.empty()) short_col[r] += density * (hi - lo);
    }
}

}  // namespace detail

/// Accumulates every curve into a rows x columns grid spanning the curves'
/// ordinate range over the view.
inline DensityField density_field(const Network& net, ViewWindow view, const DensityOptions& opts = {}) {
    if (opts.rows < kMinDensityRows) throw ConfigError("density field needs at least 64 rows");
    view.end = std::min(view.end, net.columns());
    if (view.size() == 0) throw EmptyView();
    auto [lo, hi] = curve_range(net, view);
    if (!(lo <= hi)) throw EmptyView();  // no curve defined in the window
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
        const double pad = 0.5 * std::max(1e-9, 1e-9 * std::abs(lo));
        lo -= pad;
        hi += pad;
    }
    DensityField field(view.first, view.size(), opts.rows, lo, hi);
    if (opts.short_rank_limit) field.enable_short_layer();

    for (std::size_t c = 0; c < view.size(); ++c) {
        const std::size_t t = view.first + c;
        auto col = field.column(c);
        for (std::size_t k = 0; k < net.curve_count(); ++k) {
            if (!net.defined(k, t)) continue;
            ++field.defined(c);
            const double y = net.value(k, t);
            const double pos = field.to_bin(y);
            const bool is_short = k < opts.short_rank_limit;
            if (opts.splat == Splat::none) {
                const auto r = std::min(opts.rows - 1, static_cast<std::size_t>(std::clamp(pos, 0.0, double(opts.rows))));
                col[r] += 1.0;
                if (is_short) field.short_at(c, r) += 1.0;
                continue;
            }
            // The curve occupies the span between the midpoints to its neighbours.
            const double prev = (t > 0 && net.defined(k, t - 1)) ? net.value(k, t - 1) : y;
            const double next = net.defined(k, t + 1) ? net.value(k, t + 1) : y;
            const double a = field.to_bin(0.5 * (prev + y));
            const double b = field.to_bin(0.5 * (next + y));
            const double top = std::max({a, b, pos});
            const double bottom = std::min({a, b, pos});
            detail::splat_interval(col, bottom, top, 1.0, is_short ? field.short_column(c) : std::span<double>{});
        }
    }
    return field;
}

}  // namespace tn
