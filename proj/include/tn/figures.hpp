#pragma once

// Characteristic figures: dense ridges (cords), persistent boundary tracks of
// the bundle (envelopes), and ridges that run along a boundary (boltropes).
//
// All thresholds are measured in grid units (bins, columns, multiples of the
// column median), so detection is unchanged by affine price transforms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "tn/density.hpp"
#include "tn/error.hpp"

namespace tn {

enum class FigureKind : std::uint8_t { cord, envelope, boltrope };
enum class FigureSide : std::uint8_t { upper, lower, interior };

inline std::string_view to_string(FigureKind k) {
    switch (k) {
        case FigureKind::cord: return "cord";
        case FigureKind::envelope: return "envelope";
        case FigureKind::boltrope: return "boltrope";
    }
    return "?";
}

inline std::string_view to_string(FigureSide s) {
    switch (s) {
        case FigureSide::upper: return "upper";
        case FigureSide::lower: return "lower";
        case FigureSide::interior: return "interior";
    }
    return "?";
}

struct RidgePoint {
    double column = 0.0;  // bar index
    double ordinate = 0.0;
    friend bool operator==(const RidgePoint&, const RidgePoint&) = default;
};

struct CharacteristicFigure {
    std::size_t id = 0;
    FigureKind kind = FigureKind::cord;
    FigureSide side = FigureSide::interior;
    std::vector<RidgePoint> ridge;  // strictly increasing columns
    double markedness = 0.0;
    std::optional<bool> is_short;   // set when the field carries the per-rank layer

    [[nodiscard]] std::size_t first_column() const { return static_cast<std::size_t>(ridge.front().column); }
    [[nodiscard]] std::size_t last_column() const { return static_cast<std::size_t>(ridge.back().column); }
    [[nodiscard]] std::size_t span() const { return ridge.empty() ? 0 : last_column() - first_column() + 1; }

    /// Ridge ordinate at a column, linearly interpolated between vertices.
    [[nodiscard]] std::optional<double> ordinate_at(double column) const {
        if (ridge.empty() || column < ridge.front().column || column > ridge.back().column) return std::nullopt;
        auto it = std::lower_bound(ridge.begin(), ridge.end(), column,
                                   [](const RidgePoint& p, double c) { return p.column < c; });
        if (it->column == column) return it->ordinate;
        const auto& b = *it;
        const auto& a = *(it - 1);
        const double f = (column - a.column) / (b.column - a.column);
        return a.ordinate + f * (b.ordinate - a.ordinate);
    }
};

struct FigureParams {
    double peak_factor = 2.0;           // rho: peaks must exceed rho x column median
    std::size_t max_jump = 2;           // J: bins per column when linking
    std::size_t max_gap = 2;            // columns without a peak that a ridge may bridge
    double min_span_fraction = 0.05;    // S as a fraction of view columns
    double envelope_quantile = 0.02;    // q
    double envelope_curvature = 1.0;    // max |second difference| of a boundary track, bins/column^2
    double envelope_contrast = 2.0;     // mass just inside the boundary over mass just outside it
    double boltrope_proximity = 3.0;    // zeta, bins
    double smoothing = 1.0;             // Gaussian sigma (bins) applied per column before peak search

    void validate() const {
        if (!(peak_factor > 0.0) || max_jump == 0 || !(min_span_fraction > 0.0) || !(envelope_curvature > 0.0) ||
            !(envelope_contrast > 0.0) ||
            !(boltrope_proximity > 0.0) || !(smoothing >= 0.0))
            throw ConfigError("figure parameters must be positive");
        if (!(envelope_quantile > 0.0 && envelope_quantile < 0.5)) throw ConfigError("envelope quantile must be in (0, 0.5)");
    }

    [[nodiscard]] std::size_t min_span(std::size_t view_columns) const {
        return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(min_span_fraction * static_cast<double>(view_columns))));
    }
};

namespace detail {

inline std::vector<double> gaussian_smooth(std::span<const double> col, double sigma) {
    if (sigma <= 0.0) return {col.begin(), col.end()};
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
    for (auto& k : kernel) k /= norm;
    const int n = static_cast<int>(col.size());
    std::vector<double> out(col.size(), 0.0);
    for (int r = 0; r < n; ++r) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
            const int s = r + i;
            if (s >= 0 && s < n) acc += kernel[i + radius] * col[s];
        }
        out[r] = acc;
    }
    return out;
}

/// Median over occupied cells; zero when the column is empty.
inline double occupied_median(std::span<const double> col, double floor) {
    std::vector<double> v;
    for (double x : col)
        if (x > floor) v.push_back(x);
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

struct Peak {
    double pos = 0.0;     // refined bin coordinate
    double height = 0.0;  // smoothed density
    bool prominent = false;
};

struct Track {
    std::vector<std::size_t> cols;  // field columns
    std::vector<Peak> peaks;
    bool open = true;
};

/// Position where the cumulative column mass crosses `target`.
inline double mass_quantile(std::span<const double> col, double target) {
    double acc = 0.0;
    for (std::size_t r = 0; r < col.size(); ++r) {
        if (col[r] > 0.0 && acc + col[r] >= target) return static_cast<double>(r) + (target - acc) / col[r];
        acc += col[r];
    }
    return static_cast<double>(col.size());
}

}  // namespace detail

/// Extracts cords, envelopes and boltropes from a density field. Figures are
/// sorted by descending markedness and numbered in that order.
inline std::vector<CharacteristicFigure> detect_figures(const DensityField& field, const FigureParams& params = {}) {
    params.validate();
    std::vector<CharacteristicFigure> figures;
    if (field.empty()) return figures;
    const std::size_t cols = field.columns();
    const std::size_t rows = field.rows();
    const std::size_t min_span = params.min_span(cols);

    std::vector<std::vector<double>> smooth(cols);
    std::vector<double> median(cols, 0.0);
    std::vector<std::vector<detail::Peak>> peaks(cols);

    for (std::size_t c = 0; c < cols; ++c) {
        smooth[c] = detail::gaussian_smooth(field.column(c), params.smoothing);
        const auto& s = smooth[c];
        const double floor = 1e-9 * std::max<double>(1.0, static_cast<double>(field.defined(c)));
        median[c] = detail::occupied_median(s, floor);
        if (median[c] <= 0.0) continue;
        // Candidate peaks: local maxima above the column median. Prominence
        // (rho) only decides which candidates count towards a cord.
        for (std::size_t r = 0; r < rows; ++r) {
            const double left = r > 0 ? s[r - 1] : 0.0;
            const double right = r + 1 < rows ? s[r + 1] : 0.0;
            if (!(s[r] > left && s[r] >= right && s[r] > median[c])) continue;
            const double denom = left - 2.0 * s[r] + right;
            const double offset = denom < 0.0 ? std::clamp(0.5 * (left - right) / denom, -0.5, 0.5) : 0.0;
            peaks[c].push_back({static_cast<double>(r) + 0.5 + offset, s[r], s[r] > params.peak_factor * median[c]});
        }
    }

    // Greedy nearest-peak linking, left to right.
    std::vector<detail::Track> tracks;
    for (std::size_t c = 0; c < cols; ++c) {
        std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;  // distance, track, peak
        for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
            auto& tr = tracks[ti];
            if (!tr.open) continue;
            const std::size_t gap = c - tr.cols.back();
            if (gap > params.max_gap + 1) {
                tr.open = false;
                continue;
            }
            const double allowed = static_cast<double>(params.max_jump * gap);
            for (std::size_t pi = 0; pi < peaks[c].size(); ++pi) {
                const double d = std::abs(peaks[c][pi].pos - tr.peaks.back().pos);
                if (d <= allowed) pairs.emplace_back(d, ti, pi);
            }
        }
        std::sort(pairs.begin(), pairs.end());
        std::vector<bool> track_used(tracks.size(), false);
        std::vector<bool> peak_used(peaks[c].size(), false);
        for (const auto& [d, ti, pi] : pairs) {
            if (track_used[ti] || peak_used[pi]) continue;
            track_used[ti] = peak_used[pi] = true;
            tracks[ti].cols.push_back(c);
            tracks[ti].peaks.push_back(peaks[c][pi]);
        }
        for (std::size_t pi = 0; pi < peaks[c].size(); ++pi)
            if (!peak_used[pi]) tracks.push_back({{c}, {peaks[c][pi]}, true});
    }

    auto short_share = [&](std::size_t c, std::size_t r0, std::size_t r1, double& total, double& shorts) {
        for (std::size_t r = r0; r <= std::min(r1, rows - 1); ++r) {
            total += field.at(c, r);
            shorts += field.short_at(c, r);
        }
    };

    // Cords: each track trimmed to its first..last prominent vertex.
    for (const auto& tr : tracks) {
        std::size_t a = tr.peaks.size();
        std::size_t b = 0;
        for (std::size_t i = 0; i < tr.peaks.size(); ++i) {
            if (!tr.peaks[i].prominent) continue;
            a = std::min(a, i);
            b = i;
        }
        if (a == tr.peaks.size()) continue;
        if (tr.cols[b] - tr.cols[a] + 1 < min_span) continue;
        CharacteristicFigure f;
        f.kind = FigureKind::cord;
        double excess = 0.0;
        double total = 0.0;
        double shorts = 0.0;
        for (std::size_t i = a; i <= b; ++i) {
            const std::size_t c = tr.cols[i];
            f.ridge.push_back({static_cast<double>(field.first_column() + c), field.to_ordinate(tr.peaks[i].pos)});
            excess += tr.peaks[i].height - median[c];
            if (field.has_short_layer()) {
                const auto r = static_cast<std::size_t>(std::clamp(tr.peaks[i].pos, 0.0, double(rows - 1)));
                short_share(c, r > 0 ? r - 1 : 0, r + 1, total, shorts);
            }
        }
        f.markedness = excess / static_cast<double>(tr.cols[b] - tr.cols[a] + 1);
        if (field.has_short_layer()) f.is_short = total > 0.0 && shorts > 0.5 * total;
        figures.push_back(std::move(f));
    }

    // Envelopes: q and 1-q mass quantiles per column, split where the track
    // bends faster than the curvature bound.
    struct Boundary {
        FigureSide side;
        std::vector<double> pos;  // per column, NaN where the column is empty
    };
    // A boundary column counts only where the bundle really ends there: the
    // zeta bins inside must hold envelope_contrast times the mass of the zeta
    // bins outside.
    auto band_mass = [&](std::size_t c, double a, double b) {
        a = std::clamp(a, 0.0, double(rows));
        b = std::clamp(b, 0.0, double(rows));
        double m = 0.0;
        for (auto r = static_cast<std::size_t>(a); r < rows && static_cast<double>(r) < b; ++r) {
            const double lo = std::max(a, static_cast<double>(r));
            const double hi = std::min(b, static_cast<double>(r + 1));
            if (hi > lo) m += field.at(c, r) * (hi - lo);
        }
        return m;
    };
    std::vector<Boundary> boundaries{{FigureSide::lower, std::vector<double>(cols, NAN)},
                                     {FigureSide::upper, std::vector<double>(cols, NAN)}};
    for (std::size_t c = 0; c < cols; ++c) {
        const double mass = field.column_mass(c);
        if (mass <= 0.0) continue;
        boundaries[0].pos[c] = detail::mass_quantile(field.column(c), params.envelope_quantile * mass);
        boundaries[1].pos[c] = detail::mass_quantile(field.column(c), (1.0 - params.envelope_quantile) * mass);
        const double zeta = params.boltrope_proximity;
        for (auto& bd : boundaries) {
            const double p = bd.pos[c];
            const bool up = bd.side == FigureSide::upper;
            const double inner = up ? band_mass(c, p - zeta, p) : band_mass(c, p, p + zeta);
            const double outer = up ? band_mass(c, p, p + zeta) : band_mass(c, p - zeta, p);
            if (inner < params.envelope_contrast * outer) bd.pos[c] = NAN;
        }
    }
    struct EnvelopeTrack {
        FigureSide side;
        std::size_t first, last;  // field columns, inclusive
        const std::vector<double>* pos;
    };
    std::vector<EnvelopeTrack> envelopes;
    const double band = params.boltrope_proximity;
    for (const auto& bd : boundaries) {
        auto smooth_at = [&](std::size_t c) {
            if (std::isnan(bd.pos[c])) return false;
            if (c == 0 || c + 1 >= cols || std::isnan(bd.pos[c - 1]) || std::isnan(bd.pos[c + 1])) return true;
            return std::abs(bd.pos[c + 1] - 2.0 * bd.pos[c] + bd.pos[c - 1]) <= params.envelope_curvature;
        };
        std::size_t c = 0;
        while (c < cols) {
            if (!smooth_at(c)) {
                ++c;
                continue;
            }
            std::size_t e = c;
            while (e + 1 < cols && smooth_at(e + 1)) ++e;
            if (e - c + 1 >= min_span) {
                CharacteristicFigure f;
                f.kind = FigureKind::envelope;
                f.side = bd.side;
                double dens = 0.0;
                double total = 0.0;
                double shorts = 0.0;
                for (std::size_t k = c; k <= e; ++k) {
                    const double p = bd.pos[k];
                    f.ridge.push_back({static_cast<double>(field.first_column() + k), field.to_ordinate(p)});
                    // mean density in the band just inside the boundary
                    const double lo = bd.side == FigureSide::upper ? p - band : p;
                    const double hi = bd.side == FigureSide::upper ? p : p + band;
                    const auto r0 = static_cast<std::size_t>(std::clamp(std::floor(lo), 0.0, double(rows - 1)));
                    const auto r1 = static_cast<std::size_t>(std::clamp(std::floor(hi), 0.0, double(rows - 1)));
                    double m = 0.0;
                    for (std::size_t r = r0; r <= r1; ++r) m += field.at(k, r);
                    dens += m / static_cast<double>(r1 - r0 + 1);
                    if (field.has_short_layer()) short_share(k, r0, r1, total, shorts);
                }
                f.markedness = dens / static_cast<double>(e - c + 1);
                if (field.has_short_layer()) f.is_short = total > 0.0 && shorts > 0.5 * total;
                if (f.markedness > 0.0) {
                    envelopes.push_back({bd.side, c, e, &bd.pos});
                    figures.push_back(std::move(f));
                }
            }
            c = e + 1;
        }
    }

    // Boltropes: cords whose mean distance to an envelope track is within zeta bins.
    for (auto& f : figures) {
        if (f.kind != FigureKind::cord) continue;
        double best = INFINITY;
        FigureSide side = FigureSide::interior;
        for (const auto& env : envelopes) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& p : f.ridge) {
                const std::size_t c = static_cast<std::size_t>(p.column) - field.first_column();
                if (c < env.first || c > env.last) continue;
                sum += std::abs(field.to_bin(p.ordinate) - (*env.pos)[c]);
                ++n;
            }
            if (n == 0) continue;
            const double mean = sum / static_cast<double>(n);
            if (mean < best) {
                best = mean;
                side = env.side;
            }
        }
        if (best <= params.boltrope_proximity) {
            f.kind = FigureKind::boltrope;
            f.side = side;
        }
    }

    std::stable_sort(figures.begin(), figures.end(), [](const auto& a, const auto& b) {
        if (a.markedness != b.markedness) return a.markedness > b.markedness;
        if (a.kind != b.kind) return a.kind < b.kind;
        if (a.ridge.front().column != b.ridge.front().column) return a.ridge.front().column < b.ridge.front().column;
        return a.ridge.front().ordinate < b.ridge.front().ordinate;
    });
    for (std::size_t i = 0; i < figures.size(); ++i) figures[i].id = i;
    return figures;
}

/// Projects a figure forward by fitting the trailing third of its ridge.
/// Returns points at columns last+1 .. last+horizon.
inline std::vector<RidgePoint> extrapolate_figure(const CharacteristicFigure& f, std::size_t horizon, int order = 1) {
    if (order != 1 && order != 2) throw ConfigError("extrapolation order must be 1 or 2");
    if (f.span() < 3 || f.ridge.size() < 3) throw SpanTooShort(f.span());
    std::vector<RidgePoint> out;
    if (horizon == 0) return out;
    const std::size_t m = f.ridge.size();
    const std::size_t take = std::min(m, std::max<std::size_t>((m + 2) / 3, static_cast<std::size_t>(order) + 1));
    const auto first = f.ridge.end() - static_cast<std::ptrdiff_t>(take);
    const double x0 = f.ridge.back().column;
    // Normal equations in x - x0 for degree <= 2; well conditioned at these sizes.
    const int terms = order + 1;
    long double g[3][4] = {};
    for (auto it = first; it != f.ridge.end(); ++it) {
        const long double x = it->column - x0;
        const long double pw[5] = {1.0L, x, x * x, x * x * x, x * x * x * x};
        for (int p = 0; p < terms; ++p) {
            for (int q = 0; q < terms; ++q) g[p][q] += pw[p + q];
            g[p][terms] += pw[p] * it->ordinate;
        }
    }
    for (int c = 0; c < terms; ++c) {
        int piv = c;
        for (int r = c + 1; r < terms; ++r)
            if (std::fabs(g[r][c]) > std::fabs(g[piv][c])) piv = r;
        for (int k = 0; k <= terms; ++k) std::swap(g[c][k], g[piv][k]);
        if (std::fabs(g[c][c]) < 1e-18L) throw DegenerateSystem("degenerate extrapolation fit");
        for (int r = 0; r < terms; ++r) {
            if (r == c) continue;
            const long double fct = g[r][c] / g[c][c];
            for (int k = c; k <= terms; ++k) g[r][k] -= fct * g[c][k];
        }
    }
    long double coef[3] = {};
    for (int p = 0; p < terms; ++p) coef[p] = g[p][terms] / g[p][p];
    for (std::size_t s = 1; s <= horizon; ++s) {
        const long double x = static_cast<long double>(s);
        long double y = coef[0] + coef[1] * x + (order == 2 ? coef[2] * x * x : 0.0L);
        out.push_back({x0 + static_cast<double>(s), static_cast<double>(y)});
    }
    return out;
}

inline nlohmann::json figure_to_json(const CharacteristicFigure& f) {
    auto ridge = nlohmann::json::array();
    for (const auto& p : f.ridge) ridge.push_back({p.column, p.ordinate});
    nlohmann::json j{{"id", f.id},
                     {"kind", to_string(f.kind)},
                     {"side", to_string(f.side)},
                     {"markedness", f.markedness},
                     {"span", f.span()},
                     {"first", f.first_column()},
                     {"last", f.last_column()},
                     {"ridge", std::move(ridge)}};
    j["short"] = f.is_short ? nlohmann::json(*f.is_short) : nlohmann::json(nullptr);
    return j;
}

}  // namespace tn
