#pragma once

// Price extrema and their proximity to characteristic figures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tn/error.hpp"
#include "tn/figures.hpp"
#include "tn/ingest.hpp"

namespace tn {

enum class ExtremumKind : std::uint8_t { max, min };

inline std::string_view to_string(ExtremumKind k) { return k == ExtremumKind::max ? "max" : "min"; }

/// Maxima sit on H, minima on L.
struct Extremum {
    std::size_t index = 0;
    ExtremumKind kind = ExtremumKind::max;
    double ordinate = 0.0;
    double prominence = 0.0;  // price units
};

struct PriceRange {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] double span() const noexcept { return hi - lo; }
};

/// Vertical extent of a chart: every bar's [L, H] and every figure vertex.
inline PriceRange bar_range(std::span<const Bar> bars) {
    PriceRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& b : bars) {
        r.lo = std::min(r.lo, b.low());
        r.hi = std::max(r.hi, b.high());
    }
    return r;
}

struct ExtremaParams {
    double prominence = 0.005;    // fraction of the view range
    std::size_t min_separation = 3;  // bars
};

/// Alternating maxima (on H) and minima (on L) at interior bars. Each swing
/// between neighbours is at least `prominence x range`, neighbours are at
/// least `min_separation` bars apart, and the outermost pivots also swing that
/// far against some bar before/after them. Among such sequences the longest
/// is returned, ties going to the largest total swing, so lowering the
/// threshold can only add extrema. Bar indices are positions in `bars` plus
/// `index_offset`.
inline std::vector<Extremum> detect_extrema(std::span<const Bar> bars, const ExtremaParams& params, double range,
                                            std::size_t index_offset = 0) {
    if (bars.size() < 3) throw SeriesTooShort(bars.size(), 3);
    std::vector<Extremum> out;
    if (!(range > 0.0)) return out;
    const double th = params.prominence * range;
    const std::size_t n = bars.size();
    const std::size_t sep = std::max<std::size_t>(1, params.min_separation);
    auto H = [&](std::size_t i) { return bars[i].high(); };
    auto L = [&](std::size_t i) { return bars[i].low(); };

    // Lowest L / highest H strictly before and strictly after each bar.
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> lo_before(n, inf), hi_before(n, -inf), lo_after(n, inf), hi_after(n, -inf);
    for (std::size_t i = 1; i < n; ++i) {
        lo_before[i] = std::min(lo_before[i - 1], L(i - 1));
        hi_before[i] = std::max(hi_before[i - 1], H(i - 1));
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        lo_after[i] = std::min(lo_after[i + 1], L(i + 1));
        hi_after[i] = std::max(hi_after[i + 1], H(i + 1));
    }

    // best[k][i]: longest valid prefix sequence ending in a pivot of kind k at
    // bar i (k = 0 max, 1 min), scored (count, total swing).
    struct Cell {
        std::size_t count = 0;
        double swing = 0.0;
        std::size_t prev = 0;
        bool valid = false;
    };
    auto better = [](std::size_t c, double s, const Cell& cur) {
        return !cur.valid || c > cur.count || (c == cur.count && s > cur.swing);
    };
    std::vector<Cell> best[2] = {std::vector<Cell>(n), std::vector<Cell>(n)};
    const std::size_t none = n;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        for (int k = 0; k < 2; ++k) {
            const double v = k == 0 ? H(i) : L(i);
            Cell& c = best[k][i];
            // start a sequence here if something before sits far enough on the other side
            if (k == 0 ? v - lo_before[i] >= th : hi_before[i] - v >= th) c = {1, 0.0, none, true};
            for (std::size_t j = 1; j + sep <= i; ++j) {
                const Cell& p = best[1 - k][j];
                if (!p.valid) continue;
                const double sw = k == 0 ? v - L(j) : H(j) - v;
                if (sw < th) continue;
                if (better(p.count + 1, p.swing + sw, c)) c = {p.count + 1, p.swing + sw, j, true};
            }
        }
    }
    // Pick the best sequence whose last pivot also swings against a later bar.
    std::size_t end_i = none;
    int end_k = 0;
    Cell top;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        for (int k = 0; k < 2; ++k) {
            const Cell& c = best[k][i];
            if (!c.valid) continue;
            const bool closes = k == 0 ? H(i) - lo_after[i] >= th : hi_after[i] - L(i) >= th;
            if (closes && better(c.count, c.swing, top)) {
                top = c;
                end_i = i;
                end_k = k;
            }
        }
    }
    if (end_i == none) return out;
    std::vector<std::pair<std::size_t, int>> seq;
    for (std::size_t i = end_i;; ) {
        seq.emplace_back(i, end_k);
        const std::size_t p = best[end_k][i].prev;
        if (p == none) break;
        i = p;
        end_k = 1 - end_k;
    }
    std::reverse(seq.begin(), seq.end());

    auto value = [&](const std::pair<std::size_t, int>& e) { return e.second == 0 ? H(e.first) : L(e.first); };
    for (std::size_t j = 0; j < seq.size(); ++j) {
        const std::size_t i = seq[j].first;
        const bool is_max = seq[j].second == 0;
        const double v = value(seq[j]);
        // outer sides measure against the furthest bar on that side
        const double left = j > 0 ? std::abs(v - value(seq[j - 1])) : (is_max ? v - lo_before[i] : hi_before[i] - v);
        const double right =
            j + 1 < seq.size() ? std::abs(v - value(seq[j + 1])) : (is_max ? v - lo_after[i] : hi_after[i] - v);
        out.push_back({i + index_offset, is_max ? ExtremumKind::max : ExtremumKind::min, v, std::min(left, right)});
    }
    return out;
}

inline std::vector<Extremum> detect_extrema(std::span<const Bar> bars, const ExtremaParams& params = {}) {
    if (bars.size() < 3) throw SeriesTooShort(bars.size(), 3);
    return detect_extrema(bars, params, bar_range(bars).span());
}

struct Interaction {
    Extremum extremum;
    std::optional<std::size_t> figure;  // id of the nearest eligible figure
    double distance = std::numeric_limits<double>::infinity();  // fraction of view range
    bool interacting = false;
};

/// Distance from each extremum to the nearest figure ridge at its column.
/// A maximum prefers an upper-side figure (a minimum a lower-side one) when
/// one lies within tau; otherwise the nearest figure of any side is used.
inline std::vector<Interaction> score_interactions(std::span<const Extremum> extrema,
                                                   std::span<const CharacteristicFigure> figures, double range,
                                                   double tau, double vertical_shift = 0.0) {
    std::vector<Interaction> out;
    out.reserve(extrema.size());
    for (const auto& e : extrema) {
        Interaction it{e, std::nullopt};
        const double y = e.ordinate + vertical_shift;
        const FigureSide preferred = e.kind == ExtremumKind::max ? FigureSide::upper : FigureSide::lower;
        double best_pref = std::numeric_limits<double>::infinity();
        std::optional<std::size_t> pref_id;
        for (const auto& f : figures) {
            const auto o = f.ordinate_at(static_cast<double>(e.index));
            if (!o) continue;
            const double d = std::abs(y - *o) / range;
            if (d < it.distance) {
                it.distance = d;
                it.figure = f.id;
            }
            if (f.side == preferred && d < best_pref) {
                best_pref = d;
                pref_id = f.id;
            }
        }
        if (pref_id && best_pref <= tau) {
            it.distance = best_pref;
            it.figure = pref_id;
        }
        it.interacting = it.distance <= tau;
        out.push_back(it);
    }
    return out;
}

enum class Verdict : std::uint8_t { qualifies, fails, not_assessable };

inline std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::qualifies: return "qualifies";
        case Verdict::fails: return "fails";
        case Verdict::not_assessable: return "not-assessable";
    }
    return "?";
}

struct QualificationParams {
    double fraction_threshold = 0.5;
    std::size_t min_extrema = 8;
};

struct QualificationResult {
    std::size_t extremum_count = 0;
    std::size_t interacting_count = 0;
    double fraction = 0.0;
    bool qualifies = false;
    Verdict verdict = Verdict::not_assessable;
};

inline QualificationResult qualify_chart(std::span<const Interaction> interactions,
                                         const QualificationParams& params = {}) {
    QualificationResult q;
    q.extremum_count = interactions.size();
    q.interacting_count = static_cast<std::size_t>(
        std::count_if(interactions.begin(), interactions.end(), [](const Interaction& i) { return i.interacting; }));
    q.fraction = q.extremum_count ? static_cast<double>(q.interacting_count) / static_cast<double>(q.extremum_count) : 0.0;
    q.qualifies = q.extremum_count >= params.min_extrema && q.fraction >= params.fraction_threshold;
    if (q.extremum_count < params.min_extrema)
        q.verdict = Verdict::not_assessable;
    else
        q.verdict = q.qualifies ? Verdict::qualifies : Verdict::fails;
    return q;
}

inline nlohmann::json extremum_to_json(const Extremum& e) {
    return {{"index", e.index}, {"kind", to_string(e.kind)}, {"ordinate", e.ordinate}, {"prominence", e.prominence}};
}

inline nlohmann::json interaction_to_json(const Interaction& i) {
    nlohmann::json j{{"extremum", extremum_to_json(i.extremum)}, {"interacting", i.interacting}};
    j["figure"] = i.figure ? nlohmann::json(*i.figure) : nlohmann::json(nullptr);
    j["distance"] = std::isfinite(i.distance) ? nlohmann::json(i.distance) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json qualification_to_json(const QualificationResult& q) {
    return {{"extremum_count", q.extremum_count},
            {"interacting_count", q.interacting_count},
            {"fraction", q.fraction},
            {"qualifies", q.qualifies},
            {"verdict", to_string(q.verdict)}};
}

}  // namespace tn
