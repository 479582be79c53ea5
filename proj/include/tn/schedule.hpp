#pragma once

// Window-length schedule for the curve bundle.
//
// Curve k (1-based) of an N-curve bundle regresses over
//
//   n_k = round(n_1 + (k-1) a + k(k-1) / (N(N-1)) * (n_N - n_1 - (N-1) a))
//
// points, which spaces the windows so that the bundle has a roughly uniform
// density. The formula is valid only when n_N - n_1 > a (N-1).

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tn/error.hpp"

namespace tn {

inline constexpr int kMinOrder = 1;
inline constexpr int kMaxOrder = 5;

struct ScheduleParams {
    int order = 3;              // D
    std::size_t count = 600;    // N
    std::size_t first = 7;      // n_1
    std::size_t last = 4500;    // n_N
    double spacing = 2.0;       // a

    friend bool operator==(const ScheduleParams&, const ScheduleParams&) = default;
};

struct CurveSchedule {
    ScheduleParams params;
    std::vector<std::size_t> windows;  // n_1 .. n_N

    [[nodiscard]] std::size_t size() const noexcept { return windows.size(); }
    [[nodiscard]] int order() const noexcept { return params.order; }
    [[nodiscard]] std::size_t longest() const noexcept { return windows.empty() ? 0 : windows.back(); }
    [[nodiscard]] std::size_t shortest() const noexcept { return windows.empty() ? 0 : windows.front(); }
    [[nodiscard]] std::string label() const { return "TN" + std::to_string(params.order); }
};

/// Smallest window that still over-determines an order-D fit.
[[nodiscard]] constexpr std::size_t min_window(int order) noexcept { return static_cast<std::size_t>(order) + 2; }

[[nodiscard]] inline CurveSchedule compute_schedule(const ScheduleParams& p) {
    if (p.order < kMinOrder || p.order > kMaxOrder)
        throw InvalidSchedule("order must be in [1, 5], got " + std::to_string(p.order));
    if (p.count < 2) throw InvalidSchedule("need at least two curves");
    if (!(p.spacing >= 0.0) || !std::isfinite(p.spacing)) throw InvalidSchedule("spacing a must be finite and >= 0");
    const long double n1 = static_cast<long double>(p.first);
    const long double nN = static_cast<long double>(p.last);
    const long double N = static_cast<long double>(p.count);
    const long double a = p.spacing;
    if (!(nN - n1 > a * (N - 1)))
        throw InvalidSchedule("validity clause n_N - n_1 > a(N-1) violated");
    if (p.first < min_window(p.order))
        throw InvalidSchedule("n_1 = " + std::to_string(p.first) + " is below order + 2");

    CurveSchedule s;
    s.params = p;
    s.windows.reserve(p.count);
    const long double curvature = nN - n1 - (N - 1) * a;
    for (std::size_t k = 1; k <= p.count; ++k) {
        const long double kk = static_cast<long double>(k);
        const long double exact = n1 + (kk - 1) * a + kk * (kk - 1) / (N * (N - 1)) * curvature;
        s.windows.push_back(static_cast<std::size_t>(std::llroundl(exact)));  // half away from zero
    }
    s.windows.front() = p.first;
    s.windows.back() = p.last;
    return s;
}

/// Number of series values consumed by one complete slice of the bundle.
[[nodiscard]] inline std::uint64_t value_count(const CurveSchedule& s) {
    return std::accumulate(s.windows.begin(), s.windows.end(), std::uint64_t{0},
                           [](std::uint64_t acc, std::size_t n) { return acc + n; });
}

/// The per-slice total quoted for the largest published subtype; the
/// published schedule parameters for it are incomplete, so candidates are
/// compared against this figure rather than asserted equal to it.
inline constexpr std::uint64_t kReferenceTn5ValueCount = 1'919'328;

struct ValueCountComparison {
    std::uint64_t computed = 0;
    std::uint64_t reference = 0;
    std::int64_t difference = 0;  // computed - reference
    [[nodiscard]] bool matches() const noexcept { return difference == 0; }
};

[[nodiscard]] inline ValueCountComparison compare_value_count(const CurveSchedule& s,
                                                              std::uint64_t reference = kReferenceTn5ValueCount) {
    const auto c = value_count(s);
    return {c, reference, static_cast<std::int64_t>(c) - static_cast<std::int64_t>(reference)};
}

/// Built-in subtype presets: order D uses windows (D+4 .. 1500 D) with 600
/// curves and a = 2. Order 3 is the published example; the others are
/// overridable defaults.
[[nodiscard]] inline ScheduleParams default_preset(int order) {
    if (order < kMinOrder || order > kMaxOrder) throw InvalidSchedule("no preset for order " + std::to_string(order));
    return {order, 600, static_cast<std::size_t>(order) + 4, 1500 * static_cast<std::size_t>(order), 2.0};
}

}  // namespace tn
