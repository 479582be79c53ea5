#pragma once

// Moving least-squares polynomial fit that keeps only the fitted value at the
// newest point of each window.
//
// Within a window of n points the abscissa is u = (i - s) / s with
// s = (n - 1) / 2, so u spans [-1, 1] and the newest point sits at u = 1.
// The fitted value there is a fixed linear functional of the moments
// b_p = sum u^p y:
//
//   yhat = w . b,   G w = e,   G_pq = sum u^(p+q),   e = (1, ..., 1)
//
// Moments are kept incrementally as S_q = sum x^q y against a frozen anchor
// (x = u + delta, delta = steps since anchor / s). Sliding the window adds
// one term and removes one; the current b follows from S by a binomial
// shift. The anchor is reset (full recompute) every min(n/4, 4096) steps,
// which keeps |x| <= 1.5 and bounds accumulated rounding.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tn/error.hpp"
#include "tn/schedule.hpp"

namespace tn {

class RollingPolyFit {
public:
    static constexpr std::size_t kMaxTerms = kMaxOrder + 1;
    static constexpr std::size_t kMaxReanchorPeriod = 4096;

    RollingPolyFit(std::size_t window, int order) : n_(window), order_(order) {
        if (order < kMinOrder || order > kMaxOrder) throw DegenerateSystem("order must be in [1, 5]");
        if (window < min_window(order)) throw WindowTooSmall(window, order);
        half_ = 0.5 * static_cast<double>(n_ - 1);
        inv_half_ = 1.0 / half_;
        period_ = std::clamp<std::size_t>(n_ / 4, 1, kMaxReanchorPeriod);
        solve_weights();
    }

    [[nodiscard]] std::size_t window() const noexcept { return n_; }
    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] std::size_t reanchor_period() const noexcept { return period_; }

    /// Full recompute for the window ending at index t (t + 1 >= n).
    double reset(std::span<const double> y, std::size_t t) {
        anchor_end_ = t;
        steps_ = 0;
        sums_.fill(0.0);
        const std::size_t first = t + 1 - n_;
        for (std::size_t g = first; g <= t; ++g) accumulate(abscissa(g), y[g], 1.0);
        return evaluate();
    }

    /// Advances from the window ending at t - 1 to the one ending at t.
    double advance(std::span<const double> y, std::size_t t) {
        if (++steps_ >= period_) return reset(y, t);
        accumulate(abscissa(t - n_), y[t - n_], -1.0);
        accumulate(abscissa(t), y[t], 1.0);
        return evaluate();
    }

    /// Fitted value at the newest point of the current window.
    [[nodiscard]] double evaluate() const noexcept {
        const int terms = order_ + 1;
        const double delta = static_cast<double>(steps_) * inv_half_;
        // b_p = sum_q C(p,q) (-delta)^(p-q) S_q
        std::array<double, kMaxTerms> neg_pow{};
        neg_pow[0] = 1.0;
        for (int i = 1; i < terms; ++i) neg_pow[i] = neg_pow[i - 1] * -delta;
        double out = 0.0;
        for (int p = 0; p < terms; ++p) {
            double b = 0.0;
            for (int q = 0; q <= p; ++q) b += binom_[p][q] * neg_pow[p - q] * sums_[q];
            out += weights_[p] * b;
        }
        return out;
    }

    /// Evaluation weights over the window, oldest point first. Their dot
    /// product with the window values is the fitted last-point value.
    [[nodiscard]] std::vector<double> filter_taps() const {
        std::vector<double> taps(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double u = (static_cast<double>(i) - half_) * inv_half_;
            double up = 1.0;
            double h = 0.0;
            for (int p = 0; p <= order_; ++p) {
                h += weights_[p] * up;
                up *= u;
            }
            taps[i] = h;
        }
        return taps;
    }

private:
    [[nodiscard]] double abscissa(std::size_t g) const noexcept {
        // anchor window is [anchor_end_ - n + 1, anchor_end_], centred at anchor_end_ - half_
        const double offset = static_cast<double>(static_cast<std::int64_t>(g) - static_cast<std::int64_t>(anchor_end_));
        return (offset + half_) * inv_half_;
    }

    void accumulate(double x, double y, double sign) noexcept {
        double term = sign * y;
        for (int q = 0; q <= order_; ++q) {
            sums_[q] += term;
            term *= x;
        }
    }

    void solve_weights() {
        const int terms = order_ + 1;
        // Power sums of the symmetric grid; odd ones vanish exactly.
        std::array<long double, 2 * kMaxTerms> mom{};
        for (std::size_t i = 0; i < n_; ++i) {
            const long double u = (static_cast<long double>(i) - half_) / static_cast<long double>(half_);
            long double up = 1.0L;
            for (int p = 0; p < 2 * terms - 1; ++p) {
                if (p % 2 == 0) mom[p] += up;
                up *= u;
            }
        }
        std::array<std::array<long double, kMaxTerms + 1>, kMaxTerms> a{};
        for (int p = 0; p < terms; ++p) {
            for (int q = 0; q < terms; ++q) a[p][q] = mom[p + q];
            a[p][terms] = 1.0L;
        }
        // Gaussian elimination with partial pivoting on the small Gram system.
        for (int c = 0; c < terms; ++c) {
            int piv = c;
            for (int r = c + 1; r < terms; ++r)
                if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
            if (std::fabs(a[piv][c]) < 1e-300L) throw DegenerateSystem("singular Gram matrix");
            std::swap(a[piv], a[c]);
            for (int r = c + 1; r < terms; ++r) {
                const long double f = a[r][c] / a[c][c];
                for (int k = c; k <= terms; ++k) a[r][k] -= f * a[c][k];
            }
        }
        std::array<long double, kMaxTerms> w{};
        for (int r = terms - 1; r >= 0; --r) {
            long double acc = a[r][terms];
            for (int k = r + 1; k < terms; ++k) acc -= a[r][k] * w[k];
            w[r] = acc / a[r][r];
            if (!std::isfinite(static_cast<double>(w[r]))) throw DegenerateSystem("non-finite fit weights");
        }
        for (int p = 0; p < terms; ++p) weights_[p] = static_cast<double>(w[p]);
        for (int p = 0; p < terms; ++p) {
            binom_[p][0] = 1.0;
            for (int q = 1; q <= p; ++q) binom_[p][q] = binom_[p - 1][q - 1] + (q < p ? binom_[p - 1][q] : 0.0);
        }
    }

    std::size_t n_;
    int order_;
    double half_ = 0.0;
    double inv_half_ = 0.0;
    std::size_t period_ = 1;
    std::array<double, kMaxTerms> weights_{};
    std::array<std::array<double, kMaxTerms>, kMaxTerms> binom_{};
    std::array<double, kMaxTerms> sums_{};
    std::size_t anchor_end_ = 0;
    std::size_t steps_ = 0;
};

/// Last-point values of the moving order-D regression over windows of n
/// points. Element j corresponds to series index j + n - 1.
[[nodiscard]] inline std::vector<double> rolling_regression_last(std::span<const double> values, std::size_t window,
                                                                 int order) {
    RollingPolyFit fit(window, order);
    if (values.size() < window) throw SeriesTooShort(values.size(), window);
    std::vector<double> out;
    out.reserve(values.size() - window + 1);
    out.push_back(fit.reset(values, window - 1));
    for (std::size_t t = window; t < values.size(); ++t) out.push_back(fit.advance(values, t));
    return out;
}

}  // namespace tn
