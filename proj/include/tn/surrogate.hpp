#pragma once

// Null-model series used to measure how much figure/extremum agreement the
// construction produces on its own.

#include <complex>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <fftw3.h>

#include "tn/error.hpp"
#include "tn/ingest.hpp"
#include "tn/random.hpp"

namespace tn {

enum class SurrogateMethod : std::uint8_t { shuffled_returns, phase_randomized, gbm_fit };

inline constexpr std::size_t kMinSurrogateLength = 16;

inline std::string_view to_string(SurrogateMethod m) {
    switch (m) {
        case SurrogateMethod::shuffled_returns: return "shuffled-returns";
        case SurrogateMethod::phase_randomized: return "phase-randomized";
        case SurrogateMethod::gbm_fit: return "gbm-fit";
    }
    return "?";
}

inline SurrogateMethod parse_surrogate_method(std::string_view s) {
    if (s == "shuffled-returns") return SurrogateMethod::shuffled_returns;
    if (s == "phase-randomized") return SurrogateMethod::phase_randomized;
    if (s == "gbm-fit") return SurrogateMethod::gbm_fit;
    throw ConfigError("unknown surrogate method '" + std::string(s) + "'");
}

namespace detail {

// FFTW planning is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Real-to-complex transform, n/2+1 bins, unnormalized.
inline std::vector<std::complex<double>> rfft(std::vector<double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<std::complex<double>> out(x.size() / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, x.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
    return out;
}

/// Inverse of rfft including the 1/n normalization.
inline std::vector<double> irfft(std::vector<std::complex<double>> spec, std::size_t n) {
    std::vector<double> out(n);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(spec.data()), out.data(),
                                    FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    for (auto& v : out) v /= static_cast<double>(n);
    return out;
}

inline std::vector<double> log_returns(const BarSeries& s) {
    std::vector<double> r;
    r.reserve(s.size() - 1);
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!(s[i - 1].mid > 0.0) || !(s[i].mid > 0.0)) throw DataError("log-returns need positive M values");
        r.push_back(std::log(s[i].mid / s[i - 1].mid));
    }
    return r;
}

}  // namespace detail

/// Builds a null-model series of the same length. Output is a pure function
/// of (series, method, seed). Each surrogate bar takes d and volume from a
/// source bar of the original.
inline BarSeries make_surrogate(const BarSeries& series, SurrogateMethod method, std::uint64_t seed) {
    const std::size_t n = series.size();
    if (n < kMinSurrogateLength) throw SeriesTooShort(n, kMinSurrogateLength);
    Rng rng(seed);
    BarSeries out = series;

    // source[j]: which original bar lends its half-range and volume to bar j
    std::vector<std::size_t> source(n);
    std::iota(source.begin(), source.end(), std::size_t{0});

    switch (method) {
        case SurrogateMethod::shuffled_returns: {
            const auto r = detail::log_returns(series);
            std::vector<std::size_t> perm(n - 1);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            rng.shuffle(std::span(perm));
            double level = std::log(series[0].mid);
            for (std::size_t j = 1; j < n; ++j) {
                level += r[perm[j - 1]];
                out.bars[j].mid = std::exp(level);
                source[j] = perm[j - 1] + 1;  // return r[i] belongs to bar i+1
            }
            break;
        }
        case SurrogateMethod::phase_randomized: {
            auto spec = detail::rfft(series.mids());
            const std::size_t last = (n % 2 == 0) ? spec.size() - 1 : spec.size();  // keep Nyquist real
            for (std::size_t k = 1; k < last; ++k) {
                const double phi = 2.0 * std::numbers::pi * rng.uniform();
                spec[k] *= std::polar(1.0, phi);
            }
            const auto m = detail::irfft(std::move(spec), n);
            for (std::size_t j = 0; j < n; ++j) out.bars[j].mid = m[j];
            rng.shuffle(std::span(source));
            break;
        }
        case SurrogateMethod::gbm_fit: {
            const auto r = detail::log_returns(series);
            const double mu = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
            double var = 0.0;
            for (double x : r) var += (x - mu) * (x - mu);
            const double sigma = std::sqrt(var / static_cast<double>(r.size() > 1 ? r.size() - 1 : 1));
            double level = std::log(series[0].mid);
            for (std::size_t j = 1; j < n; ++j) {
                level += mu + sigma * rng.normal();
                out.bars[j].mid = std::exp(level);
            }
            rng.shuffle(std::span(source));
            break;
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        out.bars[j].half = series[source[j]].half;
        out.bars[j].volume = series[source[j]].volume;
    }
    return out;
}

}  // namespace tn
