// Writes the seeded synthetic tick fixtures used by the test suite.
//
// Prices follow a log random walk whose volatility clusters (GARCH(1,1)
// style) with a slow mean-reverting drift, quoted on a 0.01 grid. Tick times
// are exponential inter-arrivals in milliseconds.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tn/random.hpp"

namespace {

struct Walk {
    double price;
    double sigma;      // per-tick log volatility, long-run level
    double mean_gap;   // ms between ticks
};

void write_instrument(const std::filesystem::path& path, std::uint64_t seed, std::int64_t t_end, std::int64_t span_ms,
                      Walk w) {
    tn::Rng rng(seed);
    std::ofstream out(path);
    out << "timestamp,value,volume\n";
    const double omega = 0.02 * w.sigma * w.sigma;
    const double alpha = 0.08, beta = 0.90;
    double var = w.sigma * w.sigma;
    double shock = 0.0;
    double log_p = std::log(w.price);
    const double anchor = log_p;
    std::int64_t t = t_end - span_ms;
    std::size_t rows = 0;
    while (true) {
        double u;
        do u = rng.uniform(); while (u <= 0.0);
        t += 1 + static_cast<std::int64_t>(-std::log(u) * w.mean_gap);
        if (t >= t_end) break;
        var = omega + alpha * shock * shock + beta * var;
        shock = std::sqrt(var) * rng.normal();
        log_p += shock - 1e-4 * (log_p - anchor);
        const double quoted = std::round(std::exp(log_p) * 100.0) / 100.0;
        const auto volume = 1 + static_cast<long>(-std::log(std::max(rng.uniform(), 1e-12)) * 25.0);
        out << t << ',' << std::fixed;
        out.precision(2);
        out << quoted << ',' << volume << '\n';
        ++rows;
    }
    std::cout << path.string() << ": " << rows << " ticks\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate synthetic tick fixtures"};
    std::string dir = "tests/fixtures";
    std::uint64_t seed = 20240102;
    app.add_option("-o,--out", dir, "output directory");
    app.add_option("-s,--seed", seed, "base seed");
    CLI11_PARSE(app, argc, argv);

    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "universe");
    // 2024-04-22 00:00:00 UTC; every fixture ends here.
    constexpr std::int64_t t_end = 1713744000000;
    constexpr std::int64_t minute = 60'000;

    // 95 days at ~80 s per tick: enough 360-minute bars for the largest
    // compact window plus a view, and ~10^5 rows.
    write_instrument(fs::path(dir) / "ALPHA.csv", seed, t_end, 95 * 1440 * minute, {100.0, 9e-4, 80'000.0});
    for (int i = 1; i <= 10; ++i) {
        const std::string name = "U" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        const double price = 20.0 + 15.0 * i;
        write_instrument(fs::path(dir) / "universe" / (name + ".csv"), seed + 1000 + i, t_end, 4 * 1440 * minute,
                         {price, 1.2e-3, 60'000.0});
    }
    return 0;
}
