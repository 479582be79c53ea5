#include <gtest/gtest.h>

#include <iostream>
#include <numeric>
#include <vector>

#include "tn/random.hpp"
#include "tn/schedule.hpp"

namespace {

TEST(Schedule, PublishedOrderThreeBundle) {
    const auto s = tn::compute_schedule({3, 600, 7, 4500, 2.0});
    ASSERT_EQ(s.size(), 600u);
    const std::vector<std::size_t> head{7, 9, 11, 13, 15, 17, 19, 22, 24, 26};
    const std::vector<std::size_t> tail{4448, 4461, 4474, 4487, 4500};
    EXPECT_EQ(std::vector<std::size_t>(s.windows.begin(), s.windows.begin() + 10), head);
    EXPECT_EQ(std::vector<std::size_t>(s.windows.end() - 5, s.windows.end()), tail);
}

TEST(Schedule, TwoCurvesAreTheEndpoints) {
    const auto s = tn::compute_schedule({1, 2, 5, 100, 1.0});
    EXPECT_EQ(s.windows, (std::vector<std::size_t>{5, 100}));
    EXPECT_EQ(tn::value_count(s), 105u);
}

TEST(Schedule, ValidityClauseViolated) {
    EXPECT_THROW(tn::compute_schedule({1, 3, 10, 20, 100.0}), tn::InvalidSchedule);
    EXPECT_THROW(tn::compute_schedule({1, 1, 10, 20, 1.0}), tn::InvalidSchedule);
    EXPECT_THROW(tn::compute_schedule({6, 10, 10, 200, 1.0}), tn::InvalidSchedule);
    EXPECT_THROW(tn::compute_schedule({3, 10, 4, 200, 1.0}), tn::InvalidSchedule);  // n_1 < D + 2
    EXPECT_THROW(tn::compute_schedule({3, 10, 7, 200, -1.0}), tn::InvalidSchedule);
}

TEST(Schedule, ValueCountMatchesDirectSum) {
    const auto s = tn::compute_schedule({3, 600, 7, 4500, 2.0});
    std::uint64_t direct = 0;
    for (std::size_t k = 0; k < s.size(); ++k) direct += s.windows[k];
    EXPECT_EQ(tn::value_count(s), direct);
}

TEST(Schedule, LargestPresetIsComparedNotAsserted) {
    // The published per-slice total for the order-5 bundle cannot be
    // reproduced from the stated endpoints alone; the comparison reports the gap.
    const auto s = tn::compute_schedule(tn::default_preset(5));
    const auto cmp = tn::compare_value_count(s);
    EXPECT_EQ(cmp.reference, 1'919'328u);
    EXPECT_EQ(cmp.computed, tn::value_count(s));
    EXPECT_EQ(cmp.difference, static_cast<std::int64_t>(cmp.computed) - 1'919'328);
    std::cout << "order-5 preset value count " << cmp.computed << " vs published " << cmp.reference
              << " (difference " << cmp.difference << ")\n";
}

TEST(Schedule, MonotoneAndExactEndpointsForValidParams) {
    tn::Rng rng(17);
    for (int trial = 0; trial < 2000; ++trial) {
        tn::ScheduleParams p;
        p.order = 1 + static_cast<int>(rng.below(5));
        p.count = 2 + rng.below(800);
        p.first = tn::min_window(p.order) + rng.below(50);
        p.last = p.first + 1 + rng.below(8000);
        p.spacing = rng.uniform() * 4.0;
        const double room = static_cast<double>(p.last - p.first);
        if (!(room > p.spacing * static_cast<double>(p.count - 1))) continue;
        const auto s = tn::compute_schedule(p);
        ASSERT_EQ(s.windows.front(), p.first);
        ASSERT_EQ(s.windows.back(), p.last);
        for (std::size_t k = 1; k < s.size(); ++k) ASSERT_LE(s.windows[k - 1], s.windows[k]) << "trial " << trial;
        ASSERT_GE(s.windows.front(), tn::min_window(p.order));
    }
}

TEST(Schedule, Presets) {
    for (int d = 1; d <= 5; ++d) {
        const auto p = tn::default_preset(d);
        EXPECT_EQ(p.count, 600u);
        EXPECT_EQ(p.first, static_cast<std::size_t>(d) + 4);
        EXPECT_EQ(p.last, 1500u * d);
        EXPECT_NO_THROW(tn::compute_schedule(p));
    }
    EXPECT_EQ(tn::default_preset(3), (tn::ScheduleParams{3, 600, 7, 4500, 2.0}));
}

}  // namespace
