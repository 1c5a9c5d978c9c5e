#include <gtest/gtest.h>

#include <cmath>

#include "sfl/schedule.hpp"

using namespace sfl;

TEST(Schedule, StartsAtZero) {
  const FocusSchedule s = FocusSchedule::make(0.5, 500);
  EXPECT_EQ(s.focusing_rate(0), 0.0);
}

TEST(Schedule, ReachesNuAtBudget) {
  const FocusSchedule s = FocusSchedule::make(0.5, 500);
  EXPECT_NEAR(s.gamma, std::pow(0.5, 1.0 / 500.0), 1e-15);
  EXPECT_NEAR(s.focusing_rate(500), 0.5, 1e-12);
}

TEST(Schedule, HalfwayValue) {
  // 1 - 0.5^(1/2) at e = E_max/2
  const FocusSchedule s = FocusSchedule::make(0.5, 500);
  EXPECT_NEAR(s.focusing_rate(250), 1.0 - std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(s.focusing_rate(250), 0.29289, 1e-5);
}

TEST(Schedule, MonotoneAndCapped) {
  for (const auto& [nu, e_max] : std::vector<std::pair<double, int>>{
           {0.5, 500}, {0.7, 500}, {0.3, 200}, {0.99, 100}}) {
    const FocusSchedule s = FocusSchedule::make(nu, e_max);
    double prev = -1.0;
    for (int e = 0; e <= e_max + 50; ++e) {
      const double f = s.focusing_rate(e);
      EXPECT_GE(f, prev);
      EXPECT_LE(f, nu + 1e-15);
      prev = f;
    }
    EXPECT_NEAR(s.focusing_rate(e_max), nu, 1e-12);
  }
}

TEST(Schedule, DegenerateNuValues) {
  const FocusSchedule zero = FocusSchedule::make(0.0, 100);
  for (int e = 0; e <= 200; e += 10) EXPECT_EQ(zero.focusing_rate(e), 0.0);
  const FocusSchedule one = FocusSchedule::make(1.0, 100);
  EXPECT_EQ(one.focusing_rate(0), 0.0);
  EXPECT_EQ(one.focusing_rate(1), 1.0);
}

TEST(Schedule, BatchBudgetIsFloorOfBF) {
  const FocusSchedule s = FocusSchedule::make(0.5, 500);
  EXPECT_EQ(s.k_for_batch(0, 128), 0u);
  EXPECT_EQ(s.k_for_batch(500, 128), 64u);
  const double f250 = s.focusing_rate(250);
  EXPECT_EQ(s.k_for_batch(250, 128),
            static_cast<std::size_t>(std::floor(128.0 * f250)));
}

TEST(Schedule, RejectsBadParameters) {
  EXPECT_THROW(FocusSchedule::make(-0.1, 100), std::invalid_argument);
  EXPECT_THROW(FocusSchedule::make(1.1, 100), std::invalid_argument);
  EXPECT_THROW(FocusSchedule::make(0.5, 0), std::invalid_argument);
  const FocusSchedule s = FocusSchedule::make(0.5, 100);
  EXPECT_THROW(s.focusing_rate(-1), std::invalid_argument);
}
