#include <gtest/gtest.h>

#include "dasc/incentives.hpp"
#include "oracles.hpp"

using namespace dasc;

TEST(Aggregate, SumsPickerReputations) {
  std::vector<double> pi{0.2, 0.7, 0.5};
  std::vector<int> picks{0, 1};
  EXPECT_NEAR(aggregate_reputation(picks, pi), 0.9, 1e-12);
}

TEST(Aggregate, NoPicksIsZero) {
  std::vector<double> pi{0.2};
  EXPECT_DOUBLE_EQ(aggregate_reputation({}, pi), 0.0);
}

TEST(Aggregate, FullReputationCar) {
  std::vector<double> pi{1.0, 0.3};
  std::vector<int> picks{0};
  EXPECT_DOUBLE_EQ(aggregate_reputation(picks, pi), 1.0);
  std::vector<int> bad{4};
  EXPECT_THROW(aggregate_reputation(bad, pi), std::out_of_range);
}

TEST(Pid, FirstStepOnSmallShortfall) {
  PidState s;
  auto out = pid_step(s, PidParams{}, 0.9);
  EXPECT_NEAR(out.error, 0.1, 1e-12);
  EXPECT_NEAR(out.adjustment, 0.116, 1e-12);
  EXPECT_NEAR(out.reward, 1.116, 1e-12);
}

TEST(Pid, ZeroErrorLeavesRewardAtBase) {
  PidState s;
  for (int t = 0; t < 5; ++t) {
    auto out = pid_step(s, PidParams{}, 1.0);
    EXPECT_DOUBLE_EQ(out.adjustment, 0.0);
    EXPECT_DOUBLE_EQ(out.reward, 1.0);
  }
}

TEST(Pid, ConstantErrorRampsUntilWindup) {
  PidParams p;
  PidState s;
  double prev = 0.0;
  for (int t = 1; t <= 120; ++t) {
    auto out = pid_step(s, p, 0.9);
    EXPECT_NEAR(out.adjustment, oracle::pid_ramp(p.kp, p.ki, p.kd, 0.1, t, p.windup_bound()), 1e-9) << t;
    if (t > 2 && t <= 100) {
      EXPECT_NEAR(out.adjustment - prev, 0.067, 1e-9) << t;
    }
    if (t > 100) {
      EXPECT_NEAR(out.adjustment, prev, 1e-12);
    }
    prev = out.adjustment;
  }
  EXPECT_NEAR(s.integral, p.windup_bound(), 1e-9);
}

TEST(Pid, RewardNeverFallsBelowFloor) {
  PidParams p;
  PidState s;
  for (int t = 0; t < 50; ++t) {
    auto out = pid_step(s, p, 5.0);
    EXPECT_GE(out.reward, p.min_reward() - 1e-12);
  }
  EXPECT_DOUBLE_EQ(pid_step(s, p, 5.0).reward, 0.1);
}

TEST(Pid, ShortfallRaisesAndSurplusLowersReward) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double e = rng.uniform(0.0, 3.0);
    PidState s;
    auto out = pid_step(s, PidParams{}, e);
    if (e < 1.0) {
      EXPECT_GT(out.reward, 1.0);
    } else if (e > 1.0) {
      EXPECT_LT(out.reward, 1.0);
    }
  }
}

TEST(Pid, PureProportionalScalesWithError) {
  PidParams p;
  p.ki = p.kd = 0.0;
  p.floor_fraction = 0.0;
  for (double e : {0.0, 0.25, 0.5, 1.5, 2.0}) {
    PidState s;
    EXPECT_NEAR(pid_step(s, p, e).adjustment, p.kp * (1.0 - e), 1e-12);
  }
  PidState s;
  EXPECT_THROW(pid_step(s, p, 0.5, 0.0), std::invalid_argument);
}

TEST(Churn, SixOfTenDoesNotFire) {
  ChurnMonitor m(0.62);
  m.start_cycle(10);
  for (int i = 0; i < 6; ++i) EXPECT_FALSE(churn_trigger(m));
  EXPECT_EQ(m.firings(), 0);
}

TEST(Churn, SeventhOfTenFires) {
  ChurnMonitor m(0.62);
  m.start_cycle(10);
  for (int i = 0; i < 6; ++i) churn_trigger(m);
  EXPECT_TRUE(churn_trigger(m));
  EXPECT_EQ(m.firings(), 1);
  EXPECT_EQ(m.drops(), 0);
}

TEST(Churn, NoDropsNeverFires) {
  ChurnMonitor m(0.0);
  m.start_cycle(10);
  EXPECT_EQ(m.firings(), 0);
  m.start_cycle(0);
  EXPECT_FALSE(churn_trigger(m));
  EXPECT_THROW(ChurnMonitor(-0.1), std::invalid_argument);
}
