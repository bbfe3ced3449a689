#include <gtest/gtest.h>

#include "dasc/allocation.hpp"
#include "oracles.hpp"

using namespace dasc;

namespace {

UtilityParams literal() {
  UtilityParams p;
  p.congestion = CongestionForm::literal;
  return p;
}

AllocationProblem uniform_problem(int cars, int tasks, double base) {
  AllocationProblem pr;
  pr.reputation.assign(static_cast<std::size_t>(cars), 0.5);
  pr.base.assign(static_cast<std::size_t>(cars), std::vector<double>(static_cast<std::size_t>(tasks), base));
  for (int m = 0; m < cars; ++m) pr.movers.push_back(m);
  return pr;
}

/// Tasks that tie for the best utility of car m in `profile`.
std::set<int> best_set(const AllocationProblem& pr, std::vector<int> profile, int m) {
  const int tasks = static_cast<int>(pr.base.front().size());
  std::vector<double> u(static_cast<std::size_t>(tasks));
  double top = 0.0;
  for (int n = 0; n < tasks; ++n) {
    profile[static_cast<std::size_t>(m)] = n;
    u[static_cast<std::size_t>(n)] = oracle::profile_utility(pr, profile, m);
    top = std::max(top, u[static_cast<std::size_t>(n)]);
  }
  std::set<int> out;
  for (int n = 0; n < tasks; ++n)
    if (top > 0.0 && std::abs(u[static_cast<std::size_t>(n)] - top) <= 1e-9 * top) out.insert(n);
  return out;
}

}  // namespace

TEST(Reputation, SuccessesMinusFailures) {
  EXPECT_NEAR(update_reputation(0.5, 0.1, 2, 1), 0.6, 1e-12);
}

TEST(Reputation, ClampedAtZero) { EXPECT_DOUBLE_EQ(update_reputation(0.05, 0.1, 0, 1), 0.0); }

TEST(Reputation, NoOutcomesNoChange) { EXPECT_DOUBLE_EQ(update_reputation(0.37, 0.1, 0, 0), 0.37); }

TEST(Reputation, NegativeCountsRejected) { EXPECT_THROW(update_reputation(0.5, 0.1, -1, 0), std::invalid_argument); }

TEST(Congestion, EmptyPickListGivesDefault) {
  std::vector<double> pi{0.5};
  EXPECT_DOUBLE_EQ(congestion_rate(0, {}, pi, literal()), 1.0);
  EXPECT_DOUBLE_EQ(congestion_rate(0, {}, pi, UtilityParams{}), 1.0);
}

TEST(Congestion, LiteralHigherReputationPicker) {
  std::vector<double> pi{0.8, 0.5};
  std::vector<int> picks{1};
  EXPECT_NEAR(congestion_rate(0, picks, pi, literal()), 0.09, 1e-12);
}

TEST(Congestion, LiteralNegativeSumIsFloored) {
  std::vector<double> pi{0.5, 0.8};
  std::vector<int> picks{1};
  EXPECT_DOUBLE_EQ(congestion_rate(0, picks, pi, literal()), 0.01);
}

TEST(Congestion, ContentionFormAddsOnePerCoPicker) {
  std::vector<double> pi{0.8, 0.5, 0.8};
  std::vector<int> one{1}, two{1, 2};
  EXPECT_NEAR(congestion_rate(0, one, pi, UtilityParams{}), 1.0 + (1.0 - 0.09), 1e-12);
  EXPECT_NEAR(congestion_rate(0, two, pi, UtilityParams{}), 1.0 + 0.91 + 1.0, 1e-12);
  std::vector<int> up{0};
  EXPECT_NEAR(congestion_rate(1, up, pi, UtilityParams{}), 1.0 + 1.09, 1e-12);
}

TEST(Congestion, SelfInPickListIsIgnored) {
  std::vector<double> pi{0.8, 0.5};
  std::vector<int> picks{0, 1};
  EXPECT_NEAR(congestion_rate(0, picks, pi, literal()), 0.09, 1e-12);
}

TEST(Congestion, MatchesOracleAndNeverBelowEpsilon) {
  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> pi(6);
    for (auto& p : pi) p = rng.uniform();
    std::vector<int> picks;
    std::vector<double> others;
    for (int q = 1; q < 6; ++q)
      if (rng.bernoulli(0.5)) {
        picks.push_back(q);
        others.push_back(pi[static_cast<std::size_t>(q)]);
      }
    for (auto form : {CongestionForm::contention, CongestionForm::literal}) {
      for (int k : {1, 2, 3}) {
        UtilityParams p;
        p.congestion = form;
        p.k = k;
        const double g = congestion_rate(0, picks, pi, p);
        EXPECT_NEAR(g, oracle::congestion(pi[0], others, p), 1e-12);
        EXPECT_GE(g, p.epsilon);
      }
    }
  }
}

TEST(Utility, HandEvaluatedExample) {
  UtilityFactors f{0.8, 0.5, 0.6};
  EXPECT_NEAR(utility(2.0, 10.0, f, 1.0, UtilityParams{}), 2.48, 1e-12);
}

TEST(Utility, NoTimeLeftIsWorthNothing) {
  UtilityFactors f{0.8, 0.5, 0.6};
  EXPECT_DOUBLE_EQ(utility(2.0, 0.0, f, 1.0, UtilityParams{}), 0.0);
  EXPECT_DOUBLE_EQ(utility(2.0, 5.0, f, 1.0, UtilityParams{}, false), 0.0);
}

TEST(Utility, LinearInReward) {
  UtilityFactors f{0.3, 0.9, 0.1};
  EXPECT_NEAR(utility(3.0, 5.0, f, 1.7, UtilityParams{}), 2.0 * utility(1.5, 5.0, f, 1.7, UtilityParams{}), 1e-12);
  EXPECT_THROW(utility(0.0, 5.0, f, 1.0, UtilityParams{}), std::invalid_argument);
}

TEST(Utility, NormalisedFactors) {
  auto f = utility_factors(10, 50.0, 25.0, 100.0, 0.3, UtilityParams{});
  EXPECT_NEAR(f.proximity, 0.8, 1e-12);
  EXPECT_NEAR(f.urgency, 0.75, 1e-12);
  EXPECT_NEAR(f.uncertainty, 0.7, 1e-12);
  auto g = utility_factors(std::nullopt, 50.0, 25.0, 100.0, 0.3, UtilityParams{});
  EXPECT_DOUBLE_EQ(g.proximity, 0.0);
}

TEST(BestResponse, SingleCarSingleTask) {
  auto pr = uniform_problem(1, 1, 1.0);
  auto r = best_response_allocate(pr);
  EXPECT_EQ(r.pick[0], 0);
  EXPECT_TRUE(r.certified);
}

TEST(BestResponse, TwoCarsCoverTwoIdenticalTasks) {
  auto pr = uniform_problem(2, 2, 1.0);
  auto r = best_response_allocate(pr);
  EXPECT_TRUE(r.certified);
  EXPECT_NE(r.pick[0], r.pick[1]);
  EXPECT_EQ(r.task_picks[0].size(), 1u);
  EXPECT_EQ(r.task_picks[1].size(), 1u);
  EXPECT_EQ(r.phase1_assigned, 2);
}

TEST(BestResponse, ThreeCarsTwoTasksAgainstEnumeration) {
  AllocationProblem pr;
  pr.reputation = {0.9, 0.4, 0.6};
  pr.base = {{1.2, 0.9}, {1.0, 1.1}, {0.7, 1.4}};
  pr.movers = {0, 1, 2};
  auto r = best_response_allocate(pr);
  ASSERT_TRUE(r.certified);
  auto eq = oracle::all_psne(pr);
  ASSERT_FALSE(eq.empty());
  EXPECT_NE(std::find(eq.begin(), eq.end(), r.pick), eq.end());
}

TEST(BestResponse, UnreachableTasksAreNeverPicked) {
  auto pr = uniform_problem(2, 2, 0.0);
  pr.base[1][1] = 0.5;
  auto r = best_response_allocate(pr);
  EXPECT_EQ(r.pick[0], -1);
  EXPECT_EQ(r.pick[1], 1);
}

TEST(BestResponse, FixedPicksCountTowardCongestion) {
  AllocationProblem pr;
  pr.reputation = {0.5, 0.5, 0.5};
  pr.base = {{1.0, 0.8}, {1.0, 0.8}, {0.0, 0.0}};
  pr.fixed_picks = {{2}, {}};
  pr.movers = {0};
  auto r = best_response_allocate(pr);
  // Task 0 is worth 1/2 with the committed car on it, task 1 is worth 0.8.
  EXPECT_EQ(r.pick[0], 1);
  EXPECT_EQ(r.task_picks[0], std::vector<int>{2});
}

TEST(BestResponse, EquilibriumMatchesBruteForceOnRandomGames) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    auto pr = oracle::random_game(seed, 5, 4);
    auto r = best_response_allocate(pr);
    ASSERT_TRUE(r.certified) << "seed " << seed;
    EXPECT_TRUE(oracle::is_psne(pr, r.pick)) << "seed " << seed;
    for (int m : pr.movers) {
      const auto i = static_cast<std::size_t>(m);
      EXPECT_NEAR(r.pick_utility[i], oracle::profile_utility(pr, r.pick, m), 1e-12);
      EXPECT_LE(r.best_deviation_utility[i], r.pick_utility[i] * (1 + 1e-12) + 1e-15);
    }
  }
}

TEST(BestResponse, RewardScalingKeepsEveryBestResponseSet) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto pr = oracle::random_game(seed);
    auto r = best_response_allocate(pr);
    for (double c : {0.01, 0.5, 3.0, 1000.0}) {
      auto scaled = pr;
      for (auto& row : scaled.base)
        for (auto& b : row) b *= c;
      auto rs = best_response_allocate(scaled);
      EXPECT_EQ(rs.pick, r.pick) << "seed " << seed << " c " << c;
      for (int m : pr.movers) EXPECT_EQ(best_set(scaled, rs.pick, m), best_set(pr, r.pick, m));
    }
  }
}

TEST(BestResponse, LiteralCongestionCanLackAnEquilibrium) {
  // Under the literal form a lower-reputation co-picker is nearly free while
  // a higher-reputation one drives gamma to its floor, so best responses can
  // cycle. Whenever enumeration finds no equilibrium the result must not be
  // certified.
  int without = 0;
  for (std::uint64_t seed = 1; seed <= 3000 && without < 3; ++seed) {
    auto pr = oracle::random_game(seed, 4, 3, CongestionForm::literal);
    auto r = best_response_allocate(pr);
    const bool any = !oracle::all_psne(pr).empty();
    if (!any) {
      ++without;
      EXPECT_FALSE(r.certified) << "seed " << seed;
    }
    if (r.certified) {
      EXPECT_TRUE(oracle::is_psne(pr, r.pick)) << "seed " << seed;
    }
  }
  EXPECT_GT(without, 0);
}

TEST(Outcome, CompletionRaisesReputation) {
  TaskBoard b;
  b.tasks.push_back(Task{7, 0, 1.0, 10.0, 10.0, 0.0, {0}});
  Reputation rep(1, 0.5, 0.1);
  auto fx = mark_outcome(b, rep, 0, 7, Outcome::completed);
  EXPECT_NEAR(rep.pi[0], 0.6, 1e-12);
  EXPECT_FALSE(fx.churn);
}

TEST(Outcome, DropLowersReputationAndCountsChurn) {
  TaskBoard b;
  b.tasks.push_back(Task{7, 0, 1.0, 10.0, 10.0, 0.0, {0}});
  Reputation rep(1, 0.5, 0.1);
  auto fx = mark_outcome(b, rep, 0, 7, Outcome::dropped);
  EXPECT_NEAR(rep.pi[0], 0.4, 1e-12);
  EXPECT_TRUE(fx.churn);
  EXPECT_TRUE(b.tasks[0].picks.empty());
}

TEST(Outcome, UnassignedCarIsAnError) {
  TaskBoard b;
  b.tasks.push_back(Task{7, 0, 1.0, 10.0, 10.0, 0.0, {0}});
  Reputation rep(2, 0.5, 0.1);
  EXPECT_THROW(mark_outcome(b, rep, 1, 7, Outcome::completed), std::invalid_argument);
  EXPECT_THROW(mark_outcome(b, rep, 0, 8, Outcome::completed), std::invalid_argument);
}
