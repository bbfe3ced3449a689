#include <gtest/gtest.h>

#include "dasc/social.hpp"

using namespace dasc;

namespace {

SocialReport rep(std::string src, CellId cell, int state, double ts = 1.0, double deadline = 30.0) {
  return {std::move(src), cell, static_cast<std::uint8_t>(state), ts, deadline};
}

ClaimGroup group(int cycle, CellId cell, std::vector<std::pair<std::string, int>> claims) {
  ClaimGroup g;
  g.cycle = cycle;
  g.cell = cell;
  g.deadline_min = 30.0;
  for (auto& [s, v] : claims) g.claims.push_back({s, static_cast<std::uint8_t>(v)});
  std::sort(g.claims.begin(), g.claims.end(), [](const Claim& a, const Claim& b) { return a.source_id < b.source_id; });
  return g;
}

const Grid kGrid = Grid::lattice(4, 4);

}  // namespace

TEST(Ingest, EmptyBatchGivesNoGroups) {
  auto r = ingest_cycle({}, 1, 100.0, kGrid);
  EXPECT_TRUE(r.groups.empty());
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(Ingest, SameCellReportsFormOneGroup) {
  std::vector<SocialReport> in{rep("a", 5, 1), rep("b", 5, 1), rep("c", 5, 0)};
  auto r = ingest_cycle(in, 1, 100.0, kGrid);
  ASSERT_EQ(r.groups.size(), 1u);
  EXPECT_EQ(r.groups[0].support(), 2);
  EXPECT_EQ(r.groups[0].oppose(), 1);
}

TEST(Ingest, DistinctCellsFormSeparateGroups) {
  std::vector<SocialReport> in{rep("a", 5, 1), rep("b", 6, 0)};
  EXPECT_EQ(ingest_cycle(in, 1, 100.0, kGrid).groups.size(), 2u);
}

TEST(Ingest, RejectsInvalidCellsAndForeignTimestamps) {
  std::vector<SocialReport> in{rep("a", 99, 1), rep("b", 5, 1, 150.0), rep("c", 5, 1, 50.0)};
  auto r = ingest_cycle(in, 1, 100.0, kGrid);
  EXPECT_EQ(r.groups.size(), 1u);
  EXPECT_EQ(r.diagnostics.size(), 2u);
}

TEST(Ingest, LatestReportPerSourceWinsAndTightestDeadlineKept) {
  std::vector<SocialReport> in{rep("a", 5, 1, 10.0, 40.0), rep("a", 5, 0, 20.0, 25.0)};
  auto r = ingest_cycle(in, 1, 100.0, kGrid);
  ASSERT_EQ(r.groups.size(), 1u);
  ASSERT_EQ(r.groups[0].claims.size(), 1u);
  EXPECT_EQ(r.groups[0].claims[0].state, 0);
  EXPECT_DOUBLE_EQ(r.groups[0].deadline_min, 25.0);
}

TEST(Ingest, PartitionsEveryAcceptedReport) {
  Rng rng(3);
  std::vector<SocialReport> in;
  for (int i = 0; i < 60; ++i)
    in.push_back(rep("s" + std::to_string(i), static_cast<CellId>(rng.below(16)), static_cast<int>(rng.below(2)),
                     rng.uniform(0.0, 100.0)));
  auto r = ingest_cycle(in, 1, 100.0, kGrid);
  std::size_t claims = 0;
  std::set<CellId> cells;
  for (const auto& g : r.groups) {
    claims += g.claims.size();
    EXPECT_TRUE(cells.insert(g.cell).second);
  }
  EXPECT_EQ(claims, in.size());  // source ids are unique here
}

TEST(Estimator, UnanimousSupportExceedsMidpoint) {
  WeightedVotingEstimator est;
  std::vector<ClaimGroup> gs{group(1, 3, {{"a", 1}, {"b", 1}, {"c", 1}})};
  auto e = est.estimate(gs);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_GT(e[0].veracity, 0.5);
  EXPECT_GT(e[0].confidence, 0.0);
  EXPECT_TRUE(e[0].estimate_exists());
}

TEST(Estimator, BalancedClaimsAreNeutral) {
  WeightedVotingEstimator est;
  std::vector<ClaimGroup> gs{group(1, 3, {{"a", 1}, {"b", 0}})};
  auto e = est.estimate(gs);
  EXPECT_DOUBLE_EQ(e[0].veracity, 0.5);
  EXPECT_DOUBLE_EQ(e[0].confidence, 0.0);
}

TEST(Estimator, PersistentContrarianLosesWeight) {
  WeightedVotingEstimator est;
  for (int t = 1; t <= 3; ++t) {
    std::vector<ClaimGroup> gs{
        group(t, 1, {{"m1", 1}, {"m2", 1}, {"m3", 1}, {"m4", 1}, {"x", 0}}),
        group(t, 2, {{"m1", 0}, {"m2", 0}, {"m3", 0}, {"m4", 0}, {"x", 1}}),
    };
    est.estimate(gs);
  }
  for (const char* m : {"m1", "m2", "m3", "m4"}) EXPECT_LT(est.weight("x"), est.weight(m));
  EXPECT_LT(est.weight("x"), 0.5);
  EXPECT_GT(est.weight("m1"), 0.5);
}

TEST(Estimator, ConfidenceIsSymmetricAboutMidpoint) {
  for (double d : {0.0, 0.1, 0.25, 0.4, 0.5}) {
    EXPECT_DOUBLE_EQ(estimation_confidence(0.5 + d), estimation_confidence(0.5 - d));
    EXPECT_GE(estimation_confidence(0.5 + d), 0.0);
    EXPECT_LE(estimation_confidence(0.5 + d), 1.0);
  }
}

TEST(Estimator, VeracityStaysInOpenUnitInterval) {
  WeightedVotingEstimator est;
  std::vector<ClaimGroup> gs{group(1, 1, {{"a", 0}, {"b", 0}, {"c", 0}, {"d", 0}})};
  auto e = est.estimate(gs);
  EXPECT_GT(e[0].veracity, 0.0);
  EXPECT_LE(e[0].veracity, 1.0);
  EXPECT_FALSE(e[0].estimate_exists());
}

TEST(Split, ShortDeadlineIsNotSplit) {
  EventEstimate e;
  e.deadline_min = 60.0;
  auto s = split_event(e, 100.0);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].deadline_min, 60.0);
}

TEST(Split, LongDeadlineSplitsIntoEqualParts) {
  EventEstimate e;
  e.deadline_min = 250.0;
  e.veracity = 0.7;
  e.confidence = 0.4;
  auto s = split_event(e, 100.0);
  const int parts = (250 + 100 - 1) / 100;
  ASSERT_EQ(static_cast<int>(s.size()), parts);
  double total = 0.0;
  for (int i = 0; i < parts; ++i) {
    EXPECT_NEAR(s[static_cast<std::size_t>(i)].deadline_min, 250.0 / 3.0, 1e-12);
    EXPECT_NEAR(s[static_cast<std::size_t>(i)].window_start_min, i * 250.0 / 3.0, 1e-9);
    EXPECT_EQ(s[static_cast<std::size_t>(i)].part, i);
    EXPECT_DOUBLE_EQ(s[static_cast<std::size_t>(i)].veracity, 0.7);
    EXPECT_DOUBLE_EQ(s[static_cast<std::size_t>(i)].confidence, 0.4);
    total += s[static_cast<std::size_t>(i)].deadline_min;
  }
  EXPECT_NEAR(total, 250.0, 1e-9);
}

TEST(Split, DeadlineEqualToCycleIsNotSplit) {
  EventEstimate e;
  e.deadline_min = 100.0;
  EXPECT_EQ(split_event(e, 100.0).size(), 1u);
}

TEST(Split, NonPositiveDeadlineThrows) {
  EventEstimate e;
  e.deadline_min = 0.0;
  EXPECT_THROW(split_event(e, 100.0), std::invalid_argument);
}

TEST(Gate, ConfidentEstimateIsConcluded) {
  EventEstimate e;
  e.veracity = 0.8;
  e.confidence = 0.9;
  std::vector<EventEstimate> in{e};
  auto g = gate_dispatch(in, 0.5);
  ASSERT_EQ(g.concluded.size(), 1u);
  EXPECT_EQ(g.concluded[0].decided_state, 1);
  EXPECT_TRUE(g.tasks.empty());
}

TEST(Gate, UnsureEstimateBecomesTask) {
  EventEstimate e;
  e.veracity = 0.55;
  e.confidence = 0.1;
  std::vector<EventEstimate> in{e};
  auto g = gate_dispatch(in, 0.5);
  EXPECT_TRUE(g.concluded.empty());
  ASSERT_EQ(g.tasks.size(), 1u);
  EXPECT_TRUE(g.tasks[0].needs_dispatch);
}

TEST(Gate, ZeroThresholdConcludesEverything) {
  std::vector<EventEstimate> in(4);
  for (std::size_t i = 0; i < in.size(); ++i) in[i].confidence = 0.1 * static_cast<double>(i);
  auto g = gate_dispatch(in, 0.0);
  EXPECT_EQ(g.concluded.size(), 4u);
  EXPECT_TRUE(g.tasks.empty());
}

TEST(Gate, OutputsPartitionTheInput) {
  std::vector<EventEstimate> in(10);
  for (std::size_t i = 0; i < in.size(); ++i) in[i].confidence = 0.1 * static_cast<double>(i);
  auto g = gate_dispatch(in, 0.45);
  EXPECT_EQ(g.concluded.size() + g.tasks.size(), in.size());
  EXPECT_THROW(gate_dispatch(in, 1.5), std::invalid_argument);
}
