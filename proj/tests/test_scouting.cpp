#include <gtest/gtest.h>

#include <numeric>

#include "dasc/experiments.hpp"
#include "dasc/scouting.hpp"
#include "oracles.hpp"

using namespace dasc;

namespace {

std::vector<int> ids(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST(SelectScouts, TwentyPercentOfTen) {
  Rng rng(1);
  auto w = ids(10);
  EXPECT_EQ(select_scouts(w, 20.0, rng).size(), 2u);
}

TEST(SelectScouts, ZeroPercentGivesNone) {
  Rng rng(1);
  auto w = ids(10);
  EXPECT_TRUE(select_scouts(w, 0.0, rng).empty());
}

TEST(SelectScouts, FloorOfHalfOfThree) {
  Rng rng(1);
  auto w = ids(3);
  EXPECT_EQ(select_scouts(w, 50.0, rng).size(), 1u);
}

TEST(SelectScouts, ChosenFromWillingAndDeterministic) {
  std::vector<int> w{3, 8, 12, 20, 21};
  Rng a(9), b(9);
  auto s1 = select_scouts(w, 60.0, a), s2 = select_scouts(w, 60.0, b);
  EXPECT_EQ(s1, s2);
  for (int s : s1) EXPECT_NE(std::find(w.begin(), w.end(), s), w.end());
  Rng c(1);
  EXPECT_THROW(select_scouts(w, 120.0, c), std::invalid_argument);
}

TEST(Coverage, CorridorIsWalkedEndToEnd) {
  Grid g = Grid::lattice(4, 1);
  std::vector<ScoutStart> s{{0, 0}};
  auto plan = plan_coverage(g, s, 4);
  ASSERT_EQ(plan.routes.size(), 1u);
  EXPECT_EQ(distinct_edges(plan.routes), 3u);
  EXPECT_EQ(plan.routes[0], (std::vector<CellId>{0, 1, 2, 3}));
}

TEST(Coverage, TwoScoutsCoverTheRing) {
  Grid g = Grid::lattice(2, 2);
  std::vector<ScoutStart> s{{0, 0}, {1, 3}};
  auto plan = plan_coverage(g, s, 3);
  EXPECT_EQ(distinct_edges(plan.routes), 4u);
  EXPECT_EQ(plan.edges_covered, 4u);
  for (const auto& r : plan.routes) EXPECT_LE(r.size(), 3u);
}

TEST(Coverage, NoScoutsNoPlan) {
  Grid g = Grid::lattice(3, 3);
  auto plan = plan_coverage(g, {}, 5);
  EXPECT_TRUE(plan.routes.empty());
  EXPECT_EQ(plan.edges_covered, 0u);
}

TEST(Coverage, RoutesAreEdgeSimpleWalksWithinBudget) {
  Grid g = Grid::lattice(6, 6);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<ScoutStart> s;
    for (int i = 0; i < 3; ++i) s.push_back({i, static_cast<CellId>(rng.below(36))});
    auto plan = plan_coverage(g, s, 12);
    for (const auto& r : plan.routes) {
      EXPECT_LE(r.size(), 12u);
      std::set<Edge> seen;
      for (std::size_t i = 1; i < r.size(); ++i) {
        EXPECT_TRUE(g.adjacent(r[i - 1], r[i]));
        EXPECT_TRUE(seen.insert(make_edge(r[i - 1], r[i])).second);
      }
    }
  }
}

TEST(Coverage, AvoidsKnownDamage) {
  Grid g = Grid::lattice(5, 1);
  std::vector<std::uint8_t> known{0, 0, 1, 0, 0};
  std::vector<ScoutStart> s{{0, 0}};
  auto plan = plan_coverage(g, s, 5, known);
  for (CellId c : plan.routes[0]) EXPECT_NE(c, 2);
}

TEST(Coverage, BeatsRandomWalksOnMedian) {
  Grid g = Grid::lattice(6, 6);
  std::vector<double> planned, random;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    std::vector<ScoutStart> s;
    for (int i = 0; i < 2; ++i) s.push_back({i, static_cast<CellId>(rng.below(36))});
    auto plan = plan_coverage(g, s, 15);
    planned.push_back(static_cast<double>(distinct_edges(plan.routes)));
    std::vector<std::vector<CellId>> walks;
    for (const auto& st : s) {
      std::vector<CellId> w{st.position};
      while (w.size() < 15) {
        auto n = g.neighbors(w.back());
        w.push_back(n[static_cast<std::size_t>(rng.below(n.size()))]);
      }
      walks.push_back(w);
    }
    random.push_back(static_cast<double>(distinct_edges(walks)));
  }
  EXPECT_GE(median(planned), median(random));
}

TEST(Accessibility, DamageLowersByKappa) {
  AccessibilityMap m(3, 0.5);
  m.visit(1, true, 0.2, 1);
  EXPECT_NEAR(m[1], 0.3, 1e-12);
}

TEST(Accessibility, ClampsAtOne) {
  AccessibilityMap m(3, 0.95);
  m.visit(0, false, 0.2, 1);
  EXPECT_DOUBLE_EQ(m[0], 1.0);
}

TEST(Accessibility, UnobservedCellsKeepTheirIndex) {
  AccessibilityMap m(4, 0.5);
  std::vector<DamageObservation> obs{{1, 0, 1, 0}, {1, 1, 0, 0}};
  apply_observations(m, obs, 0.2, 1);
  EXPECT_DOUBLE_EQ(m[2], 0.5);
  EXPECT_DOUBLE_EQ(m[3], 0.5);
  EXPECT_NEAR(m[0], 0.3, 1e-12);
  EXPECT_NEAR(m[1], 0.7, 1e-12);
}

TEST(Accessibility, RepeatedObservationsInOneCycleMoveOnce) {
  AccessibilityMap m(2, 0.5);
  std::vector<DamageObservation> obs{{1, 0, 1, 0}, {1, 0, 1, 1}, {1, 0, 1, 2}};
  apply_observations(m, obs, 0.2, 1);
  EXPECT_NEAR(m[0], 0.3, 1e-12);
}

TEST(Accessibility, ScoutsUpdateOnlyWhatTheySee) {
  Grid g = Grid::lattice(7, 1);
  g.set_damage(2, true);
  std::vector<ScoutStart> s{{0, 0}};
  auto plan = plan_coverage(g, s, 2);
  std::vector<DamageObservation> log;
  KappaWindow kw;
  kw.kappa = 0.25;
  auto x = observe_and_update(plan, g, AccessibilityMap(g.size(), 0.5), kw, 1, 2, &log, 1);
  EXPECT_DOUBLE_EQ(x[0], 0.75);
  EXPECT_DOUBLE_EQ(x[1], 0.75);
  EXPECT_DOUBLE_EQ(x[2], 0.25);
  for (CellId c = 3; c < 7; ++c) EXPECT_DOUBLE_EQ(x[c], 0.5);
}

TEST(Kappa, PerfectCorrelationGivesOne) {
  KappaWindow kw;
  for (double v : {1.0, 2.0, 3.0}) update_kappa(kw, v, v);
  EXPECT_DOUBLE_EQ(kw.kappa, 1.0);
}

TEST(Kappa, ConstantSeriesFallsBackToDefault) {
  KappaWindow kw;
  update_kappa(kw, 2, 1);
  update_kappa(kw, 2, 5);
  update_kappa(kw, 2, 3);
  EXPECT_DOUBLE_EQ(kw.kappa, 0.65);
}

TEST(Kappa, AnticorrelationIsClampedToFloor) {
  KappaWindow kw;
  update_kappa(kw, 1, 3);
  update_kappa(kw, 2, 2);
  update_kappa(kw, 3, 1);
  EXPECT_DOUBLE_EQ(kw.kappa, 0.05);
}

TEST(Kappa, SingleEntryUsesDefault) {
  KappaWindow kw;
  EXPECT_DOUBLE_EQ(update_kappa(kw, 4, 9), 0.65);
}

TEST(Kappa, MatchesPearsonOracleOverSlidingWindow) {
  KappaWindow kw;
  Rng rng(5);
  std::vector<double> d, n;
  for (int t = 0; t < 40; ++t) {
    d.push_back(static_cast<double>(rng.below(10)));
    n.push_back(static_cast<double>(rng.below(10)));
    update_kappa(kw, d.back(), n.back());
    const std::size_t from = d.size() > 6 ? d.size() - 6 : 0;
    std::vector<double> wd(d.begin() + static_cast<std::ptrdiff_t>(from), d.end());
    std::vector<double> wn(n.begin() + static_cast<std::ptrdiff_t>(from), n.end());
    auto r = wd.size() < 2 ? std::nullopt : oracle::pearson(wd, wn);
    const double expect = r ? std::clamp(*r, 0.05, 1.0) : 0.65;
    EXPECT_NEAR(kw.kappa, expect, 1e-9) << "cycle " << t;
    EXPECT_LE(kw.entries.size(), 6u);
  }
}
