#include <gtest/gtest.h>

#include "dasc/experiments.hpp"
#include "dasc/nelder_mead.hpp"

using namespace dasc;

TEST(NelderMead, FindsConcaveMaximum) {
  auto f = [](const std::vector<double>& x) { return -(x[0] - 0.6) * (x[0] - 0.6); };
  auto r = nelder_mead_maximize(f, {0.1}, {0.0}, {1.0});
  // Grid oracle on a 0.01 lattice.
  double best = 0.0, best_v = f({0.0});
  for (int i = 0; i <= 100; ++i)
    if (f({i / 100.0}) > best_v) {
      best_v = f({i / 100.0});
      best = i / 100.0;
    }
  EXPECT_NEAR(r.x[0], best, 0.05);
  EXPECT_GE(r.value, best_v - 1e-3);
  EXPECT_TRUE(r.converged);
}

TEST(NelderMead, FlatCoordinateDoesNotDrift) {
  auto f = [](const std::vector<double>& x) { return -(x[0] - 0.3) * (x[0] - 0.3); };
  NelderMeadParams p;
  p.initial_step = 0.0;
  auto r = nelder_mead_maximize(f, {0.8, 0.4}, {0.0, 0.0}, {1.0, 1.0}, p);
  EXPECT_NEAR(r.x[0], 0.8, 1e-12);
  EXPECT_NEAR(r.x[1], 0.4, 1e-12);
}

TEST(NelderMead, EveryEvaluationStaysInBounds) {
  std::vector<double> lo{0.0, -1.0, 2.0}, hi{1.0, 1.0, 3.0};
  bool outside = false;
  auto f = [&](const std::vector<double>& x) {
    for (std::size_t i = 0; i < x.size(); ++i) outside = outside || x[i] < lo[i] || x[i] > hi[i];
    return x[0] * 3 + x[1] * 2 + x[2];  // maximum at the upper corner
  };
  auto r = nelder_mead_maximize(f, {0.5, 0.0, 2.5}, lo, hi);
  EXPECT_FALSE(outside);
  EXPECT_NEAR(r.value, 3 + 2 + 3, 1e-3);
  EXPECT_THROW(nelder_mead_maximize(f, {0.5}, lo, hi), std::invalid_argument);
}

TEST(NelderMead, RespectsEvaluationBudget) {
  int calls = 0;
  auto f = [&](const std::vector<double>& x) {
    ++calls;
    return std::sin(10 * x[0]) + std::cos(7 * x[1]);
  };
  NelderMeadParams p;
  p.max_evaluations = 25;
  auto r = nelder_mead_maximize(f, {0.5, 0.5}, {0.0, 0.0}, {1.0, 1.0}, p);
  EXPECT_LE(calls, 25);
  EXPECT_EQ(r.evaluations, calls);
}

TEST(Tune, StaysInBoundsAndNeverLosesToDefaults) {
  auto sc = load_scenario(std::filesystem::path(DASC_SOURCE_DIR) / "scenarios/sample_reports.json");
  RunConfig base;
  TuneConfig tc;
  tc.simplex.max_evaluations = 12;
  tc.segments = 1;
  tc.jobs = 1;
  auto r = tune(sc, base, tc);
  ASSERT_EQ(r.values.size(), kTunedNames.size());
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    EXPECT_GE(r.values[i], tc.lower[i]);
    EXPECT_LE(r.values[i], tc.upper[i]);
  }
  EXPECT_GE(r.f1, r.default_f1);
  EXPECT_EQ(r.stages.size(), 2u);
}
