#pragma once

// Multi-run harness: concurrent independent runs, sweeps with per-scheme
// medians, parameter tuning and the initial-accessibility scan.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "dasc/config.hpp"
#include "dasc/engine.hpp"
#include "dasc/nelder_mead.hpp"
#include "dasc/scenario.hpp"

namespace dasc {

/// Median of the values (mean of the middle two for even counts); 0 when empty.
inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct RunSummary {
  Scheme scheme = Scheme::dasc;
  std::uint64_t seed = 0;
  std::string point;  // sweep point label, empty outside sweeps
  bool ok = true;
  std::string error;
  Confusion confusion;
  DeadlineTally deadlines;
  double f1() const { return confusion.f1().value; }
  double hit_rate() const { return deadlines.hit_rate().value; }
};

inline RunSummary run_one(const Scenario& sc, const RunConfig& cfg, int cycles = -1) {
  RunSummary s;
  s.scheme = cfg.scheme;
  s.seed = cfg.seed;
  try {
    Simulation sim(sc, cfg);
    auto r = sim.run(cycles);
    s.confusion = r.metrics.confusion;
    s.deadlines = r.metrics.deadlines;
  } catch (const std::exception& e) {
    s.ok = false;
    s.error = e.what();
  }
  return s;
}

/// Runs every config, `jobs` at a time; results keep the input order.
inline std::vector<RunSummary> run_many(const Scenario& sc, const std::vector<RunConfig>& configs, int jobs = 0,
                                        int cycles = -1) {
  std::vector<RunSummary> out(configs.size());
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(configs.size(), 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) out[i] = run_one(sc, configs[i], cycles);
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

struct SweepPoint {
  std::string label;
  std::function<void(RunConfig&)> apply;
};

/// Fleet-size points with equal driver thirds (remainder to completers).
inline std::vector<SweepPoint> fleet_size_points(const std::vector<int>& sizes) {
  std::vector<SweepPoint> out;
  for (int n : sizes) {
    if (n < 0) throw std::invalid_argument("fleet size must be non-negative");
    out.push_back({"cars=" + std::to_string(n), [n](RunConfig& c) {
                     c.aborters = n / 3;
                     c.refusers = n / 3;
                     c.completers = n - 2 * (n / 3);
                   }});
  }
  return out;
}

/// Aborter-share points over a fleet of `total` cars; the rest splits evenly
/// between completers and refusers (odd remainder to completers).
inline std::vector<SweepPoint> aborter_share_points(const std::vector<std::string>& shares, int total) {
  std::vector<SweepPoint> out;
  for (const auto& label : shares) {
    const double f = std::stod(label);
    if (f < 0.0 || f > 1.0) throw std::invalid_argument("aborter fraction must lie in [0,1]");
    const int a = static_cast<int>(std::lround(f * total));
    out.push_back({"aborters=" + label, [a, total](RunConfig& c) {
                     c.aborters = a;
                     c.refusers = (total - a) / 2;
                     c.completers = total - a - (total - a) / 2;
                   }});
  }
  return out;
}

struct SweepMedian {
  Scheme scheme = Scheme::dasc;
  std::string point;
  double f1 = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double hit_rate = 0.0;
  int runs = 0;
  int failures = 0;
};

struct SweepResult {
  std::vector<RunSummary> rows;
  std::vector<SweepMedian> medians;  // one per (point, scheme)

  const SweepMedian& find(Scheme s, const std::string& point = "") const {
    for (const auto& m : medians)
      if (m.scheme == s && m.point == point) return m;
    throw std::out_of_range("sweep: no such (scheme, point)");
  }
};

inline SweepResult sweep(const Scenario& sc, const RunConfig& base, const std::vector<Scheme>& schemes,
                         const std::vector<std::uint64_t>& seeds, std::vector<SweepPoint> points = {}, int jobs = 0) {
  if (schemes.empty() || seeds.empty()) throw std::invalid_argument("sweep: need at least one scheme and one seed");
  if (points.empty()) points.push_back({"", [](RunConfig&) {}});
  std::vector<RunConfig> configs;
  std::vector<std::string> labels;
  for (const auto& p : points)
    for (Scheme s : schemes)
      for (auto seed : seeds) {
        RunConfig c = base;
        c.scheme = s;
        c.seed = seed;
        c.trace = false;
        p.apply(c);
        configs.push_back(c);
        labels.push_back(p.label);
      }
  SweepResult r;
  r.rows = run_many(sc, configs, jobs);
  for (std::size_t i = 0; i < r.rows.size(); ++i) r.rows[i].point = labels[i];
  for (const auto& p : points)
    for (Scheme s : schemes) {
      SweepMedian m;
      m.scheme = s;
      m.point = p.label;
      std::vector<double> f1, acc, pre, rec, hit;
      for (const auto& row : r.rows) {
        if (row.scheme != s || row.point != p.label) continue;
        ++m.runs;
        if (!row.ok) {
          ++m.failures;
          continue;
        }
        f1.push_back(row.f1());
        acc.push_back(row.confusion.accuracy().value);
        pre.push_back(row.confusion.precision().value);
        rec.push_back(row.confusion.recall().value);
        hit.push_back(row.hit_rate());
      }
      m.f1 = median(f1);
      m.accuracy = median(acc);
      m.precision = median(pre);
      m.recall = median(rec);
      m.hit_rate = median(hit);
      r.medians.push_back(m);
    }
  return r;
}

struct TuneConfig {
  double horizon_fraction = 0.25;  // tune on the first quarter of the cycles
  int segments = 3;
  NelderMeadParams simplex{};
  std::vector<double> lower = std::vector<double>(kTunedNames.size(), 0.0);
  std::vector<double> upper = std::vector<double>(kTunedNames.size(), 1.0);
  std::vector<std::uint64_t> seeds;  // empty: the base config's seed
  int jobs = 0;
};

struct TuneStage {
  int cycles = 0;
  double retained_f1 = 0.0;
  double candidate_f1 = 0.0;
  bool accepted = false;
  int evaluations = 0;
  bool converged = false;
};

struct TuneResult {
  std::vector<double> values;
  double f1 = 0.0;          // on the full tuning horizon
  double default_f1 = 0.0;  // built-in defaults on the same horizon
  int horizon = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<TuneStage> stages;
};

/// Mean F1 of the configuration over the seeds, run for `cycles` cycles.
inline double tuning_f1(const Scenario& sc, const RunConfig& base, const std::vector<double>& values, int cycles,
                        const std::vector<std::uint64_t>& seeds, int jobs) {
  std::vector<RunConfig> configs;
  for (auto seed : seeds) {
    RunConfig c = base;
    set_tuned_values(c, values);
    c.seed = seed;
    c.trace = false;
    configs.push_back(c);
  }
  double sum = 0.0;
  for (const auto& r : run_many(sc, configs, jobs, cycles)) sum += r.ok ? r.f1() : 0.0;
  return sum / static_cast<double>(seeds.size());
}

/// Staged Nelder-Mead on F1. The horizon is split into equal segments; each
/// stage optimises over the cycles up to its segment end starting from the
/// parameters retained so far, and keeps its result only if it does not
/// lower F1. A final stage covers the whole horizon. The built-in defaults
/// compete as one more retention candidate.
inline TuneResult tune(const Scenario& sc, const RunConfig& base, const TuneConfig& tc) {
  const std::size_t dim = kTunedNames.size();
  if (tc.lower.size() != dim || tc.upper.size() != dim) throw std::invalid_argument("tune: bounds need 8 entries");
  if (tc.segments < 1) throw std::invalid_argument("tune: at least one segment");
  const int total = base.cycles.value_or(sc.cycles);
  const int horizon = std::max(1, static_cast<int>(std::floor(total * tc.horizon_fraction)));
  auto seeds = tc.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : tc.seeds;

  TuneResult res;
  res.horizon = horizon;
  std::vector<double> current(dim);
  for (std::size_t i = 0; i < dim; ++i) current[i] = std::clamp(1.0, tc.lower[i], tc.upper[i]);

  auto stage = [&](int cycles) {
    auto f = [&](const std::vector<double>& x) { return tuning_f1(sc, base, x, cycles, seeds, tc.jobs); };
    TuneStage st;
    st.cycles = cycles;
    st.retained_f1 = f(current);
    auto nm = nelder_mead_maximize(f, current, tc.lower, tc.upper, tc.simplex);
    st.candidate_f1 = nm.value;
    st.evaluations = nm.evaluations + 1;
    st.converged = nm.converged;
    st.accepted = nm.value >= st.retained_f1;
    if (st.accepted) current = nm.x;
    res.evaluations += st.evaluations;
    res.converged = nm.converged;
    res.stages.push_back(st);
  };
  for (int s = 1; s <= tc.segments; ++s) stage(static_cast<int>(std::ceil(static_cast<double>(s) * horizon / tc.segments)));
  stage(horizon);

  auto defaults = tuned_values(RunConfig{});
  std::vector<double> dvec(defaults.begin(), defaults.end());
  bool defaults_in_bounds = true;
  for (std::size_t i = 0; i < dim; ++i)
    defaults_in_bounds = defaults_in_bounds && dvec[i] >= tc.lower[i] && dvec[i] <= tc.upper[i];
  res.f1 = tuning_f1(sc, base, current, horizon, seeds, tc.jobs);
  res.default_f1 = tuning_f1(sc, base, dvec, horizon, seeds, tc.jobs);
  if (defaults_in_bounds && res.default_f1 > res.f1) {
    current = dvec;
    res.f1 = res.default_f1;
  }
  res.values = current;
  return res;
}

struct X0Result {
  double x0 = 0.5;
  double error = 0.0;
  std::vector<std::pair<double, double>> scan;  // (x0, mean |X - D|)
};

/// Linear scan of the initial accessibility index, scoring each value by the
/// mean |X - D| over every cell and cycle of a calibration run.
inline X0Result tune_x0(const Scenario& sc, RunConfig base, double step = 0.05) {
  if (!(step > 0.0)) throw std::invalid_argument("tune_x0: step must be positive");
  base.scheme = Scheme::dasc;
  base.trace = false;
  X0Result out;
  bool first = true;
  for (int i = 0; i * step <= 1.0 + 1e-9; ++i) {
    const double x0 = std::min(1.0, i * step);
    base.x0 = x0;
    Simulation sim(sc, base);
    double err = 0.0;
    long count = 0;
    while (sim.cycle() < sim.total_cycles()) {
      sim.run_cycle();
      const auto xs = sim.access().values();
      for (CellId c : sim.truth().open_cells()) {
        err += std::abs(xs[static_cast<std::size_t>(c)] - (sim.truth().damaged(c) ? 0.0 : 1.0));
        ++count;
      }
    }
    err = count ? err / static_cast<double>(count) : 0.0;
    out.scan.emplace_back(x0, err);
    if (first || err < out.error) {
      out.x0 = x0;
      out.error = err;
      first = false;
    }
  }
  return out;
}

}  // namespace dasc
