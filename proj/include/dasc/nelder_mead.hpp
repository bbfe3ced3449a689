#pragma once

// Bounded Nelder-Mead maximisation. Points are projected into the box after
// every simplex move, so no evaluated point leaves the bounds.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dasc {

struct NelderMeadParams {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  double initial_step = 0.25;
  double tolerance = 1e-6;  // spread of objective values across the simplex
  int max_evaluations = 200;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

inline NelderMeadResult nelder_mead_maximize(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> x0, const std::vector<double>& lower,
                                             const std::vector<double>& upper, const NelderMeadParams& p = {}) {
  const std::size_t n = x0.size();
  if (n == 0 || lower.size() != n || upper.size() != n) throw std::invalid_argument("nelder_mead: dimension mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (lower[i] > upper[i]) throw std::invalid_argument("nelder_mead: empty bound interval");

  auto project = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    return x;
  };

  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    return f(x);
  };

  std::vector<std::vector<double>> pts;
  pts.push_back(project(std::move(x0)));
  for (std::size_t i = 0; i < n; ++i) {
    auto v = pts.front();
    const double span = upper[i] - lower[i];
    const double step = p.initial_step * (span > 0.0 ? span : 1.0);
    // Step toward the interior when the start sits on the upper bound.
    v[i] = (v[i] + step <= upper[i]) ? v[i] + step : v[i] - step;
    pts.push_back(project(std::move(v)));
  }
  std::vector<double> val(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) val[i] = eval(pts[i]);

  std::vector<std::size_t> order(pts.size());
  while (true) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] > val[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (std::abs(val[best] - val[worst]) <= p.tolerance) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= p.max_evaluations) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k + 1 < order.size(); ++k)
      for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[order[k]][i] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = centroid[i] + t * (centroid[i] - pts[worst][i]);
      return project(std::move(x));
    };

    auto xr = along(p.reflection);
    double fr = eval(xr);
    if (fr > val[best]) {
      auto xe = along(p.reflection * p.expansion);
      double fe = eval(xe);
      if (fe > fr) {
        pts[worst] = std::move(xe);
        val[worst] = fe;
      } else {
        pts[worst] = std::move(xr);
        val[worst] = fr;
      }
      continue;
    }
    if (fr > val[second]) {
      pts[worst] = std::move(xr);
      val[worst] = fr;
      continue;
    }
    const bool outside = fr > val[worst];
    auto xc = along(outside ? p.reflection * p.contraction : -p.contraction);
    double fc = eval(xc);
    if (fc > std::max(fr, val[worst]) || (!outside && fc > val[worst])) {
      pts[worst] = std::move(xc);
      val[worst] = fc;
      continue;
    }
    for (std::size_t k = 1; k < order.size(); ++k) {
      auto& x = pts[order[k]];
      for (std::size_t i = 0; i < n; ++i) x[i] = pts[best][i] + p.shrink * (x[i] - pts[best][i]);
      x = project(std::move(x));
      val[order[k]] = eval(x);
    }
  }
  const auto top = static_cast<std::size_t>(std::max_element(val.begin(), val.end()) - val.begin());
  res.x = pts[top];
  res.value = val[top];
  return res;
}

}  // namespace dasc
