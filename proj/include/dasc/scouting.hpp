#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "dasc/rng.hpp"
#include "dasc/world.hpp"

namespace dasc {

namespace detail {
/// Clamp to [0,1], snapping values within 1e-12 of a bound onto it so that
/// repeated +-kappa steps land exactly on 0 or 1.
inline double clamp_unit(double x) {
  constexpr double snap = 1e-12;
  if (x <= snap) return 0.0;
  if (x >= 1.0 - snap) return 1.0;
  return x;
}
}  // namespace detail

struct DamageObservation {
  int cycle = 0;
  CellId cell = kNoCell;
  std::uint8_t damage = 0;
  int observer = -1;
};

/// Per-cell accessibility index X in [0,1].
class AccessibilityMap {
 public:
  AccessibilityMap() = default;
  AccessibilityMap(std::size_t cells, double initial) : initial_(initial), x_(cells, detail::clamp_unit(initial)) {}

  double operator[](CellId c) const { return x_[static_cast<std::size_t>(c)]; }
  std::span<const double> values() const { return x_; }
  double initial() const { return initial_; }
  std::size_t size() const { return x_.size(); }

  /// One visit: X -= kappa when damage was observed, X += kappa otherwise.
  void visit(CellId c, bool damaged, double kappa, int cycle) {
    auto& x = x_[static_cast<std::size_t>(c)];
    x = detail::clamp_unit(damaged ? x - kappa : x + kappa);
    visits_.push_back({cycle, c, static_cast<std::uint8_t>(damaged ? 1 : 0), -1});
  }

  const std::vector<DamageObservation>& visit_log() const { return visits_; }
  void clear_log() { visits_.clear(); }

 private:
  double initial_ = 0.5;
  std::vector<double> x_;
  std::vector<DamageObservation> visits_;
};

struct KappaParams {
  int window = 6;
  double floor = 0.05;
  double fallback = 0.65;
};

/// Sliding window of (damages detected, events reported) per cycle.
struct KappaWindow {
  KappaParams params;
  std::deque<std::pair<double, double>> entries;
  double kappa = params.fallback;

  explicit KappaWindow(KappaParams p = {}) : params(p), kappa(p.fallback) {}
};

/// Pearson correlation of the window; nullopt when it is undefined.
inline std::optional<double> window_correlation(const std::deque<std::pair<double, double>>& w) {
  if (w.size() < 2) return std::nullopt;
  const double n = static_cast<double>(w.size());
  double md = 0.0, mn = 0.0;
  for (auto [d, e] : w) {
    md += d;
    mn += e;
  }
  md /= n;
  mn /= n;
  double cov = 0.0, vd = 0.0, vn = 0.0;
  for (auto [d, e] : w) {
    cov += (d - md) * (e - mn);
    vd += (d - md) * (d - md);
    vn += (e - mn) * (e - mn);
  }
  const double denom = std::sqrt(vd * vn);
  if (!(denom > 1e-12)) return std::nullopt;
  return std::clamp(cov / denom, -1.0, 1.0);
}

/// Pushes this cycle's totals and recomputes kappa: the window correlation
/// clamped to [floor, 1], or the fallback when the correlation is undefined.
inline double update_kappa(KappaWindow& kw, double damages_detected, double events_reported) {
  kw.entries.emplace_back(damages_detected, events_reported);
  while (static_cast<int>(kw.entries.size()) > std::max(kw.params.window, 1)) kw.entries.pop_front();
  auto r = window_correlation(kw.entries);
  kw.kappa = r ? std::clamp(*r, kw.params.floor, 1.0) : kw.params.fallback;
  return kw.kappa;
}

/// floor(Q% of the willing cars), chosen by a seeded shuffle.
inline std::vector<int> select_scouts(std::span<const int> willing, double q_percent, Rng& rng) {
  if (!(q_percent >= 0.0 && q_percent <= 100.0)) throw std::invalid_argument("select_scouts: Q must be in [0,100]");
  const auto count = static_cast<std::size_t>(std::floor(q_percent * static_cast<double>(willing.size()) / 100.0 + 1e-9));
  std::vector<int> pool(willing.begin(), willing.end());
  rng.shuffle(std::span<int>(pool));
  pool.resize(std::min(count, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

using Edge = std::pair<CellId, CellId>;

inline Edge make_edge(CellId a, CellId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

struct ScoutStart {
  int car = -1;
  CellId position = kNoCell;
};

struct ScoutPlan {
  std::vector<int> scouts;
  std::vector<std::vector<CellId>> routes;  // per scout, starting at its position
  std::size_t edges_covered = 0;
};

struct CoverageParams {
  double covered_penalty = 4.0;  // extra A* cost for an edge another scout already covers
};

namespace detail {

/// A* from `from` to `to` where `used` edges are forbidden and `covered`
/// edges cost extra. Returns the cell path or empty when unreachable.
template <class Passable>
std::vector<CellId> coverage_astar(const Grid& grid, CellId from, CellId to, const std::set<Edge>& used,
                                   const std::set<Edge>& covered, const Passable& passable, double penalty) {
  const bool manhattan = !grid.has_long_edges();
  auto h = [&](CellId c) {
    if (!manhattan) return 0.0;
    return static_cast<double>(std::abs(grid.x_of(c) - grid.x_of(to)) + std::abs(grid.y_of(c) - grid.y_of(to)));
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(grid.size(), inf);
  std::vector<CellId> parent(grid.size(), kNoCell);
  using Item = std::pair<double, CellId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  g[static_cast<std::size_t>(from)] = 0.0;
  open.emplace(h(from), from);
  while (!open.empty()) {
    auto [f, c] = open.top();
    open.pop();
    if (c == to) break;
    if (f > g[static_cast<std::size_t>(c)] + h(c) + 1e-12) continue;
    for (CellId n : grid.neighbors(c)) {
      if (!passable(n)) continue;
      Edge e = make_edge(c, n);
      if (used.count(e)) continue;
      double cost = 1.0 + (covered.count(e) ? penalty : 0.0);
      double cand = g[static_cast<std::size_t>(c)] + cost;
      if (cand + 1e-12 < g[static_cast<std::size_t>(n)]) {
        g[static_cast<std::size_t>(n)] = cand;
        parent[static_cast<std::size_t>(n)] = c;
        open.emplace(cand + h(n), n);
      }
    }
  }
  if (g[static_cast<std::size_t>(to)] == inf) return {};
  std::vector<CellId> path;
  for (CellId c = to; c != kNoCell; c = parent[static_cast<std::size_t>(c)]) {
    path.push_back(c);
    if (c == from) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

/// BFS over cells reachable from `from` through edges not in `used`.
template <class Passable>
std::vector<int> trail_distances(const Grid& grid, CellId from, const std::set<Edge>& used, const Passable& passable) {
  std::vector<int> dist(grid.size(), kUnreachable);
  std::deque<CellId> q{from};
  dist[static_cast<std::size_t>(from)] = 0;
  while (!q.empty()) {
    CellId c = q.front();
    q.pop_front();
    for (CellId n : grid.neighbors(c)) {
      if (dist[static_cast<std::size_t>(n)] != kUnreachable || !passable(n) || used.count(make_edge(c, n))) continue;
      dist[static_cast<std::size_t>(n)] = dist[static_cast<std::size_t>(c)] + 1;
      q.push_back(n);
    }
  }
  return dist;
}

/// Extends `route` (ending at its last cell) toward successive farthest
/// cells until it holds `budget` cells or no unused edge remains. Edges in
/// `used` are never repeated; `covered` edges are deprioritised.
template <class Passable>
void extend_coverage_route(const Grid& grid, std::vector<CellId>& route, std::size_t budget, std::set<Edge>& used,
                           std::set<Edge>& covered, const Passable& passable, const CoverageParams& params) {
  while (route.size() < budget) {
    const CellId here = route.back();
    // Head for the farthest cell still reachable over unused edges.
    auto dist = trail_distances(grid, here, used, passable);
    CellId far = kNoCell;
    int best = 0;
    for (std::size_t i = 0; i < dist.size(); ++i)
      if (dist[i] > best) {
        best = dist[i];
        far = static_cast<CellId>(i);
      }
    if (far == kNoCell) return;
    auto leg = coverage_astar(grid, here, far, used, covered, passable, params.covered_penalty);
    if (leg.size() < 2) return;
    for (std::size_t i = 1; i < leg.size() && route.size() < budget; ++i) {
      Edge e = make_edge(leg[i - 1], leg[i]);
      used.insert(e);
      covered.insert(e);
      route.push_back(leg[i]);
    }
  }
}

}  // namespace detail

/// Plans one edge-simple coverage walk per scout. Each walk heads for the
/// farthest cell reachable over its own unused edges, preferring edges no
/// other scout has covered yet, and repeats until the per-scout cell budget
/// is spent. Scouts never leave the component they start in.
inline ScoutPlan plan_coverage(const Grid& grid, std::span<const ScoutStart> scouts, std::size_t per_scout_budget,
                               std::span<const std::uint8_t> known_damage = {}, CoverageParams params = {}) {
  if (per_scout_budget < 1) throw std::invalid_argument("plan_coverage: budget must be at least 1");
  ScoutPlan plan;
  PassableView passable{&grid, known_damage};
  std::set<Edge> covered;
  for (const auto& s : scouts) {
    if (!grid.traversable_cell(s.position)) throw std::invalid_argument("plan_coverage: scout outside open cells");
    std::vector<CellId> route{s.position};
    std::set<Edge> used;
    detail::extend_coverage_route(grid, route, per_scout_budget, used, covered, passable, params);
    plan.scouts.push_back(s.car);
    plan.routes.push_back(std::move(route));
  }
  plan.edges_covered = covered.size();
  return plan;
}

/// Edge count of the union of the plan's routes.
inline std::size_t distinct_edges(const std::vector<std::vector<CellId>>& routes) {
  std::set<Edge> e;
  for (const auto& r : routes)
    for (std::size_t i = 1; i < r.size(); ++i) e.insert(make_edge(r[i - 1], r[i]));
  return e.size();
}

/// Walks one scout along its planned route against ground truth. Before each
/// move it observes every cell within `radius` hops; a damaged next cell
/// makes it replan from where it stands with the remaining budget.
class ScoutWalker {
 public:
  ScoutWalker(int car, std::vector<CellId> route, std::size_t budget, int radius = 1)
      : car_(car), route_(std::move(route)), budget_(budget), radius_(radius) {
    if (!route_.empty()) walked_.push_back(route_.front());
    for (std::size_t i = 1; i < route_.size(); ++i) used_.insert(make_edge(route_[i - 1], route_[i]));
  }

  bool done() const { return finished_ || route_.empty(); }
  CellId position() const { return walked_.empty() ? kNoCell : walked_.back(); }
  const std::vector<CellId>& walked() const { return walked_; }
  int car() const { return car_; }

  /// Observes the surroundings and advances at most one cell. Observations
  /// are appended to `out` and written into `known` (1 damaged, 0 clear).
  void step(const Grid& truth, std::vector<std::uint8_t>& known, std::set<Edge>& covered, int cycle,
            std::vector<DamageObservation>& out) {
    if (done()) return;
    observe(truth, known, cycle, out);
    if (walked_.size() >= budget_) {
      finished_ = true;
      return;
    }
    if (next_ >= route_.size()) next_ = route_.size();
    if (next_ < route_.size() && truth.damaged(route_[next_])) replan(truth, known, covered);
    if (next_ >= route_.size()) {
      finished_ = true;
      return;
    }
    walked_.push_back(route_[next_]);
    ++next_;
    if (walked_.size() >= budget_ || next_ >= route_.size()) {
      observe(truth, known, cycle, out);
      finished_ = true;
    }
  }

 private:
  void observe(const Grid& truth, std::vector<std::uint8_t>& known, int cycle, std::vector<DamageObservation>& out) {
    const CellId here = position();
    std::vector<CellId> frontier{here};
    std::set<CellId> seen{here};
    for (int r = 0; r <= radius_; ++r) {
      std::vector<CellId> next;
      for (CellId c : frontier) {
        std::uint8_t d = truth.damaged(c) ? 1 : 0;
        known[static_cast<std::size_t>(c)] = d;
        out.push_back({cycle, c, d, car_});
        if (r == radius_) continue;
        for (CellId n : truth.neighbors(c))
          if (seen.insert(n).second) next.push_back(n);
      }
      frontier = std::move(next);
    }
  }

  void replan(const Grid& truth, const std::vector<std::uint8_t>& known, std::set<Edge>& covered) {
    std::vector<CellId> route{position()};
    PassableView passable{&truth, known};
    // Edges planned but not walked become available again.
    used_.clear();
    for (std::size_t i = 1; i < walked_.size(); ++i) used_.insert(make_edge(walked_[i - 1], walked_[i]));
    const std::size_t remaining = budget_ - walked_.size() + 1;
    detail::extend_coverage_route(truth, route, remaining, used_, covered, passable, CoverageParams{});
    route_ = std::move(route);
    next_ = 1;
  }

  int car_;
  std::vector<CellId> route_;
  std::size_t budget_;
  int radius_;
  std::size_t next_ = 1;
  bool finished_ = false;
  std::vector<CellId> walked_;
  std::set<Edge> used_;
};

/// Applies one cycle of observations: every observed cell moves by +-kappa
/// once, using its last observed state. Unobserved cells keep their index.
inline void apply_observations(AccessibilityMap& access, std::span<const DamageObservation> observations, double kappa,
                               int cycle) {
  std::vector<std::pair<CellId, std::uint8_t>> last;
  {
    std::vector<int> slot(access.size(), -1);
    for (const auto& o : observations) {
      auto& s = slot[static_cast<std::size_t>(o.cell)];
      if (s < 0) {
        s = static_cast<int>(last.size());
        last.emplace_back(o.cell, o.damage);
      } else {
        last[static_cast<std::size_t>(s)].second = o.damage;
      }
    }
  }
  std::sort(last.begin(), last.end());
  for (auto [cell, d] : last) access.visit(cell, d != 0, kappa, cycle);
}

/// Runs every scout of `plan` to completion against the ground truth and
/// updates the accessibility map with the cells they observed.
inline AccessibilityMap observe_and_update(const ScoutPlan& plan, const Grid& grid, AccessibilityMap access,
                                           const KappaWindow& kw, int cycle, std::size_t per_scout_budget,
                                           std::vector<DamageObservation>* log = nullptr, int radius = 1) {
  std::vector<std::uint8_t> known(grid.size(), 0);
  std::set<Edge> covered;
  std::vector<DamageObservation> obs;
  std::vector<ScoutWalker> walkers;
  for (std::size_t i = 0; i < plan.routes.size(); ++i)
    walkers.emplace_back(plan.scouts[i], plan.routes[i], per_scout_budget, radius);
  bool active = true;
  while (active) {
    active = false;
    for (auto& w : walkers) {
      if (w.done()) continue;
      w.step(grid, known, covered, cycle, obs);
      active = true;
    }
  }
  apply_observations(access, obs, kw.kappa, cycle);
  if (log) log->insert(log->end(), obs.begin(), obs.end());
  return access;
}

}  // namespace dasc
