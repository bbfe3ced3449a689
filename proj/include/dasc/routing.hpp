#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "dasc/paths.hpp"
#include "dasc/rng.hpp"
#include "dasc/scouting.hpp"
#include "dasc/world.hpp"

namespace dasc {

/// A trip from a car's position to its task location.
struct MdpState {
  CellId source = kNoCell;
  CellId destination = kNoCell;
  auto operator<=>(const MdpState&) const = default;
};

struct RouteAction {
  Path cells;
  double raw_weight = 0.0;
  double probability = 0.0;

  std::size_t hops() const { return cells.empty() ? 0 : cells.size() - 1; }
};

struct MdpParams {
  std::size_t k_routes = 8;
  int exploration_cycles = 9;
  double epsilon = 0.1;
  double sigma_initial = 1.0;
  double sigma_min = 0.01;
  double sigma_max = 10.0;
};

/// Whole-run route-selection state: the global penalty differential, the
/// penalty sums of the current and previous cycle, and which actions have
/// been tried per state.
class MdpTable {
 public:
  explicit MdpTable(MdpParams p = {}) : params_(p), sigma_(p.sigma_initial) {}

  const MdpParams& params() const { return params_; }
  double sigma() const { return sigma_; }
  double penalty_sum() const { return current_sum_; }
  double previous_penalty_sum() const { return previous_sum_; }
  int cap_hits() const { return cap_hits_; }

  bool explored(const MdpState& s, const Path& action) const {
    auto it = explored_.find(s);
    return it != explored_.end() && it->second.count(action) != 0;
  }
  void mark_explored(const MdpState& s, const Path& action) { explored_[s].insert(action); }

  void record_penalty(double r) { current_sum_ += r; }

  /// Closes the cycle: sigma from this cycle's and last cycle's penalty sums.
  double close_cycle();

  void set_sigma(double s) { sigma_ = s; }

 private:
  MdpParams params_;
  double sigma_;
  double current_sum_ = 0.0;
  double previous_sum_ = 0.0;
  int cap_hits_ = 0;
  std::map<MdpState, std::set<Path>> explored_;
};

/// Penalty-differential update. Both sums zero leaves sigma unchanged; the
/// result is kept within [sigma_min, sigma_max] and `cap_hit` reports when
/// the ceiling was applied.
inline double update_sigma(double sigma_prev, double sum_now, double sum_prev, double sigma_min = 0.01,
                           double sigma_max = 10.0, bool* cap_hit = nullptr) {
  if (sum_now < 0.0 || sum_prev < 0.0) throw std::invalid_argument("update_sigma: penalty sums must be non-negative");
  if (cap_hit) *cap_hit = false;
  const double total = sum_now + sum_prev;
  double s = sigma_prev;
  if (total > 0.0) s = sigma_prev - (sum_now - sum_prev) / total;
  if (s > sigma_max) {
    s = sigma_max;
    if (cap_hit) *cap_hit = true;
  }
  return std::max(s, sigma_min);
}

inline double MdpTable::close_cycle() {
  bool hit = false;
  sigma_ = update_sigma(sigma_, current_sum_, previous_sum_, params_.sigma_min, params_.sigma_max, &hit);
  if (hit) ++cap_hits_;
  previous_sum_ = current_sum_;
  current_sum_ = 0.0;
  return sigma_;
}

/// Cells a trip of `minutes` covers at `minutes_per_cell`.
inline std::size_t hops_within(double minutes, double minutes_per_cell) {
  if (!(minutes > 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(minutes / minutes_per_cell + 1e-9));
}

/// Up to k shortest loopless routes for the state that fit in `max_hops`.
/// Empty when the destination cannot be reached.
template <class Passable>
std::vector<RouteAction> enumerate_actions(const Grid& grid, const MdpState& state, std::size_t max_hops,
                                           std::size_t k, const Passable& passable) {
  if (!grid.contains(state.source) || !grid.contains(state.destination))
    throw std::invalid_argument("enumerate_actions: state references a missing cell");
  std::vector<RouteAction> out;
  if (grid.blocked(state.destination)) return out;
  for (auto& p : k_shortest_paths(grid, state.source, state.destination, k, passable, max_hops))
    out.push_back(RouteAction{std::move(p), 0.0, 0.0});
  return out;
}

inline std::vector<RouteAction> enumerate_actions(const Grid& grid, const MdpState& state, std::size_t max_hops,
                                                  std::size_t k) {
  return enumerate_actions(grid, state, max_hops, k, PassableView{&grid, {}});
}

/// Route weights sigma * prod(X over the route's cells), normalised into a
/// distribution (uniform when every weight is zero). Fills raw_weight and
/// probability on each action and returns the probabilities.
inline std::vector<double> action_probabilities(std::span<RouteAction> actions, std::span<const double> access,
                                                double sigma) {
  std::vector<double> p(actions.size(), 0.0);
  if (actions.empty()) return p;
  double total = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    double w = sigma;
    for (CellId c : actions[i].cells) w *= access[static_cast<std::size_t>(c)];
    actions[i].raw_weight = w;
    p[i] = w;
    total += w;
  }
  if (!(total > 0.0)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(actions.size()));
  } else {
    for (auto& x : p) x /= total;
  }
  for (std::size_t i = 0; i < actions.size(); ++i) actions[i].probability = p[i];
  return p;
}

namespace detail {
inline std::size_t sample_index(std::span<const double> weights, std::span<const std::size_t> among, Rng& rng) {
  double total = 0.0;
  for (auto i : among) total += weights[i];
  if (!(total > 0.0)) return among[static_cast<std::size_t>(rng.below(among.size()))];
  double u = rng.uniform() * total;
  for (auto i : among) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  return among.back();
}
}  // namespace detail

/// Contextual epsilon-greedy choice among `actions` (probabilities already
/// filled). During the first exploration_cycles cycles an untried action is
/// sampled by probability; afterwards the most probable action is taken with
/// probability 1-epsilon, otherwise one is sampled. Returns an index; the
/// caller records the choice with mark_explored once the cycle closes.
inline std::size_t select_action(const MdpTable& table, const MdpState& state, std::span<const RouteAction> actions,
                                 int cycle, Rng& rng) {
  if (actions.empty()) throw std::invalid_argument("select_action: no actions");
  std::vector<double> p(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) p[i] = actions[i].probability;
  std::vector<std::size_t> all(actions.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  std::size_t chosen = 0;
  if (cycle <= table.params().exploration_cycles) {
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < actions.size(); ++i)
      if (!table.explored(state, actions[i].cells)) fresh.push_back(i);
    chosen = detail::sample_index(p, fresh.empty() ? all : fresh, rng);
  } else if (rng.uniform() < table.params().epsilon) {
    chosen = detail::sample_index(p, all, rng);
  } else {
    chosen = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }
  return chosen;
}

/// Per-cell damage knowledge gathered this cycle by event-exploration cars.
enum class Sighting : std::int8_t { none = -1, clear = 0, damaged = 1 };

/// Penalty of an executed route: each cell counts 1 if damage was seen on it
/// this cycle, 0 if it was seen clear (repaired), otherwise its prior known
/// state.
inline double observe_penalty(std::span<const CellId> route, std::span<const std::uint8_t> prior_known,
                              std::span<const Sighting> sighted) {
  double r = 0.0;
  for (CellId c : route) {
    const auto i = static_cast<std::size_t>(c);
    Sighting s = sighted.empty() ? Sighting::none : sighted[i];
    if (s == Sighting::damaged)
      r += 1.0;
    else if (s == Sighting::none && !prior_known.empty() && prior_known[i] != 0)
      r += 1.0;
  }
  return r;
}

}  // namespace dasc
