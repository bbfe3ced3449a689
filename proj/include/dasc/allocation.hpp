#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasc/world.hpp"

namespace dasc {

/// pi <- clamp(pi + eta * (successes - failures), 0, 1), with counts taken
/// per cycle rather than cumulatively.
inline double update_reputation(double pi, double eta, int successes, int failures) {
  if (successes < 0 || failures < 0) throw std::invalid_argument("update_reputation: counts must be non-negative");
  return std::clamp(pi + eta * static_cast<double>(successes - failures), 0.0, 1.0);
}

struct Reputation {
  double eta = 0.1;
  std::vector<double> pi;
  std::vector<int> successes;  // running totals, for reporting
  std::vector<int> failures;

  Reputation() = default;
  Reputation(std::size_t cars, double initial, double eta_) : eta(eta_), pi(cars, initial), successes(cars, 0), failures(cars, 0) {}

  void record(int car, int s, int f) {
    const auto i = static_cast<std::size_t>(car);
    pi[i] = update_reputation(pi[i], eta, s, f);
    successes[i] += s;
    failures[i] += f;
  }
};

/// How co-pickers' reputations turn into the utility denominator.
///  - literal: sum over co-pickers p of S*(pi_m - pi_p)^k, S = sgn for even
///    k and 1 for odd k, floored at epsilon.
///  - contention: 1 + sum over co-pickers of (1 - S*(pi_m - pi_p)^k), so
///    every co-picker adds congestion and a higher-reputation co-picker adds
///    more than a lower-reputation one.
enum class CongestionForm { contention, literal };

struct UtilityParams {
  double lambda1 = 0.82;  // proximity
  double lambda2 = 0.58;  // urgency
  double lambda3 = 0.49;  // uncertainty
  int k = 2;
  double epsilon = 0.01;
  double gamma_default = 1.0;
  CongestionForm congestion = CongestionForm::contention;
  bool literal_factors = false;  // raw distance/remaining-time terms instead of normalised ones
};

/// Weighted congestion rate for car `m` on a task picked by `picks` (m itself
/// is skipped if present). Always >= epsilon.
inline double congestion_rate(int m, std::span<const int> picks, std::span<const double> pi, const UtilityParams& p) {
  if (p.k < 1) throw std::invalid_argument("congestion_rate: k must be >= 1");
  const double pm = pi[static_cast<std::size_t>(m)];
  double sum = 0.0;
  int others = 0;
  for (int q : picks) {
    if (q == m) continue;
    ++others;
    const double d = pm - pi[static_cast<std::size_t>(q)];
    const double sign = (p.k % 2 == 0) ? static_cast<double>((d > 0.0) - (d < 0.0)) : 1.0;
    const double term = sign * std::pow(d, p.k);
    sum += p.congestion == CongestionForm::literal ? term : 1.0 - term;
  }
  if (others == 0) return std::max(p.gamma_default, p.epsilon);
  if (p.congestion == CongestionForm::contention) sum += p.gamma_default;
  return std::max(sum, p.epsilon);
}

struct UtilityFactors {
  double proximity = 0.0;
  double urgency = 0.0;
  double uncertainty = 0.0;
};

/// Normalised utility factors. `distance` is in cells (nullopt when the task
/// cannot be reached), `omega_max` the distance scale, times in minutes.
inline UtilityFactors utility_factors(std::optional<int> distance, double omega_max, double remaining_min,
                                      double cycle_length_min, double confidence, const UtilityParams& p) {
  UtilityFactors f;
  const double omega = distance ? static_cast<double>(*distance) : omega_max;
  if (p.literal_factors) {
    f.proximity = omega;
    f.urgency = remaining_min;
  } else {
    f.proximity = std::clamp(1.0 - omega / omega_max, 0.0, 1.0);
    f.urgency = std::clamp(1.0 - remaining_min / cycle_length_min, 0.0, 1.0);
  }
  f.uncertainty = std::clamp(1.0 - confidence, 0.0, 1.0);
  return f;
}

/// Reward-weighted priority before congestion: r * (l1*prox + l2*urg + l3*unc).
inline double priority_score(double reward, const UtilityFactors& f, const UtilityParams& p) {
  return reward * (p.lambda1 * f.proximity + p.lambda2 * f.urgency + p.lambda3 * f.uncertainty);
}

/// Event-priority utility. Zero when no time remains or the task cannot be
/// reached.
inline double utility(double reward, double remaining_min, const UtilityFactors& f, double gamma,
                      const UtilityParams& p, bool reachable = true) {
  if (!(reward > 0.0)) throw std::invalid_argument("utility: reward must be positive");
  if (!(remaining_min > 0.0) || !reachable) return 0.0;
  return std::max(priority_score(reward, f, p), 0.0) / gamma;
}

struct Task {
  int id = 0;
  CellId cell = kNoCell;
  double reward = 1.0;
  double deadline_min = 0.0;
  double remaining_min = 0.0;  // rho = max(deadline - elapsed, 0)
  double confidence = 0.0;     // EC of the underlying estimate
  std::vector<int> picks;      // U: cars currently selecting this task
};

struct TaskBoard {
  std::vector<Task> tasks;
  double elapsed_min = 0.0;

  void advance_to(double elapsed) {
    elapsed_min = elapsed;
    for (auto& t : tasks) t.remaining_min = std::max(t.deadline_min - elapsed_min, 0.0);
  }

  Task* find(int id) {
    for (auto& t : tasks)
      if (t.id == id) return &t;
    return nullptr;
  }

  void add_pick(int task_index, int car) {
    auto& picks = tasks[static_cast<std::size_t>(task_index)].picks;
    if (std::find(picks.begin(), picks.end(), car) == picks.end()) picks.push_back(car);
  }
};

/// Input to best-response allocation. Players are indices into `reputation`.
/// `base[m][n]` is car m's pre-congestion priority for task n (zero marks a
/// task the car cannot usefully take). `fixed_picks[n]` lists committed cars
/// that count toward congestion but do not move.
struct AllocationProblem {
  std::vector<double> reputation;
  std::vector<std::vector<double>> base;
  std::vector<std::vector<int>> fixed_picks;
  std::vector<int> movers;  // round-robin order
  UtilityParams params;
  int max_passes_per_mover = 100;
};

struct AllocationResult {
  std::vector<int> pick;  // per player; -1 = no task
  std::vector<double> pick_utility;
  std::vector<double> best_deviation_utility;  // best alternative holding others fixed
  std::vector<std::vector<int>> task_picks;    // U per task, fixed cars included
  bool certified = false;
  int passes = 0;
  int phase1_assigned = 0;
};

namespace detail {

inline bool strictly_better(double a, double b) { return a > b + 1e-12 * std::max(std::abs(a), std::abs(b)); }

class AllocationState {
 public:
  explicit AllocationState(const AllocationProblem& pr) : pr_(pr) {
    const auto players = pr.reputation.size();
    pick_.assign(players, -1);
    picks_ = pr.fixed_picks;
    picks_.resize(tasks());
  }

  std::size_t tasks() const { return pr_.base.empty() ? pr_.fixed_picks.size() : pr_.base.front().size(); }

  double utility_of(int m, std::size_t n) const {
    const double b = pr_.base[static_cast<std::size_t>(m)][n];
    if (!(b > 0.0)) return 0.0;
    return b / congestion_rate(m, picks_[n], pr_.reputation, pr_.params);
  }

  double current(int m) const {
    int p = pick_[static_cast<std::size_t>(m)];
    return p < 0 ? 0.0 : utility_of(m, static_cast<std::size_t>(p));
  }

  /// Best task for m and its utility; -1 when every task is worth zero.
  std::pair<int, double> best(int m, int exclude = -1) const {
    int arg = -1;
    double val = 0.0;
    for (std::size_t n = 0; n < tasks(); ++n) {
      if (static_cast<int>(n) == exclude) continue;
      double u = utility_of(m, n);
      if (u > 0.0 && (arg < 0 || strictly_better(u, val))) {
        arg = static_cast<int>(n);
        val = u;
      }
    }
    return {arg, val};
  }

  void assign(int m, int n) {
    int& cur = pick_[static_cast<std::size_t>(m)];
    if (cur >= 0) {
      auto& v = picks_[static_cast<std::size_t>(cur)];
      v.erase(std::remove(v.begin(), v.end(), m), v.end());
    }
    cur = n;
    if (n >= 0) picks_[static_cast<std::size_t>(n)].push_back(m);
  }

  bool unpicked(std::size_t n) const { return picks_[n].empty(); }
  int pick(int m) const { return pick_[static_cast<std::size_t>(m)]; }
  const std::vector<std::vector<int>>& picks() const { return picks_; }

 private:
  const AllocationProblem& pr_;
  std::vector<int> pick_;
  std::vector<std::vector<int>> picks_;
};

}  // namespace detail

/// Two-phase best-response dynamics.
/// Phase 1: each mover in order takes its best task among those nobody has
/// picked yet, so every task is covered while cars remain.
/// Phase 2: movers repeatedly switch to a strictly better task, holding the
/// others fixed, until a full pass makes no switch (a pure Nash equilibrium)
/// or the pass cap is reached (result not certified).
inline AllocationResult best_response_allocate(const AllocationProblem& pr) {
  const std::size_t players = pr.reputation.size();
  for (const auto& row : pr.base)
    if (!pr.base.empty() && row.size() != pr.base.front().size())
      throw std::invalid_argument("best_response_allocate: ragged utility table");
  if (pr.base.size() != players) throw std::invalid_argument("best_response_allocate: one base row per player");

  detail::AllocationState st(pr);
  AllocationResult res;

  for (int m : pr.movers) {
    int arg = -1;
    double val = 0.0;
    for (std::size_t n = 0; n < st.tasks(); ++n) {
      if (!st.unpicked(n)) continue;
      double u = st.utility_of(m, n);
      if (u > 0.0 && (arg < 0 || detail::strictly_better(u, val))) {
        arg = static_cast<int>(n);
        val = u;
      }
    }
    if (arg >= 0) {
      st.assign(m, arg);
      ++res.phase1_assigned;
    }
  }

  const int cap = std::max(1, pr.max_passes_per_mover * static_cast<int>(pr.movers.size()));
  bool stable = pr.movers.empty();
  while (!stable && res.passes < cap) {
    ++res.passes;
    stable = true;
    for (int m : pr.movers) {
      auto [arg, val] = st.best(m);
      if (arg >= 0 && arg != st.pick(m) && detail::strictly_better(val, st.current(m))) {
        st.assign(m, arg);
        stable = false;
      }
    }
  }

  res.pick.assign(players, -1);
  res.pick_utility.assign(players, 0.0);
  res.best_deviation_utility.assign(players, 0.0);
  res.certified = stable;
  for (int m : pr.movers) {
    const auto i = static_cast<std::size_t>(m);
    res.pick[i] = st.pick(m);
    res.pick_utility[i] = st.current(m);
    // A deviation is evaluated against the others' picks with m removed.
    int own = st.pick(m);
    st.assign(m, -1);
    res.best_deviation_utility[i] = st.best(m, own).second;
    st.assign(m, own);
    if (detail::strictly_better(res.best_deviation_utility[i], res.pick_utility[i])) res.certified = false;
  }
  res.task_picks = st.picks();
  return res;
}

enum class Outcome { completed, missed_deadline, dropped };

struct OutcomeEffect {
  bool churn = false;  // a drop the incentive controller must count
};

/// Records a task outcome for `car`: success or failure on its reputation,
/// and removal from the pick-list on a drop. Throws when the car is not
/// currently on the task's pick-list.
inline OutcomeEffect mark_outcome(TaskBoard& board, Reputation& rep, int car, int task_id, Outcome outcome) {
  Task* t = board.find(task_id);
  if (!t) throw std::invalid_argument("mark_outcome: unknown task " + std::to_string(task_id));
  auto it = std::find(t->picks.begin(), t->picks.end(), car);
  if (it == t->picks.end())
    throw std::invalid_argument("mark_outcome: car " + std::to_string(car) + " is not assigned to task " +
                                std::to_string(task_id));
  OutcomeEffect fx;
  switch (outcome) {
    case Outcome::completed:
      rep.record(car, 1, 0);
      break;
    case Outcome::missed_deadline:
      rep.record(car, 0, 1);
      break;
    case Outcome::dropped:
      rep.record(car, 0, 1);
      t->picks.erase(it);
      fx.churn = true;
      break;
  }
  return fx;
}

}  // namespace dasc
