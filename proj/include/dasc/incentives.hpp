#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

namespace dasc {

/// Sum of the reputations of every car picking a task; 0 for no picks.
inline double aggregate_reputation(std::span<const int> picks, std::span<const double> pi) {
  double e = 0.0;
  for (int p : picks) {
    if (p < 0 || static_cast<std::size_t>(p) >= pi.size()) throw std::out_of_range("aggregate_reputation: bad car id");
    e += pi[static_cast<std::size_t>(p)];
  }
  return e;
}

struct PidParams {
  double kp = 0.11;
  double ki = 0.67;
  double kd = 0.38;
  double set_point = 1.0;        // e'
  double initial_reward = 1.0;   // r0
  double windup_factor = 10.0;   // integral bound = windup_factor * e'
  double floor_fraction = 0.1;   // r_min = floor_fraction * r0

  double windup_bound() const { return windup_factor * std::abs(set_point); }
  double min_reward() const { return floor_fraction * initial_reward; }

  void validate() const {
    if (kp < 0.0 || ki < 0.0 || kd < 0.0) throw std::invalid_argument("PID gains must be non-negative");
    if (!(initial_reward > 0.0)) throw std::invalid_argument("initial reward must be positive");
    if (!(floor_fraction > 0.0)) throw std::invalid_argument("reward floor must be positive");
  }
};

struct PidState {
  double integral = 0.0;
  double previous_error = 0.0;
  int steps = 0;
};

struct PidOutput {
  double aggregate = 0.0;
  double error = 0.0;
  double adjustment = 0.0;  // q
  double reward = 0.0;
};

/// One controller step on a task's aggregate reputation `e`. The first step
/// differences against a zero previous error.
inline PidOutput pid_step(PidState& s, const PidParams& p, double e, double dt = 1.0) {
  if (!(dt > 0.0)) throw std::invalid_argument("pid_step: dt must be positive");
  PidOutput out;
  out.aggregate = e;
  out.error = p.set_point - e;
  const double bound = p.windup_bound();
  s.integral = std::clamp(s.integral + out.error * dt, -bound, bound);
  out.adjustment = p.kp * out.error + p.ki * s.integral + p.kd * (out.error - s.previous_error) / dt;
  s.previous_error = out.error;
  ++s.steps;
  out.reward = std::max(p.initial_reward + out.adjustment, p.min_reward());
  return out;
}

/// Counts task drops within a cycle against the churn threshold psi, a
/// fraction of the active tasks.
class ChurnMonitor {
 public:
  explicit ChurnMonitor(double psi = 0.62) : psi_(psi) {
    if (psi < 0.0) throw std::invalid_argument("churn threshold must be non-negative");
  }

  void start_cycle(int active_tasks) {
    active_ = active_tasks;
    drops_ = 0;
    fired_ = 0;
  }
  void set_active(int active_tasks) { active_ = active_tasks; }

  double psi() const { return psi_; }
  int drops() const { return drops_; }
  int active() const { return active_; }
  int firings() const { return fired_; }

  /// Records one drop; true when the drop fraction now strictly exceeds psi,
  /// in which case the count restarts.
  bool record_drop() {
    ++drops_;
    if (active_ > 0 && static_cast<double>(drops_) / static_cast<double>(active_) > psi_) {
      drops_ = 0;
      ++fired_;
      return true;
    }
    return false;
  }

 private:
  double psi_;
  int active_ = 0;
  int drops_ = 0;
  int fired_ = 0;
};

inline bool churn_trigger(ChurnMonitor& monitor) { return monitor.record_drop(); }

}  // namespace dasc
