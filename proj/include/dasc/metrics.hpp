#pragma once

#include <vector>

namespace dasc {

/// A ratio that may be undefined (zero denominator); undefined reads as 0.
struct Ratio {
  double value = 0.0;
  bool defined = false;
};

inline Ratio ratio(double num, double den) {
  if (den == 0.0) return {0.0, false};
  return {num / den, true};
}

struct Confusion {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  void add(bool estimate, bool truth) {
    if (estimate && truth) ++tp;
    else if (estimate) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  /// An event without a final estimate is scored as the wrong answer.
  void add_unresolved(bool truth) { add(!truth, truth); }

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }

  long total() const { return tp + fp + tn + fn; }
  Ratio accuracy() const { return ratio(static_cast<double>(tp + tn), static_cast<double>(total())); }
  Ratio precision() const { return ratio(static_cast<double>(tp), static_cast<double>(tp + fp)); }
  Ratio recall() const { return ratio(static_cast<double>(tp), static_cast<double>(tp + fn)); }
  Ratio f1() const {
    Ratio p = precision();
    Ratio r = recall();
    if (!p.defined || !r.defined) return {0.0, false};
    return ratio(2.0 * p.value * r.value, p.value + r.value);
  }
};

struct DeadlineTally {
  long accepted = 0;
  long hits = 0;
  long misses = 0;

  DeadlineTally& operator+=(const DeadlineTally& o) {
    accepted += o.accepted;
    hits += o.hits;
    misses += o.misses;
    return *this;
  }
  Ratio hit_rate() const { return ratio(static_cast<double>(hits), static_cast<double>(accepted)); }
};

enum class TaskStatus { open, verified, deadline_missed, unresolved_at_horizon };

struct CycleMetrics {
  int cycle = 0;
  Confusion confusion;
  DeadlineTally deadlines;
  int events = 0;
  int concluded = 0;
  int tasks = 0;
  int verified = 0;
  int drops = 0;
  int reallocations = 0;
  double kappa = 0.0;
  double sigma = 0.0;
  double mean_reputation = 0.0;
  double mean_accessibility = 0.0;
};

struct Metrics {
  Confusion confusion;
  DeadlineTally deadlines;
  std::vector<CycleMetrics> cycles;
  int sigma_cap_hits = 0;
  int uncertified_allocations = 0;
};

/// A scored event outcome: whether a final estimate exists, and its value.
struct ScoredEvent {
  bool truth = false;
  bool resolved = false;
  bool estimate = false;
};

/// Confusion counts over every event, unresolved ones counted as errors.
inline Confusion score_events(const std::vector<ScoredEvent>& events) {
  Confusion c;
  for (const auto& e : events) {
    if (e.resolved) c.add(e.estimate, e.truth);
    else c.add_unresolved(e.truth);
  }
  return c;
}

}  // namespace dasc
