#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasc/world.hpp"

namespace dasc {

struct SocialReport {
  std::string source_id;
  CellId cell = kNoCell;
  std::uint8_t state = 0;  // claimed E
  double timestamp_min = 0.0;
  double deadline_min = 0.0;
};

struct Claim {
  std::string source_id;
  std::uint8_t state = 0;
};

/// All claims about one cell in one response cycle.
struct ClaimGroup {
  int cycle = 0;
  CellId cell = kNoCell;
  std::vector<Claim> claims;  // one per source, in source-id order
  double deadline_min = 0.0;  // tightest deadline hint among the reports

  int support() const {
    return static_cast<int>(std::count_if(claims.begin(), claims.end(), [](const Claim& c) { return c.state == 1; }));
  }
  int oppose() const { return static_cast<int>(claims.size()) - support(); }
};

struct IngestResult {
  std::vector<ClaimGroup> groups;  // ordered by cell
  std::vector<std::string> diagnostics;
};

/// Groups one cycle's reports by cell. Reports at invalid cells or outside
/// the cycle window are dropped with a diagnostic. When a source reports the
/// same cell twice, its latest report wins.
inline IngestResult ingest_cycle(std::span<const SocialReport> reports, int cycle, double cycle_length_min,
                                 const Grid& grid) {
  IngestResult out;
  const double start = (cycle - 1) * cycle_length_min;
  const double end = cycle * cycle_length_min;
  struct Latest {
    double ts;
    std::uint8_t state;
  };
  std::map<CellId, std::map<std::string, Latest>> by_cell;
  std::map<CellId, double> deadline;
  for (const auto& r : reports) {
    if (!grid.traversable_cell(r.cell)) {
      out.diagnostics.push_back("report from '" + r.source_id + "' rejected: cell " + std::to_string(r.cell) +
                                " is blocked or outside the grid");
      continue;
    }
    if (r.timestamp_min < start || r.timestamp_min >= end || r.timestamp_min < 0.0) {
      out.diagnostics.push_back("report from '" + r.source_id + "' rejected: timestamp " +
                                std::to_string(r.timestamp_min) + " outside cycle " + std::to_string(cycle));
      continue;
    }
    if (r.state > 1) {
      out.diagnostics.push_back("report from '" + r.source_id + "' rejected: state must be 0 or 1");
      continue;
    }
    auto& slot = by_cell[r.cell];
    auto it = slot.find(r.source_id);
    if (it == slot.end() || r.timestamp_min >= it->second.ts) slot[r.source_id] = {r.timestamp_min, r.state};
    auto [dit, fresh] = deadline.emplace(r.cell, r.deadline_min);
    if (!fresh) dit->second = std::min(dit->second, r.deadline_min);
  }
  for (auto& [cell, sources] : by_cell) {
    ClaimGroup g;
    g.cycle = cycle;
    g.cell = cell;
    g.deadline_min = deadline[cell];
    for (auto& [src, latest] : sources) g.claims.push_back({src, latest.state});
    out.groups.push_back(std::move(g));
  }
  return out;
}

struct EventId {
  int cycle = 0;
  int index = 0;
  auto operator<=>(const EventId&) const = default;
};

struct EventEstimate {
  EventId id;
  CellId cell = kNoCell;
  double veracity = 0.5;    // Lambda in (0,1]
  double confidence = 0.0;  // EC in [0,1]
  double deadline_min = 0.0;
  double window_start_min = 0.0;  // offset of this (sub-)event within the original deadline window
  int part = 0;
  int parts = 1;
  bool needs_dispatch = false;

  bool estimate_exists() const { return veracity > 0.5; }
};

inline constexpr double kVeracityFloor = 1e-9;

/// Distance of veracity from the neutral midpoint, scaled and clamped to [0,1].
inline double estimation_confidence(double veracity, double scale = 2.0) {
  return std::clamp(scale * std::abs(veracity - 0.5), 0.0, 1.0);
}

/// Pluggable truth-discovery interface. Implementations may carry source
/// state across cycles, so cycles must be estimated in order.
class TruthEstimator {
 public:
  virtual ~TruthEstimator() = default;
  virtual std::vector<EventEstimate> estimate(std::span<const ClaimGroup> groups) = 0;
  virtual double weight(const std::string& source) const = 0;
  virtual int last_iterations() const = 0;
};

struct VotingParams {
  double initial_weight = 0.5;  // reliability assumed for unseen sources
  double prior_strength = 1.0;  // pseudo-claims backing the initial weight
  double prior_mass = 1.0;      // neutral pseudo-mass added to every group's vote
  double min_weight = 1e-3;
  double tolerance = 1e-6;
  int max_iterations = 100;
  double confidence_scale = 2.0;
};

/// Iterative reliability-weighted voting. Veracity is the supporting share
/// of reliability mass (smoothed by a neutral prior mass); each source's
/// weight is its running agreement with the current veracities, and the two
/// are alternated to a fixed point.
class WeightedVotingEstimator final : public TruthEstimator {
 public:
  explicit WeightedVotingEstimator(VotingParams params = {}) : p_(params) {}

  std::vector<EventEstimate> estimate(std::span<const ClaimGroup> groups) override {
    std::map<std::string, double> w;
    for (const auto& g : groups)
      for (const auto& c : g.claims) w.emplace(c.source_id, weight(c.source_id));

    std::vector<double> veracity(groups.size(), 0.5);
    std::map<std::string, std::pair<double, int>> batch;  // agreement mass, claim count
    iterations_ = 0;
    for (int iter = 0; iter < p_.max_iterations; ++iter) {
      ++iterations_;
      for (std::size_t i = 0; i < groups.size(); ++i) veracity[i] = vote(groups[i], w);
      batch.clear();
      for (std::size_t i = 0; i < groups.size(); ++i) {
        for (const auto& c : groups[i].claims) {
          auto& b = batch[c.source_id];
          b.first += c.state == 1 ? veracity[i] : 1.0 - veracity[i];
          b.second += 1;
        }
      }
      double max_change = 0.0;
      for (auto& [src, wt] : w) {
        const auto& b = batch[src];
        double next = updated_weight(src, b.first, b.second);
        max_change = std::max(max_change, std::abs(next - wt));
        wt = next;
      }
      if (max_change < p_.tolerance) break;
    }
    for (std::size_t i = 0; i < groups.size(); ++i) veracity[i] = vote(groups[i], w);

    for (const auto& [src, b] : batch) {
      auto& h = history_[src];
      h.agreement += b.first;
      h.claims += b.second;
    }

    std::vector<EventEstimate> out;
    out.reserve(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
      EventEstimate e;
      e.id = {groups[i].cycle, static_cast<int>(i)};
      e.cell = groups[i].cell;
      e.veracity = std::clamp(veracity[i], kVeracityFloor, 1.0);
      e.confidence = estimation_confidence(e.veracity, p_.confidence_scale);
      e.deadline_min = groups[i].deadline_min;
      out.push_back(e);
    }
    return out;
  }

  double weight(const std::string& source) const override {
    auto it = history_.find(source);
    if (it == history_.end()) return p_.initial_weight;
    return updated_weight(source, 0.0, 0);
  }

  int last_iterations() const override { return iterations_; }
  const VotingParams& params() const { return p_; }

 private:
  struct History {
    double agreement = 0.0;
    int claims = 0;
  };

  double vote(const ClaimGroup& g, const std::map<std::string, double>& w) const {
    double support = 0.0;
    double total = 0.0;
    for (const auto& c : g.claims) {
      double wt = w.at(c.source_id);
      total += wt;
      if (c.state == 1) support += wt;
    }
    total += p_.prior_mass;
    support += 0.5 * p_.prior_mass;
    if (!(total > 0.0)) return 0.5;
    return support / total;
  }

  double updated_weight(const std::string& src, double extra_agreement, int extra_claims) const {
    double agreement = extra_agreement + p_.prior_strength * p_.initial_weight;
    double claims = extra_claims + p_.prior_strength;
    if (auto it = history_.find(src); it != history_.end()) {
      agreement += it->second.agreement;
      claims += it->second.claims;
    }
    if (!(claims > 0.0)) return p_.initial_weight;
    return std::clamp(agreement / claims, p_.min_weight, 1.0);
  }

  VotingParams p_;
  std::map<std::string, History> history_;
  int iterations_ = 0;
};

/// Splits an event whose deadline exceeds the cycle into ceil(deadline/cycle)
/// consecutive sub-events of equal deadline, each inheriting veracity and
/// confidence. A deadline equal to the cycle length is not split.
inline std::vector<EventEstimate> split_event(const EventEstimate& event, double cycle_length_min) {
  if (!(event.deadline_min > 0.0)) throw std::invalid_argument("split_event: deadline must be positive");
  if (!(cycle_length_min > 0.0)) throw std::invalid_argument("split_event: cycle length must be positive");
  if (event.deadline_min <= cycle_length_min) return {event};
  const int parts = static_cast<int>(std::ceil(event.deadline_min / cycle_length_min));
  const double each = event.deadline_min / parts;
  std::vector<EventEstimate> out;
  out.reserve(static_cast<std::size_t>(parts));
  for (int i = 0; i < parts; ++i) {
    EventEstimate sub = event;
    sub.deadline_min = each;
    sub.window_start_min = event.window_start_min + i * each;
    sub.part = i;
    sub.parts = parts;
    out.push_back(sub);
  }
  return out;
}

struct ConcludedEvent {
  EventEstimate estimate;
  std::uint8_t decided_state = 0;  // E-hat
};

struct GateResult {
  std::vector<ConcludedEvent> concluded;
  std::vector<EventEstimate> tasks;
};

/// Confident estimates are concluded from veracity alone; the rest are
/// handed to vehicle dispatch.
inline GateResult gate_dispatch(std::span<const EventEstimate> estimates, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("gate_dispatch: threshold must be in [0,1]");
  GateResult out;
  for (auto e : estimates) {
    e.needs_dispatch = e.confidence < threshold;
    if (e.needs_dispatch)
      out.tasks.push_back(e);
    else
      out.concluded.push_back({e, static_cast<std::uint8_t>(e.estimate_exists() ? 1 : 0)});
  }
  return out;
}

}  // namespace dasc
