#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dasc/allocation.hpp"
#include "dasc/config.hpp"
#include "dasc/incentives.hpp"
#include "dasc/metrics.hpp"
#include "dasc/paths.hpp"
#include "dasc/routing.hpp"
#include "dasc/scenario.hpp"
#include "dasc/scouting.hpp"
#include "dasc/social.hpp"
#include "dasc/world.hpp"

namespace dasc {

enum class DriverType { completer, aborter, refuser };
enum class Role { idle, task, scout, patrol, home };

struct Driver {
  int id = 0;
  DriverType type = DriverType::completer;
  double abort_probability = 0.0;
  CellId position = kNoCell;
  Role role = Role::idle;
  int task = -1;  // index into Simulation::tasks()
  std::vector<CellId> route;
  std::size_t next = 1;  // index of the next cell of `route`
  std::set<CellId> own_sightings;  // damage this driver ran into itself

  bool willing() const { return type != DriverType::refuser; }
  bool participating() const { return willing() && role != Role::home; }
  bool at_route_end() const { return route.empty() || next >= route.size(); }
};

struct MoveResult {
  bool arrived = false;
  bool blocked = false;
  bool aborted = false;
  CellId blocked_at = kNoCell;
  int moved = 0;
};

/// Advances a driver along its route by up to `budget` cells. Before every
/// move an aborter holding a task abandons it with its abort probability.
/// Entering a damaged cell is refused and reported as blocked.
inline MoveResult move_driver(Driver& d, const Grid& truth, int budget, Rng& rng) {
  MoveResult r;
  for (int i = 0; i < budget; ++i) {
    if (d.at_route_end()) {
      r.arrived = !d.route.empty();
      return r;
    }
    if (d.type == DriverType::aborter && d.role == Role::task && rng.bernoulli(d.abort_probability)) {
      r.aborted = true;
      return r;
    }
    const CellId c = d.route[d.next];
    if (truth.damaged(c) || truth.blocked(c)) {
      r.blocked = true;
      r.blocked_at = c;
      return r;
    }
    d.position = c;
    ++d.next;
    ++r.moved;
  }
  r.arrived = d.at_route_end() && !d.route.empty();
  return r;
}

struct BaselineCar {
  int id = 0;
  double reputation = 0.5;
};

struct BaselineTask {
  double deadline_min = 0.0;
  double remaining_min = 0.0;
};

struct Assignment {
  int car = 0;
  int task = 0;  // index into the task list
  auto operator<=>(const Assignment&) const = default;
};

/// Assignment rule of a non-game scheme. `dist[c][n]` is the hop distance
/// from car c to task n (kUnreachable when none). FixedRoute assigns nothing.
inline std::vector<Assignment> run_baseline_allocation(Scheme scheme, std::span<const BaselineCar> cars,
                                                       std::span<const BaselineTask> tasks,
                                                       const std::vector<std::vector<int>>& dist,
                                                       double minutes_per_cell, Rng& rng) {
  std::vector<Assignment> out;
  const std::size_t nc = cars.size(), nt = tasks.size();
  auto reachable_in_time = [&](std::size_t c, std::size_t n) {
    int d = dist[c][n];
    return d != kUnreachable && d * minutes_per_cell <= tasks[n].remaining_min;
  };
  switch (scheme) {
    case Scheme::random: {
      std::vector<std::size_t> order(nc);
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t n = 0; n < std::min(nc, nt); ++n)
        out.push_back({cars[order[n]].id, static_cast<int>(n)});
      break;
    }
    case Scheme::shortest_distance: {
      struct Pair {
        int d;
        std::size_t n, c;
      };
      std::vector<Pair> pairs;
      for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t n = 0; n < nt; ++n)
          if (dist[c][n] != kUnreachable) pairs.push_back({dist[c][n], n, c});
      std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.d != b.d) return a.d < b.d;
        if (a.n != b.n) return a.n < b.n;
        return a.c < b.c;
      });
      std::vector<bool> car_used(nc, false), task_used(nt, false);
      for (const auto& p : pairs) {
        if (car_used[p.c] || task_used[p.n]) continue;
        car_used[p.c] = task_used[p.n] = true;
        out.push_back({cars[p.c].id, static_cast<int>(p.n)});
      }
      break;
    }
    case Scheme::reputation_based: {
      std::vector<std::size_t> t_order(nt), c_order(nc);
      std::iota(t_order.begin(), t_order.end(), std::size_t{0});
      std::iota(c_order.begin(), c_order.end(), std::size_t{0});
      std::stable_sort(t_order.begin(), t_order.end(),
                       [&](std::size_t a, std::size_t b) { return tasks[a].deadline_min < tasks[b].deadline_min; });
      std::stable_sort(c_order.begin(), c_order.end(), [&](std::size_t a, std::size_t b) {
        if (cars[a].reputation != cars[b].reputation) return cars[a].reputation > cars[b].reputation;
        return cars[a].id < cars[b].id;
      });
      for (std::size_t i = 0; i < std::min(nc, nt); ++i)
        out.push_back({cars[c_order[i]].id, static_cast<int>(t_order[i])});
      break;
    }
    case Scheme::incentive_based: {
      // Rewards fall linearly with deadline rank; each car in turn takes the
      // task with the best reward share among those it can reach in time.
      std::vector<std::size_t> t_order(nt);
      std::iota(t_order.begin(), t_order.end(), std::size_t{0});
      std::stable_sort(t_order.begin(), t_order.end(),
                       [&](std::size_t a, std::size_t b) { return tasks[a].deadline_min < tasks[b].deadline_min; });
      std::vector<double> reward(nt, 0.0);
      for (std::size_t rank = 0; rank < nt; ++rank)
        reward[t_order[rank]] = 1.0 + static_cast<double>(nt - rank) / static_cast<double>(nt);
      std::vector<int> count(nt, 0);
      std::vector<std::size_t> order(nc);
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t c : order) {
        int best = -1;
        double val = 0.0;
        for (std::size_t n = 0; n < nt; ++n) {
          if (!reachable_in_time(c, n)) continue;
          double share = reward[n] / (1.0 + count[n]);
          if (best < 0 || share > val) {
            best = static_cast<int>(n);
            val = share;
          }
        }
        if (best >= 0) {
          ++count[static_cast<std::size_t>(best)];
          out.push_back({cars[c].id, best});
        }
      }
      break;
    }
    case Scheme::fixed_route:
      break;
    default:
      throw std::invalid_argument("run_baseline_allocation: scheme uses the game allocation");
  }
  return out;
}

/// A dispatched (sub-)event. Tasks are created when an event is split and
/// become active in their posting cycle.
struct TaskRecord {
  int id = 0;
  int event = -1;  // ground-truth event index, -1 when the reports match none
  int cycle = 0;   // posting cycle
  CellId cell = kNoCell;
  double deadline_min = 0.0;  // from the posting cycle's start
  double veracity = 0.5;
  double confidence = 0.0;
  int part = 0;
  int parts = 1;
  double reward = 1.0;
  TaskStatus status = TaskStatus::open;
  std::vector<int> accepted_by;
  double verified_at = -1.0;
};

struct EventOutcome {
  bool reported = false;
  bool concluded = false;  // decided from veracity alone
  bool dispatched = false;
  bool resolved = false;
  std::uint8_t estimate = 0;
  int resolved_cycle = 0;
};

struct RunResult {
  Metrics metrics;
  std::vector<nlohmann::ordered_json> trace;
  std::vector<std::string> diagnostics;
  int cycles_run = 0;
};

class Simulation {
 public:
  Simulation(const Scenario& scenario, const RunConfig& config)
      : sc_(scenario), cfg_(config), world_(materialize(scenario, config.seed)) {
    cycles_ = cfg_.cycles.value_or(sc_.cycles);
    L_ = cfg_.cycle_length_min.value_or(sc_.cycle_length_min);
    mpc_ = sc_.minutes_per_cell;
    if (cycles_ < 1) throw ScenarioError("run: cycles must be at least 1");
    if (!(L_ > 0.0)) throw ScenarioError("run: cycle length must be positive");
    if (cfg_.ec_threshold < 0.0 || cfg_.ec_threshold > 1.0) throw ScenarioError("run: EC threshold must be in [0,1]");
    cfg_.pid.validate();
    for (const auto& e : world_.events) {
      try {
        e.validate(world_.grid);
      } catch (const WorldError& err) {
        throw ScenarioError(err.what());
      }
    }
    truth_ = world_.grid;

    MdpParams mp = cfg_.mdp;
    mp.exploration_cycles = cfg_.exploration_cycles >= 0 ? cfg_.exploration_cycles : cycles_ / 4;
    mdp_ = MdpTable(mp);

    VotingParams vp;
    vp.confidence_scale = cfg_.confidence_scale;
    estimator_ = WeightedVotingEstimator(vp);

    FleetSpec fleet = sc_.fleet;
    if (cfg_.completers) fleet.completers = *cfg_.completers;
    if (cfg_.aborters) fleet.aborters = *cfg_.aborters;
    if (cfg_.refusers) fleet.refusers = *cfg_.refusers;
    if (cfg_.abort_probability) fleet.abort_probability = *cfg_.abort_probability;
    if (fleet.completers < 0 || fleet.aborters < 0 || fleet.refusers < 0)
      throw ScenarioError("run: car counts must be non-negative");

    const auto open = world_.grid.open_cells();
    auto add = [&](DriverType type, int count) {
      for (int i = 0; i < count; ++i) {
        Driver d;
        d.id = static_cast<int>(drivers_.size());
        d.type = type;
        d.abort_probability = type == DriverType::aborter ? fleet.abort_probability : 0.0;
        Rng place(cfg_.seed, Stream::placement, {static_cast<std::uint64_t>(d.id)});
        d.position = open[static_cast<std::size_t>(place.below(open.size()))];
        drivers_.push_back(std::move(d));
      }
    };
    // Refusers come last so that dropping them leaves every other id intact.
    add(DriverType::completer, fleet.completers);
    add(DriverType::aborter, fleet.aborters);
    add(DriverType::refuser, fleet.refusers);

    rep_ = Reputation(drivers_.size(), cfg_.initial_reputation, cfg_.eta);
    access_ = AccessibilityMap(world_.grid.size(), cfg_.x0);
    kw_ = KappaWindow(cfg_.kappa);
    known_.assign(world_.grid.size(), 0);
    churn_ = ChurnMonitor(cfg_.psi);

    for (std::size_t i = 0; i < world_.events.size(); ++i)
      event_index_[{world_.events[i].cycle, world_.events[i].cell}] = static_cast<int>(i);
    outcomes_.assign(world_.events.size(), {});

    if (cfg_.scheme == Scheme::fixed_route) build_patrol();
  }

  int cycle() const { return t_; }
  int total_cycles() const { return cycles_; }
  const std::vector<Driver>& drivers() const { return drivers_; }
  const std::vector<TaskRecord>& tasks() const { return tasks_; }
  const AccessibilityMap& access() const { return access_; }
  const Reputation& reputation() const { return rep_; }
  const MdpTable& mdp() const { return mdp_; }
  const KappaWindow& kappa() const { return kw_; }
  const Grid& truth() const { return truth_; }
  const World& world() const { return world_; }
  const std::vector<EventOutcome>& outcomes() const { return outcomes_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  /// Per-cycle assignment log: (cycle, car, task id) of every pick made.
  const std::vector<std::array<int, 3>>& assignment_log() const { return assignment_log_; }
  const std::vector<std::string>& violations() const { return violations_; }

  /// Runs one response cycle.
  void run_cycle() {
    ++t_;
    CycleMetrics cm;
    cm.cycle = t_;
    begin_cycle(cm);
    movement(cm);
    end_cycle(cm);
    cycle_metrics_.push_back(cm);
  }

  RunResult run(int cycles = -1) {
    const int target = cycles < 0 ? cycles_ : std::min(cycles, cycles_);
    while (t_ < target) run_cycle();
    return finish();
  }

  /// Scores the run so far. Tasks still pending become unresolved at the horizon.
  RunResult finish() {
    RunResult r;
    for (auto& task : tasks_)
      if (task.status == TaskStatus::open) task.status = TaskStatus::unresolved_at_horizon;
    r.metrics.cycles = cycle_metrics_;
    for (auto& c : r.metrics.cycles) {
      c.confusion = {};
      c.deadlines = {};
    }
    for (std::size_t i = 0; i < world_.events.size(); ++i) {
      const auto& ev = world_.events[i];
      if (ev.cycle > t_) continue;
      const auto& o = outcomes_[i];
      Confusion one;
      if (o.resolved) one.add(o.estimate != 0, ev.state != 0);
      else one.add_unresolved(ev.state != 0);
      r.metrics.confusion += one;
      r.metrics.cycles[static_cast<std::size_t>(ev.cycle - 1)].confusion += one;
    }
    for (const auto& task : tasks_) {
      if (task.cycle > t_ || task.accepted_by.empty()) continue;
      DeadlineTally d;
      d.accepted = 1;
      if (task.status == TaskStatus::verified && task.verified_at <= task.deadline_min) d.hits = 1;
      else d.misses = 1;
      r.metrics.deadlines += d;
      r.metrics.cycles[static_cast<std::size_t>(task.cycle - 1)].deadlines += d;
    }
    r.metrics.sigma_cap_hits = mdp_.cap_hits();
    r.metrics.uncertified_allocations = uncertified_;
    r.trace = trace_;
    r.diagnostics = diagnostics_;
    r.cycles_run = t_;
    return r;
  }

 private:
  // ---- cycle start -------------------------------------------------------

  void begin_cycle(CycleMetrics& cm) {
    truth_ = step_damage(truth_, world_.damage, t_, cfg_.seed);
    prior_known_ = known_;
    sightings_.assign(truth_.size(), Sighting::none);
    detected_.clear();
    scout_obs_.clear();
    walkers_.clear();
    executed_routes_.clear();
    pending_marks_.clear();
    board_ = TaskBoard{};
    for (auto& d : drivers_) {
      d.role = d.willing() ? Role::idle : Role::home;
      if (!d.willing()) continue;
      d.task = -1;
      d.route.clear();
      d.next = 1;
    }
    move_rng_.clear();
    for (const auto& d : drivers_)
      move_rng_.emplace_back(cfg_.seed, Stream::movement,
                             std::initializer_list<std::uint64_t>{static_cast<std::uint64_t>(t_),
                                                                  static_cast<std::uint64_t>(d.id)});

    ingest(cm);
    if (uses_scouts(cfg_.scheme)) dispatch_scouts();
    if (cfg_.scheme == Scheme::fixed_route) start_patrol();

    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      auto& task = tasks_[i];
      if (task.cycle != t_) continue;
      task.reward = reward_for(task);
      Task bt;
      bt.id = static_cast<int>(i);
      bt.cell = task.cell;
      bt.reward = task.reward;
      bt.deadline_min = task.deadline_min;
      bt.confidence = task.confidence;
      board_.tasks.push_back(bt);
    }
    board_.advance_to(0.0);
    cm.tasks = static_cast<int>(board_.tasks.size());
    churn_.start_cycle(cm.tasks);

    if (uses_game(cfg_.scheme))
      allocate_game(0.0);
    else
      allocate_baseline(0.0);
    verify_occupied(0.0, cm);
  }

  void ingest(CycleMetrics& cm) {
    std::vector<SocialReport> batch;
    const double start = (t_ - 1) * L_, end = t_ * L_;
    for (const auto& r : world_.reports)
      if (r.timestamp_min >= start && r.timestamp_min < end) batch.push_back(r);
    auto in = ingest_cycle(batch, t_, L_, world_.grid);
    for (auto& d : in.diagnostics) diagnostics_.push_back("cycle " + std::to_string(t_) + ": " + d);
    reported_ = static_cast<int>(in.groups.size());
    cm.events = reported_;
    auto estimates = estimator_.estimate(in.groups);
    auto gate = gate_dispatch(estimates, cfg_.ec_threshold);
    for (const auto& c : gate.concluded) {
      int ev = event_of(c.estimate.cell);
      ++cm.concluded;
      if (ev < 0) continue;
      auto& o = outcomes_[static_cast<std::size_t>(ev)];
      o.reported = o.concluded = o.resolved = true;
      o.estimate = c.decided_state;
      o.resolved_cycle = t_;
    }
    for (const auto& est : gate.tasks) {
      int ev = event_of(est.cell);
      if (ev >= 0) {
        auto& o = outcomes_[static_cast<std::size_t>(ev)];
        o.reported = o.dispatched = true;
      } else {
        diagnostics_.push_back("cycle " + std::to_string(t_) + ": reports at cell " + std::to_string(est.cell) +
                               " match no ground-truth event; not scored");
      }
      for (const auto& part : split_event(est, L_)) {
        TaskRecord tr;
        tr.id = static_cast<int>(tasks_.size());
        tr.event = ev;
        tr.cycle = t_ + part.part;
        tr.cell = part.cell;
        tr.deadline_min = part.deadline_min;
        tr.veracity = part.veracity;
        tr.confidence = part.confidence;
        tr.part = part.part;
        tr.parts = part.parts;
        tasks_.push_back(tr);
      }
    }
    if (cfg_.trace) {
      for (const auto& e : estimates) {
        nlohmann::ordered_json j;
        j["kind"] = "estimate";
        j["cycle"] = t_;
        j["cell"] = e.cell;
        j["veracity"] = e.veracity;
        j["confidence"] = e.confidence;
        j["deadline_min"] = e.deadline_min;
        trace_.push_back(std::move(j));
      }
    }
  }

  int event_of(CellId cell) const {
    auto it = event_index_.find({t_, cell});
    return it == event_index_.end() ? -1 : it->second;
  }

  double reward_for(const TaskRecord& task) const {
    if (!uses_game(cfg_.scheme)) return cfg_.pid.initial_reward;
    auto it = pid_reward_.find(task.cell);
    return it == pid_reward_.end() ? cfg_.pid.initial_reward : it->second;
  }

  // ---- scouts and patrols ------------------------------------------------

  void dispatch_scouts() {
    std::vector<int> willing;
    for (const auto& d : drivers_)
      if (d.willing()) willing.push_back(d.id);
    Rng rng(cfg_.seed, Stream::scouts, {static_cast<std::uint64_t>(t_)});
    auto scouts = select_scouts(willing, cfg_.q_percent, rng);
    std::vector<ScoutStart> starts;
    for (int id : scouts) starts.push_back({id, drivers_[static_cast<std::size_t>(id)].position});
    const std::size_t budget = static_cast<std::size_t>(std::floor(L_ / mpc_ + 1e-9)) + 1;
    auto plan = plan_coverage(truth_, starts, budget, known_);
    for (std::size_t i = 0; i < plan.scouts.size(); ++i) {
      drivers_[static_cast<std::size_t>(plan.scouts[i])].role = Role::scout;
      walkers_.emplace_back(plan.scouts[i], plan.routes[i], budget, cfg_.scout_radius);
    }
  }

  void build_patrol() {
    const Grid& g = world_.grid;
    auto open = g.open_cells();
    if (open.empty()) return;
    std::vector<bool> seen(g.size(), false);
    CellId here = open.front();
    patrol_walk_.push_back(here);
    seen[static_cast<std::size_t>(here)] = true;
    PassableView all{&g, {}};
    while (true) {
      auto dist = bfs_distances(g, here, all);
      CellId best = kNoCell;
      for (CellId c : open)
        if (!seen[static_cast<std::size_t>(c)] && dist[static_cast<std::size_t>(c)] != kUnreachable &&
            (best == kNoCell || dist[static_cast<std::size_t>(c)] < dist[static_cast<std::size_t>(best)]))
          best = c;
      if (best == kNoCell) break;
      auto leg = shortest_path(g, here, best, all);
      for (std::size_t i = 1; i < leg.size(); ++i) {
        patrol_walk_.push_back(leg[i]);
        seen[static_cast<std::size_t>(leg[i])] = true;
      }
      here = best;
    }
    auto back = shortest_path(g, here, patrol_walk_.front(), all);
    for (std::size_t i = 1; i + 1 < back.size(); ++i) patrol_walk_.push_back(back[i]);
    std::vector<int> willing;
    for (const auto& d : drivers_)
      if (d.willing()) willing.push_back(d.id);
    patrol_index_.assign(drivers_.size(), 0);
    for (std::size_t k = 0; k < willing.size(); ++k) {
      const std::size_t idx = k * patrol_walk_.size() / willing.size();
      auto& d = drivers_[static_cast<std::size_t>(willing[k])];
      d.position = patrol_walk_[idx];
      patrol_index_[static_cast<std::size_t>(d.id)] = idx;
    }
  }

  void start_patrol() {
    for (auto& d : drivers_)
      if (d.willing()) d.role = Role::patrol;
  }

  void step_patrol(Driver& d, CycleMetrics& cm, double tau) {
    const std::size_t n = patrol_walk_.size();
    if (n < 2) return;
    if (d.at_route_end()) {
      // Head for the next cell of the walk, or rejoin it further on when
      // the known graph offers no way there.
      auto& idx = patrol_index_[static_cast<std::size_t>(d.id)];
      PassableView view{&world_.grid, known_};
      d.route.clear();
      for (std::size_t k = 1; k <= n && d.route.empty(); ++k) {
        const CellId target = patrol_walk_[(idx + k) % n];
        if (target == d.position) continue;
        auto p = world_.grid.adjacent(d.position, target) && view(target)
                     ? Path{d.position, target}
                     : shortest_path(world_.grid, d.position, target, view);
        if (p.size() >= 2) {
          d.route = std::move(p);
          idx = (idx + k) % n;
        }
      }
      if (d.route.empty()) return;
      d.next = 1;
    }
    auto r = move_driver(d, truth_, 1, move_rng_[static_cast<std::size_t>(d.id)]);
    if (r.blocked) {
      record_block(d, r.blocked_at, false);
      d.route.clear();
    } else if (r.moved) {
      see_clear(d.position, false);
    }
    verify_at(d, tau, cm);
  }

  // ---- allocation --------------------------------------------------------

  std::span<const std::uint8_t> planning_damage() const {
    if (damage_aware(cfg_.scheme)) return known_;
    return {};
  }

  bool known_damaged(CellId c) const { return known_[static_cast<std::size_t>(c)] != 0; }

  std::vector<std::vector<int>> task_distances() const {
    std::vector<std::vector<int>> out;
    PassableView view{&world_.grid, planning_damage()};
    for (const auto& bt : board_.tasks) {
      if (!view(bt.cell)) {
        out.emplace_back(world_.grid.size(), kUnreachable);
        continue;
      }
      out.push_back(bfs_distances(world_.grid, bt.cell, view));
    }
    return out;
  }

  std::vector<int> free_cars() const {
    std::vector<int> out;
    for (const auto& d : drivers_)
      if (d.role == Role::idle) out.push_back(d.id);
    return out;
  }

  void allocate_game(double tau) {
    board_.advance_to(tau);
    auto movers = free_cars();
    if (board_.tasks.empty() || movers.empty()) return;
    Rng rng(cfg_.seed, Stream::allocation, {static_cast<std::uint64_t>(t_), static_cast<std::uint64_t>(realloc_)});
    rng.shuffle(std::span<int>(movers));

    const auto dist = task_distances();
    const double omega_max = L_ / mpc_;
    AllocationProblem pr;
    pr.reputation = rep_.pi;
    pr.params = cfg_.utility;
    pr.movers = movers;
    pr.base.assign(drivers_.size(), std::vector<double>(board_.tasks.size(), 0.0));
    pr.fixed_picks.resize(board_.tasks.size());
    for (std::size_t n = 0; n < board_.tasks.size(); ++n) {
      const auto& bt = board_.tasks[n];
      const bool open = tasks_[static_cast<std::size_t>(bt.id)].status == TaskStatus::open;
      for (int car : bt.picks) {
        const auto& d = drivers_[static_cast<std::size_t>(car)];
        if (d.role == Role::task && d.task == bt.id) pr.fixed_picks[n].push_back(car);
      }
      if (!open || !(bt.remaining_min > 0.0)) continue;
      for (int m : movers) {
        const int d = dist[n][static_cast<std::size_t>(drivers_[static_cast<std::size_t>(m)].position)];
        if (d == kUnreachable || d * mpc_ > bt.remaining_min) continue;
        auto f = utility_factors(d, omega_max, bt.remaining_min, L_, bt.confidence, cfg_.utility);
        pr.base[static_cast<std::size_t>(m)][n] = std::max(priority_score(bt.reward, f, cfg_.utility), 0.0);
      }
    }
    auto res = best_response_allocate(pr);
    if (!res.certified) ++uncertified_;
    for (const auto& picks : res.task_picks)
      for (int m : picks)
        if (!(congestion_rate(m, picks, rep_.pi, cfg_.utility) >= cfg_.utility.epsilon))
          violations_.push_back("congestion rate below epsilon");
    for (int m : movers) {
      const int n = res.pick[static_cast<std::size_t>(m)];
      if (n < 0) continue;
      assign(drivers_[static_cast<std::size_t>(m)], static_cast<std::size_t>(n), tau);
    }
    if (cfg_.trace) {
      for (std::size_t n = 0; n < board_.tasks.size(); ++n) {
        nlohmann::ordered_json j;
        j["kind"] = "allocation";
        j["cycle"] = t_;
        j["tau"] = tau;
        j["task"] = board_.tasks[n].id;
        j["reward"] = board_.tasks[n].reward;
        j["picks"] = res.task_picks[n];
        nlohmann::ordered_json u = nlohmann::ordered_json::array();
        for (int m : movers)
          if (res.pick[static_cast<std::size_t>(m)] == static_cast<int>(n))
            u.push_back({{"car", m}, {"utility", res.pick_utility[static_cast<std::size_t>(m)]}});
        j["utilities"] = u;
        j["certified"] = res.certified;
        trace_.push_back(std::move(j));
      }
    }
  }

  void allocate_baseline(double tau) {
    board_.advance_to(tau);
    auto free = free_cars();
    if (board_.tasks.empty() || free.empty()) return;
    std::vector<BaselineCar> cars;
    for (int id : free) cars.push_back({id, rep_.pi[static_cast<std::size_t>(id)]});
    std::vector<BaselineTask> bts;
    for (const auto& bt : board_.tasks) bts.push_back({bt.deadline_min, bt.remaining_min});
    const auto by_task = task_distances();
    std::vector<std::vector<int>> dist(cars.size(), std::vector<int>(bts.size(), kUnreachable));
    for (std::size_t c = 0; c < cars.size(); ++c)
      for (std::size_t n = 0; n < bts.size(); ++n)
        dist[c][n] = by_task[n][static_cast<std::size_t>(drivers_[static_cast<std::size_t>(cars[c].id)].position)];
    Rng rng(cfg_.seed, Stream::baseline, {static_cast<std::uint64_t>(t_)});
    for (const auto& a : run_baseline_allocation(cfg_.scheme, cars, bts, dist, mpc_, rng))
      assign(drivers_[static_cast<std::size_t>(a.car)], static_cast<std::size_t>(a.task), tau);
  }

  void assign(Driver& d, std::size_t board_index, double tau) {
    auto& bt = board_.tasks[board_index];
    auto& task = tasks_[static_cast<std::size_t>(bt.id)];
    d.role = Role::task;
    d.task = bt.id;
    board_.add_pick(static_cast<int>(board_index), d.id);
    if (std::find(task.accepted_by.begin(), task.accepted_by.end(), d.id) == task.accepted_by.end())
      task.accepted_by.push_back(d.id);
    assignment_log_.push_back({t_, d.id, bt.id});
    plan_route(d, tau);
  }

  // ---- routing -----------------------------------------------------------

  void plan_route(Driver& d, double tau) {
    const auto& task = tasks_[static_cast<std::size_t>(d.task)];
    d.route.clear();
    d.next = 1;
    if (d.position == task.cell) {
      d.route = {d.position};
      return;
    }
    switch (cfg_.scheme) {
      case Scheme::dasc:
        d.route = mdp_route(d, task, tau);
        break;
      case Scheme::dasc_no_mdp:
        d.route = greedy_access_route(d.position, task.cell);
        break;
      case Scheme::social_car: {
        std::vector<std::uint8_t> avoid(world_.grid.size(), 0);
        for (CellId c : d.own_sightings) avoid[static_cast<std::size_t>(c)] = 1;
        d.route = shortest_path(world_.grid, d.position, task.cell, PassableView{&world_.grid, avoid});
        break;
      }
      default:
        d.route = shortest_path(world_.grid, d.position, task.cell, PassableView{&world_.grid, known_});
        break;
    }
  }

  Path mdp_route(const Driver& d, const TaskRecord& task, double tau) {
    const MdpState state{d.position, task.cell};
    const std::size_t budget = hops_within(task.deadline_min - tau, mpc_);
    auto it = action_cache_.find(state);
    if (it == action_cache_.end()) {
      auto all = enumerate_actions(world_.grid, state, static_cast<std::size_t>(-1), mdp_.params().k_routes);
      std::vector<Path> paths;
      for (auto& a : all) paths.push_back(std::move(a.cells));
      it = action_cache_.emplace(state, std::move(paths)).first;
    }
    std::vector<RouteAction> actions;
    for (const auto& p : it->second) {
      if (p.size() - 1 > budget) continue;
      bool clear = true;
      for (std::size_t i = 1; i < p.size() && clear; ++i) clear = !known_damaged(p[i]);
      if (clear) actions.push_back({p, 0.0, 0.0});
    }
    if (actions.empty()) {
      PassableView view{&world_.grid, known_};
      for (auto& p : k_shortest_paths(world_.grid, state.source, state.destination, mdp_.params().k_routes, view,
                                      budget))
        actions.push_back({std::move(p), 0.0, 0.0});
    }
    if (actions.empty()) {
      auto p = shortest_path(world_.grid, state.source, state.destination, PassableView{&world_.grid, known_});
      if (p.empty()) return {};
      actions.push_back({std::move(p), 0.0, 0.0});
    }
    auto probs = action_probabilities(actions, access_.values(), mdp_.sigma());
    Rng rng(cfg_.seed, Stream::routing,
            {static_cast<std::uint64_t>(t_), static_cast<std::uint64_t>(d.id), route_draws_++});
    const std::size_t k = select_action(mdp_, state, actions, t_, rng);
    executed_routes_.push_back(actions[k].cells);
    pending_marks_.emplace_back(state, actions[k].cells);
    for (double p : probs)
      if (!(p >= 0.0)) violations_.push_back("negative route probability");
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) violations_.push_back("route probabilities do not sum to 1");
    if (cfg_.trace) {
      nlohmann::ordered_json j;
      j["kind"] = "mdp";
      j["cycle"] = t_;
      j["car"] = d.id;
      j["source"] = state.source;
      j["destination"] = state.destination;
      j["action"] = actions[k].cells;
      nlohmann::ordered_json raw = nlohmann::ordered_json::array();
      for (const auto& a : actions) raw.push_back(a.raw_weight);
      j["raw_weights"] = raw;
      j["probabilities"] = probs;
      j["sigma"] = mdp_.sigma();
      trace_.push_back(std::move(j));
    }
    return actions[k].cells;
  }

  /// Always steps to a neighbour one hop closer on the known graph, taking
  /// the one with the highest accessibility index.
  Path greedy_access_route(CellId from, CellId to) const {
    PassableView view{&world_.grid, known_};
    if (!view(to)) return {};
    auto dist = bfs_distances(world_.grid, to, view);
    if (dist[static_cast<std::size_t>(from)] == kUnreachable) return {};
    Path p{from};
    CellId c = from;
    while (c != to) {
      const int dc = dist[static_cast<std::size_t>(c)];
      CellId best = kNoCell;
      for (CellId n : world_.grid.neighbors(c)) {
        if (dist[static_cast<std::size_t>(n)] != dc - 1) continue;
        if (best == kNoCell || access_[n] > access_[best] || (access_[n] == access_[best] && n < best)) best = n;
      }
      if (best == kNoCell) return {};
      p.push_back(best);
      c = best;
    }
    return p;
  }

  // ---- movement ----------------------------------------------------------

  void movement(CycleMetrics& cm) {
    const int steps = static_cast<int>(std::floor(L_ / mpc_ + 1e-9));
    for (int s = 1; s <= steps; ++s) {
      const double tau = s * mpc_;
      for (auto& d : drivers_) {
        const CellId before = d.position;
        switch (d.role) {
          case Role::task:
            step_task_car(d, tau, cm);
            break;
          case Role::scout:
            step_scout(d, tau, cm);
            break;
          case Role::patrol:
            step_patrol(d, cm, tau);
            break;
          default:
            break;
        }
        if (d.position != before && (truth_.blocked(d.position) || truth_.damaged(d.position)))
          violations_.push_back("car " + std::to_string(d.id) + " entered impassable cell " +
                                std::to_string(d.position));
      }
      expire_deadlines(tau, cm);
    }
  }

  void step_task_car(Driver& d, double tau, CycleMetrics& cm) {
    const auto& task = tasks_[static_cast<std::size_t>(d.task)];
    if (d.at_route_end() && d.position != task.cell) {
      plan_route(d, tau - mpc_);
      if (d.route.empty()) return;  // no known way through; wait
    }
    auto r = move_driver(d, truth_, 1, move_rng_[static_cast<std::size_t>(d.id)]);
    if (r.aborted) {
      outcome(d, Outcome::dropped, cm, tau);
      return;
    }
    if (r.blocked) {
      record_block(d, r.blocked_at, true);
      plan_route(d, tau);
      return;
    }
    if (r.moved) see_clear(d.position, true);
    verify_at(d, tau, cm);
    if (d.role == Role::task && d.position == task.cell)
      outcome(d, tau <= task.deadline_min ? Outcome::completed : Outcome::missed_deadline, cm, tau);
  }

  void step_scout(Driver& d, double tau, CycleMetrics& cm) {
    for (auto& w : walkers_) {
      if (w.car() != d.id) continue;
      if (d.type == DriverType::aborter &&
          move_rng_[static_cast<std::size_t>(d.id)].bernoulli(d.abort_probability)) {
        // Scouting is a task too; an aborter abandons it and heads home.
        d.role = Role::home;
        return;
      }
      const std::size_t seen = scout_obs_.size();
      w.step(truth_, known_, scout_covered_, t_, scout_obs_);
      for (std::size_t i = seen; i < scout_obs_.size(); ++i)
        if (scout_obs_[i].damage) detected_.insert(scout_obs_[i].cell);
      d.position = w.position();
      break;
    }
    verify_at(d, tau, cm);
  }

  void record_block(Driver& d, CellId c, bool event_car) {
    detected_.insert(c);
    d.own_sightings.insert(c);
    if (damage_aware(cfg_.scheme)) known_[static_cast<std::size_t>(c)] = 1;
    if (event_car) sightings_[static_cast<std::size_t>(c)] = Sighting::damaged;
    if (cfg_.trace) {
      nlohmann::ordered_json j;
      j["kind"] = "blocked";
      j["cycle"] = t_;
      j["car"] = d.id;
      j["cell"] = c;
      trace_.push_back(std::move(j));
    }
  }

  void see_clear(CellId c, bool event_car) {
    if (damage_aware(cfg_.scheme)) known_[static_cast<std::size_t>(c)] = 0;
    if (event_car) sightings_[static_cast<std::size_t>(c)] = Sighting::clear;
  }

  /// Sensing on location: an open task at the car's cell is verified.
  void verify_at(const Driver& d, double tau, CycleMetrics& cm) {
    if (!d.participating()) return;
    for (auto& bt : board_.tasks) {
      auto& task = tasks_[static_cast<std::size_t>(bt.id)];
      if (task.status != TaskStatus::open || task.cell != d.position || tau > task.deadline_min) continue;
      task.status = TaskStatus::verified;
      task.verified_at = tau;
      ++cm.verified;
      if (task.event >= 0) {
        auto& o = outcomes_[static_cast<std::size_t>(task.event)];
        if (!o.resolved) {
          o.resolved = true;
          o.estimate = world_.events[static_cast<std::size_t>(task.event)].state;
          o.resolved_cycle = t_;
        }
      }
    }
  }

  void verify_occupied(double tau, CycleMetrics& cm) {
    for (auto& d : drivers_) {
      verify_at(d, tau, cm);
      if (d.role == Role::task && d.position == tasks_[static_cast<std::size_t>(d.task)].cell)
        outcome(d, Outcome::completed, cm, tau);
    }
  }

  void outcome(Driver& d, Outcome o, CycleMetrics& cm, double tau) {
    const bool churn = mark_outcome(board_, rep_, d.id, d.task, o).churn;
    d.route.clear();
    d.next = 1;
    d.task = -1;
    d.role = o == Outcome::dropped ? Role::home : Role::idle;
    if (!churn) return;
    ++cm.drops;
    if (churn_trigger(churn_) && uses_game(cfg_.scheme)) {
      ++cm.reallocations;
      ++realloc_;
      board_.advance_to(tau);
      for (auto& bt : board_.tasks) {
        const auto& task = tasks_[static_cast<std::size_t>(bt.id)];
        if (task.status != TaskStatus::open) continue;
        auto out = pid_step(pid_[task.cell], cfg_.pid, aggregate_reputation(bt.picks, rep_.pi));
        bt.reward = out.reward;
        pid_reward_[task.cell] = out.reward;
        trace_incentive(bt.id, out);
      }
      allocate_game(tau);
    }
  }

  void expire_deadlines(double tau, CycleMetrics& cm) {
    for (auto& bt : board_.tasks) {
      auto& task = tasks_[static_cast<std::size_t>(bt.id)];
      if (tau <= task.deadline_min) continue;
      if (task.status == TaskStatus::open) task.status = TaskStatus::deadline_missed;
      for (auto& d : drivers_)
        if (d.role == Role::task && d.task == bt.id) outcome(d, Outcome::missed_deadline, cm, tau);
    }
  }

  // ---- cycle end ---------------------------------------------------------

  void end_cycle(CycleMetrics& cm) {
    const double end = std::floor(L_ / mpc_ + 1e-9) * mpc_;
    for (auto& d : drivers_)
      if (d.role == Role::task) outcome(d, Outcome::missed_deadline, cm, end);
    for (auto& bt : board_.tasks) {
      auto& task = tasks_[static_cast<std::size_t>(bt.id)];
      if (task.status == TaskStatus::open) task.status = TaskStatus::deadline_missed;
    }

    if (cfg_.scheme == Scheme::dasc) {
      for (const auto& route : executed_routes_) mdp_.record_penalty(observe_penalty(route, prior_known_, sightings_));
      for (const auto& [state, path] : pending_marks_) mdp_.mark_explored(state, path);
      mdp_.close_cycle();
    }
    if (uses_scouts(cfg_.scheme)) {
      update_kappa(kw_, static_cast<double>(detected_.size()), static_cast<double>(reported_));
      apply_observations(access_, scout_obs_, kw_.kappa, t_);
      access_.clear_log();
      scout_covered_.clear();
    }
    if (uses_game(cfg_.scheme)) {
      for (auto& bt : board_.tasks) {
        auto out = pid_step(pid_[bt.cell], cfg_.pid, aggregate_reputation(bt.picks, rep_.pi));
        pid_reward_[bt.cell] = out.reward;
        trace_incentive(bt.id, out);
        if (!(out.reward >= cfg_.pid.min_reward())) violations_.push_back("reward below floor");
      }
    }
    for (double p : rep_.pi)
      if (!(p >= 0.0 && p <= 1.0)) violations_.push_back("reputation outside [0,1]");
    for (double x : access_.values())
      if (!(x >= 0.0 && x <= 1.0)) violations_.push_back("accessibility outside [0,1]");
    if (!(mdp_.sigma() >= mdp_.params().sigma_min && mdp_.sigma() <= mdp_.params().sigma_max))
      violations_.push_back("sigma outside bounds");

    cm.kappa = kw_.kappa;
    cm.sigma = mdp_.sigma();
    cm.mean_reputation = rep_.pi.empty() ? 0.0 : std::accumulate(rep_.pi.begin(), rep_.pi.end(), 0.0) / rep_.pi.size();
    auto xs = access_.values();
    cm.mean_accessibility = xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  }

  void trace_incentive(int task, const PidOutput& out) {
    if (!cfg_.trace) return;
    nlohmann::ordered_json j;
    j["kind"] = "incentive";
    j["cycle"] = t_;
    j["task"] = task;
    j["aggregate"] = out.aggregate;
    j["error"] = out.error;
    j["adjustment"] = out.adjustment;
    j["reward"] = out.reward;
    trace_.push_back(std::move(j));
  }

  Scenario sc_;
  RunConfig cfg_;
  World world_;
  int cycles_ = 0;
  double L_ = 100.0;
  double mpc_ = 2.0;
  int t_ = 0;

  Grid truth_;
  std::vector<Driver> drivers_;
  std::vector<Rng> move_rng_;
  Reputation rep_;
  AccessibilityMap access_;
  KappaWindow kw_;
  MdpTable mdp_;
  WeightedVotingEstimator estimator_;
  ChurnMonitor churn_;
  std::map<CellId, PidState> pid_;
  std::map<CellId, double> pid_reward_;

  std::vector<std::uint8_t> known_;        // last observed damage per cell, fleet-wide
  std::vector<std::uint8_t> prior_known_;  // known_ at the start of the cycle
  std::vector<Sighting> sightings_;        // this cycle, by event cars
  std::set<CellId> detected_;
  std::vector<DamageObservation> scout_obs_;
  std::set<Edge> scout_covered_;
  std::vector<ScoutWalker> walkers_;
  std::vector<Path> executed_routes_;
  std::vector<std::pair<MdpState, Path>> pending_marks_;  // applied at cycle end
  std::map<MdpState, std::vector<Path>> action_cache_;
  std::uint64_t route_draws_ = 0;
  std::uint64_t realloc_ = 0;
  int reported_ = 0;

  std::vector<CellId> patrol_walk_;
  std::vector<std::size_t> patrol_index_;

  TaskBoard board_;
  std::vector<TaskRecord> tasks_;
  std::map<std::pair<int, CellId>, int> event_index_;
  std::vector<EventOutcome> outcomes_;
  std::vector<CycleMetrics> cycle_metrics_;
  std::vector<std::array<int, 3>> assignment_log_;
  std::vector<nlohmann::ordered_json> trace_;
  std::vector<std::string> diagnostics_;
  std::vector<std::string> violations_;
  int uncertified_ = 0;
};

}  // namespace dasc
