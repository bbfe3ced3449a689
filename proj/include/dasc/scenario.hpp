#pragma once

// Scenario files ("dasc-scenario/1", JSON) and report files (JSON lines).

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dasc/rng.hpp"
#include "dasc/social.hpp"
#include "dasc/world.hpp"

namespace dasc {

inline constexpr const char* kScenarioSchema = "dasc-scenario/1";

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FleetSpec {
  int completers = 30;
  int aborters = 30;
  int refusers = 30;
  double abort_probability = 0.1;  // per movement step while holding a task or scouting

  int total() const { return completers + aborters + refusers; }
};

struct DamagePatch {
  std::vector<CellId> cells;
  double appear = 0.0;
  double repair = 0.0;
};

struct SourceGroup {
  int count = 0;
  double reliability = 0.5;  // probability a report states the truth
};

/// Seeded synthesis of ground-truth events and the reports about them.
struct EventGenerator {
  int min_events = 4;
  int max_events = 10;
  double true_fraction = 0.6;
  double min_deadline = 6.0;
  double max_deadline = 60.0;
  double long_fraction = 0.0;
  double min_long_deadline = 120.0;
  double max_long_deadline = 250.0;
  int min_reports = 1;
  int max_reports = 6;
  std::vector<SourceGroup> sources{{20, 0.85}, {20, 0.35}};
};

/// Hazard cells drawn from the run seed: a share of the open cells that
/// follow their own damage probabilities.
struct RandomHazards {
  double fraction = 0.0;
  double appear = 0.0;
  double repair = 0.0;
};

struct Scenario {
  std::string name;
  Grid grid;
  double appear = 0.0;
  double repair = 0.0;
  std::vector<DamagePatch> patches;
  RandomHazards hazards;
  std::map<int, std::vector<CellId>> schedule;
  std::vector<CellId> initial_damage;
  std::vector<GroundTruthEvent> events;
  std::vector<SocialReport> reports;
  std::optional<EventGenerator> generator;
  FleetSpec fleet;
  int cycles = 36;
  double cycle_length_min = 100.0;
  double minutes_per_cell = 2.0;
};

/// A scenario with every seeded element drawn: the damage process, the
/// initial ground truth, events and reports.
struct World {
  Grid grid;
  DamageProcess damage;
  std::vector<GroundTruthEvent> events;
  std::vector<SocialReport> reports;
};

namespace detail {

using json = nlohmann::json;

template <class T>
T field(const json& j, const char* key, const std::string& ctx, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ScenarioError(ctx + "." + key + ": " + e.what());
  }
}

inline const json& require(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw ScenarioError(ctx + ": missing field '" + key + "'");
  return j.at(key);
}

inline void check_cell(const Grid& g, CellId c, const std::string& ctx) {
  if (!g.contains(c)) throw ScenarioError(ctx + ": cell " + std::to_string(c) + " outside the grid");
}

/// Cells named by either an explicit "cells" list or a "rect" [x0,y0,x1,y1]
/// (inclusive).
inline std::vector<CellId> cells_of(const json& j, const Grid& g, const std::string& ctx) {
  std::vector<CellId> out;
  if (j.contains("cells")) {
    for (const auto& c : j.at("cells")) {
      auto id = c.get<CellId>();
      check_cell(g, id, ctx + ".cells");
      out.push_back(id);
    }
  }
  if (j.contains("rect")) {
    auto r = j.at("rect").get<std::vector<int>>();
    if (r.size() != 4) throw ScenarioError(ctx + ".rect: expected [x0, y0, x1, y1]");
    for (int y = std::max(0, r[1]); y <= std::min(g.height() - 1, r[3]); ++y)
      for (int x = std::max(0, r[0]); x <= std::min(g.width() - 1, r[2]); ++x) out.push_back(g.at(x, y));
  }
  return out;
}

inline double probability(const json& j, const char* key, const std::string& ctx, double fallback) {
  double p = field<double>(j, key, ctx, fallback);
  if (!(p >= 0.0 && p <= 1.0)) throw ScenarioError(ctx + "." + key + ": probability must lie in [0,1]");
  return p;
}

inline Grid parse_grid(const json& j) {
  const std::string ctx = "grid";
  const int w = require(j, "width", ctx).get<int>();
  const int h = require(j, "height", ctx).get<int>();
  if (w <= 0 || h <= 0) throw ScenarioError("grid: width and height must be positive");
  std::set<CellId> blocked;
  const int spacing = field<int>(j, "road_spacing", ctx, 0);
  if (spacing < 0) throw ScenarioError("grid.road_spacing: must be non-negative");
  if (spacing > 1)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (x % spacing != 0 && y % spacing != 0) blocked.insert(static_cast<CellId>(y * w + x));
  Grid probe = Grid::lattice(w, h);
  if (j.contains("blocked")) {
    for (const auto& c : j.at("blocked")) {
      auto id = c.get<CellId>();
      check_cell(probe, id, "grid.blocked");
      blocked.insert(id);
    }
  }
  if (j.contains("blocked_rects")) {
    for (const auto& r : j.at("blocked_rects")) {
      json wrapped = {{"rect", r}};
      for (CellId c : cells_of(wrapped, probe, "grid.blocked_rects")) blocked.insert(c);
    }
  }
  if (j.contains("open")) {
    for (const auto& c : j.at("open")) {
      auto id = c.get<CellId>();
      check_cell(probe, id, "grid.open");
      blocked.erase(id);
    }
  }
  std::vector<CellId> bl(blocked.begin(), blocked.end());
  Grid g = Grid::lattice(w, h, bl);
  try {
    if (j.contains("remove_edges"))
      for (const auto& e : j.at("remove_edges")) g.remove_edge(e.at(0).get<CellId>(), e.at(1).get<CellId>());
    if (j.contains("add_edges"))
      for (const auto& e : j.at("add_edges")) g.add_edge(e.at(0).get<CellId>(), e.at(1).get<CellId>());
    g.validate();
  } catch (const WorldError& e) {
    throw ScenarioError(std::string("grid: ") + e.what());
  }
  return g;
}

}  // namespace detail

inline SocialReport parse_report(const nlohmann::json& j, const std::string& ctx) {
  SocialReport r;
  try {
    const auto& src = detail::require(j, "source_id", ctx);
    r.source_id = src.is_string() ? src.get<std::string>() : src.dump();
    r.cell = detail::require(j, "cell", ctx).get<CellId>();
    int state = detail::require(j, "state", ctx).get<int>();
    if (state != 0 && state != 1) throw ScenarioError(ctx + ".state: must be 0 or 1");
    r.state = static_cast<std::uint8_t>(state);
    r.timestamp_min = detail::require(j, "timestamp_min", ctx).get<double>();
    r.deadline_min = detail::require(j, "deadline_min", ctx).get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(ctx + ": " + e.what());
  }
  if (r.timestamp_min < 0.0) throw ScenarioError(ctx + ".timestamp_min: must be non-negative");
  if (!(r.deadline_min > 0.0)) throw ScenarioError(ctx + ".deadline_min: must be positive");
  return r;
}

/// Reads one report per line; blank lines are skipped. Errors carry the
/// line number.
inline std::vector<SocialReport> read_reports(std::istream& in, const std::string& name = "reports") {
  std::vector<SocialReport> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = name + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ScenarioError(ctx + ": " + e.what());
    }
    out.push_back(parse_report(j, ctx));
  }
  return out;
}

inline Scenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::field;
  if (!j.is_object()) throw ScenarioError("scenario: top level must be an object");
  const auto schema = field<std::string>(j, "schema", "scenario", "");
  if (schema != kScenarioSchema)
    throw ScenarioError("scenario.schema: expected '" + std::string(kScenarioSchema) + "', got '" + schema + "'");
  Scenario s;
  s.name = field<std::string>(j, "name", "scenario", "unnamed");
  s.grid = detail::parse_grid(detail::require(j, "grid", "scenario"));
  s.cycles = field<int>(j, "cycles", "scenario", 36);
  s.cycle_length_min = field<double>(j, "cycle_length_min", "scenario", 100.0);
  s.minutes_per_cell = field<double>(j, "minutes_per_cell", "scenario", 2.0);
  if (s.cycles < 1) throw ScenarioError("scenario.cycles: must be at least 1");
  if (!(s.cycle_length_min > 0.0)) throw ScenarioError("scenario.cycle_length_min: must be positive");
  if (!(s.minutes_per_cell > 0.0)) throw ScenarioError("scenario.minutes_per_cell: must be positive");

  if (j.contains("damage")) {
    const auto& d = j.at("damage");
    s.appear = detail::probability(d, "appear", "damage", 0.0);
    s.repair = detail::probability(d, "repair", "damage", 0.0);
    if (d.contains("patches")) {
      int i = 0;
      for (const auto& p : d.at("patches")) {
        const std::string ctx = "damage.patches[" + std::to_string(i++) + "]";
        DamagePatch patch;
        patch.cells = detail::cells_of(p, s.grid, ctx);
        patch.appear = detail::probability(p, "appear", ctx, s.appear);
        patch.repair = detail::probability(p, "repair", ctx, s.repair);
        s.patches.push_back(std::move(patch));
      }
    }
    if (d.contains("random_hazards")) {
      const auto& h = d.at("random_hazards");
      s.hazards.fraction = detail::probability(h, "fraction", "damage.random_hazards", 0.0);
      s.hazards.appear = detail::probability(h, "appear", "damage.random_hazards", 0.0);
      s.hazards.repair = detail::probability(h, "repair", "damage.random_hazards", 0.0);
    }
    if (d.contains("initial")) {
      for (const auto& c : d.at("initial")) {
        auto id = c.get<CellId>();
        if (!s.grid.traversable_cell(id))
          throw ScenarioError("damage.initial: cell " + std::to_string(id) + " is blocked or outside the grid");
        s.initial_damage.push_back(id);
      }
    }
    if (d.contains("schedule")) {
      for (const auto& [key, cells] : d.at("schedule").items()) {
        int cycle = 0;
        try {
          cycle = std::stoi(key);
        } catch (const std::exception&) {
          throw ScenarioError("damage.schedule: key '" + key + "' is not a cycle number");
        }
        auto& v = s.schedule[cycle];
        for (const auto& c : cells) v.push_back(c.get<CellId>());
      }
    }
  }

  if (j.contains("events")) {
    int i = 0;
    for (const auto& e : j.at("events")) {
      const std::string ctx = "events[" + std::to_string(i) + "]";
      GroundTruthEvent ev;
      ev.id = field<int>(e, "id", ctx, i);
      ev.cycle = detail::require(e, "cycle", ctx).get<int>();
      ev.cell = detail::require(e, "cell", ctx).get<CellId>();
      int state = detail::require(e, "state", ctx).get<int>();
      if (state != 0 && state != 1) throw ScenarioError(ctx + ".state: must be 0 or 1");
      ev.state = static_cast<std::uint8_t>(state);
      ev.deadline_min = detail::require(e, "deadline_min", ctx).get<double>();
      try {
        ev.validate(s.grid);
      } catch (const WorldError& err) {
        throw ScenarioError(ctx + ": " + err.what());
      }
      s.events.push_back(ev);
      ++i;
    }
  }
  if (j.contains("reports")) {
    int i = 0;
    for (const auto& r : j.at("reports")) s.reports.push_back(parse_report(r, "reports[" + std::to_string(i++) + "]"));
  }
  if (j.contains("reports_file")) {
    auto path = base_dir / j.at("reports_file").get<std::string>();
    std::ifstream in(path);
    if (!in) throw ScenarioError("reports_file: cannot open " + path.string());
    auto more = read_reports(in, path.filename().string());
    s.reports.insert(s.reports.end(), more.begin(), more.end());
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    const std::string ctx = "generator";
    EventGenerator gen;
    auto range = [&](const char* key, auto& lo, auto& hi) {
      if (!g.contains(key)) return;
      const auto& r = g.at(key);
      if (!r.is_array() || r.size() != 2) throw ScenarioError(ctx + "." + key + ": expected [min, max]");
      lo = r.at(0).get<std::decay_t<decltype(lo)>>();
      hi = r.at(1).get<std::decay_t<decltype(hi)>>();
      if (hi < lo) throw ScenarioError(ctx + "." + key + ": max below min");
    };
    range("events_per_cycle", gen.min_events, gen.max_events);
    range("deadline_min", gen.min_deadline, gen.max_deadline);
    range("long_deadline_min", gen.min_long_deadline, gen.max_long_deadline);
    range("reports_per_event", gen.min_reports, gen.max_reports);
    gen.true_fraction = detail::probability(g, "true_fraction", ctx, gen.true_fraction);
    gen.long_fraction = detail::probability(g, "long_deadline_fraction", ctx, gen.long_fraction);
    if (gen.min_events < 0 || gen.min_reports < 1) throw ScenarioError(ctx + ": counts out of range");
    if (!(gen.min_deadline > 0.0)) throw ScenarioError(ctx + ".deadline_min: must be positive");
    if (g.contains("sources")) {
      gen.sources.clear();
      for (const auto& src : g.at("sources")) {
        SourceGroup sg;
        sg.count = detail::require(src, "count", ctx + ".sources").get<int>();
        sg.reliability = detail::probability(src, "reliability", ctx + ".sources", 0.5);
        if (sg.count < 0) throw ScenarioError(ctx + ".sources: count must be non-negative");
        gen.sources.push_back(sg);
      }
    }
    int total_sources = 0;
    for (const auto& sg : gen.sources) total_sources += sg.count;
    if (total_sources < gen.max_reports) throw ScenarioError(ctx + ": fewer sources than reports_per_event max");
    s.generator = gen;
  }
  if (j.contains("fleet")) {
    const auto& f = j.at("fleet");
    s.fleet.completers = field<int>(f, "completers", "fleet", s.fleet.completers);
    s.fleet.aborters = field<int>(f, "aborters", "fleet", s.fleet.aborters);
    s.fleet.refusers = field<int>(f, "refusers", "fleet", s.fleet.refusers);
    s.fleet.abort_probability = detail::probability(f, "abort_probability", "fleet", s.fleet.abort_probability);
    if (s.fleet.completers < 0 || s.fleet.aborters < 0 || s.fleet.refusers < 0)
      throw ScenarioError("fleet: counts must be non-negative");
  }
  if (s.grid.open_cells().empty()) throw ScenarioError("grid: no open cells");
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(path.string() + ": " + e.what());
  }
  return parse_scenario(j, path.parent_path());
}

/// Draws every seeded element of the scenario.
inline World materialize(const Scenario& s, std::uint64_t seed) {
  World w;
  w.grid = s.grid;
  const std::size_t n = s.grid.size();
  w.damage = DamageProcess::uniform(n, s.appear, s.repair);
  w.damage.schedule = s.schedule;
  Rng layout(seed, Stream::scenario, {1});
  if (s.hazards.fraction > 0.0) {
    for (CellId c : s.grid.open_cells()) {
      if (layout.uniform() < s.hazards.fraction) {
        w.damage.appear[static_cast<std::size_t>(c)] = s.hazards.appear;
        w.damage.repair[static_cast<std::size_t>(c)] = s.hazards.repair;
      }
    }
  }
  for (const auto& p : s.patches) {
    for (CellId c : p.cells) {
      w.damage.appear[static_cast<std::size_t>(c)] = p.appear;
      w.damage.repair[static_cast<std::size_t>(c)] = p.repair;
    }
  }
  try {
    w.damage.validate(s.grid);
  } catch (const WorldError& e) {
    throw ScenarioError(std::string("damage: ") + e.what());
  }
  for (CellId c : s.initial_damage) w.grid.set_damage(c, true);

  w.events = s.events;
  w.reports = s.reports;
  if (s.generator) {
    const auto& g = *s.generator;
    std::vector<std::pair<std::string, double>> sources;
    for (std::size_t gi = 0; gi < g.sources.size(); ++gi)
      for (int k = 0; k < g.sources[gi].count; ++k)
        sources.emplace_back("g" + std::to_string(gi) + "s" + std::to_string(k), g.sources[gi].reliability);
    const auto open = s.grid.open_cells();
    int next_id = 0;
    for (const auto& e : w.events) next_id = std::max(next_id, e.id + 1);
    for (int t = 1; t <= s.cycles; ++t) {
      Rng rng(seed, Stream::scenario, {2, static_cast<std::uint64_t>(t)});
      const int count = std::min(rng.between(g.min_events, g.max_events), static_cast<int>(open.size()));
      std::vector<CellId> cells = open;
      rng.shuffle(std::span<CellId>(cells));
      std::vector<int> order(sources.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      for (int k = 0; k < count; ++k) {
        GroundTruthEvent ev;
        ev.id = next_id++;
        ev.cycle = t;
        ev.cell = cells[static_cast<std::size_t>(k)];
        ev.state = rng.bernoulli(g.true_fraction) ? 1 : 0;
        ev.deadline_min = rng.bernoulli(g.long_fraction) ? rng.uniform(g.min_long_deadline, g.max_long_deadline)
                                                         : rng.uniform(g.min_deadline, g.max_deadline);
        w.events.push_back(ev);
        const int reports = rng.between(g.min_reports, g.max_reports);
        rng.shuffle(std::span<int>(order));
        for (int r = 0; r < reports; ++r) {
          const auto& [src, reliability] = sources[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])];
          SocialReport rep;
          rep.source_id = src;
          rep.cell = ev.cell;
          rep.state = rng.bernoulli(reliability) ? ev.state : static_cast<std::uint8_t>(1 - ev.state);
          rep.timestamp_min = (t - 1) * s.cycle_length_min + rng.uniform() * s.cycle_length_min;
          rep.deadline_min = ev.deadline_min;
          w.reports.push_back(rep);
        }
      }
    }
  }
  return w;
}

}  // namespace dasc
