#pragma once

#include <algorithm>
#include <cstdlib>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dasc/rng.hpp"

namespace dasc {

using CellId = std::int32_t;
inline constexpr CellId kNoCell = -1;

class WorldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One sensing cell. Accessibility lives in scouting::AccessibilityMap; the
/// cell only carries ground truth and bookkeeping.
struct SensingCell {
  CellId id = kNoCell;
  std::uint8_t damage = 0;  // 1 = impassable this cycle
  std::optional<int> last_visited_cycle;
};

/// Grid of sensing cells plus the undirected road graph between traversable
/// cells. Blocked cells exist as indices but have no edges and never carry
/// damage.
class Grid {
 public:
  Grid() = default;

  /// A width x height grid, 4-connected between non-blocked cells.
  static Grid lattice(int width, int height, std::span<const CellId> blocked = {}) {
    if (width <= 0 || height <= 0) throw WorldError("grid dimensions must be positive");
    Grid g;
    g.width_ = width;
    g.height_ = height;
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    g.cells_.resize(n);
    g.blocked_.assign(n, false);
    g.adj_.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.cells_[i].id = static_cast<CellId>(i);
    for (CellId b : blocked) {
      if (!g.contains(b)) throw WorldError("blocked cell " + std::to_string(b) + " outside grid");
      g.blocked_[static_cast<std::size_t>(b)] = true;
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        CellId c = g.at(x, y);
        if (x + 1 < width) g.try_link(c, g.at(x + 1, y));
        if (y + 1 < height) g.try_link(c, g.at(x, y + 1));
      }
    }
    return g;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return cells_.size(); }

  CellId at(int x, int y) const { return static_cast<CellId>(y * width_ + x); }
  int x_of(CellId c) const { return c % width_; }
  int y_of(CellId c) const { return c / width_; }

  bool contains(CellId c) const { return c >= 0 && static_cast<std::size_t>(c) < cells_.size(); }
  bool blocked(CellId c) const { return blocked_[static_cast<std::size_t>(c)]; }
  bool traversable_cell(CellId c) const { return contains(c) && !blocked(c); }

  std::span<const CellId> neighbors(CellId c) const { return adj_[static_cast<std::size_t>(c)]; }

  bool adjacent(CellId a, CellId b) const {
    auto n = neighbors(a);
    return std::find(n.begin(), n.end(), b) != n.end();
  }

  const SensingCell& cell(CellId c) const { return cells_[static_cast<std::size_t>(c)]; }
  SensingCell& cell(CellId c) { return cells_[static_cast<std::size_t>(c)]; }

  bool damaged(CellId c) const { return cell(c).damage != 0; }
  void set_damage(CellId c, bool d) {
    if (blocked(c)) return;
    cell(c).damage = d ? 1 : 0;
  }

  std::vector<std::uint8_t> damage_vector() const {
    std::vector<std::uint8_t> d(size());
    for (std::size_t i = 0; i < size(); ++i) d[i] = cells_[i].damage;
    return d;
  }

  std::vector<CellId> blocked_cells() const {
    std::vector<CellId> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (blocked_[i]) out.push_back(static_cast<CellId>(i));
    return out;
  }

  std::vector<CellId> open_cells() const {
    std::vector<CellId> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (!blocked_[i]) out.push_back(static_cast<CellId>(i));
    return out;
  }

  std::size_t edge_count() const {
    std::size_t e = 0;
    for (const auto& a : adj_) e += a.size();
    return e / 2;
  }

  void add_edge(CellId a, CellId b) {
    if (!traversable_cell(a) || !traversable_cell(b) || a == b)
      throw WorldError("edge override references invalid cell pair " + std::to_string(a) + "-" + std::to_string(b));
    if (!adjacent(a, b)) {
      link(a, b);
      if (std::abs(x_of(a) - x_of(b)) + std::abs(y_of(a) - y_of(b)) != 1) long_edges_ = true;
    }
  }

  /// True when some edge joins cells that are not lattice neighbours, which
  /// makes Manhattan distance an inadmissible A* heuristic.
  bool has_long_edges() const { return long_edges_; }

  void remove_edge(CellId a, CellId b) {
    if (!contains(a) || !contains(b)) throw WorldError("edge removal references missing cell");
    auto drop = [](std::vector<CellId>& v, CellId x) { v.erase(std::remove(v.begin(), v.end(), x), v.end()); };
    drop(adj_[static_cast<std::size_t>(a)], b);
    drop(adj_[static_cast<std::size_t>(b)], a);
  }

  /// Checks the structural invariants; throws WorldError on violation.
  void validate() const {
    for (std::size_t i = 0; i < size(); ++i) {
      const auto c = static_cast<CellId>(i);
      for (CellId n : adj_[i]) {
        if (!contains(n)) throw WorldError("adjacency references missing cell");
        if (blocked(c) || blocked(n)) throw WorldError("adjacency touches a blocked cell");
        if (!adjacent(n, c)) throw WorldError("adjacency is not symmetric");
      }
      if (cells_[i].damage > 1) throw WorldError("damage must be 0 or 1");
    }
  }

 private:
  void try_link(CellId a, CellId b) {
    if (!blocked(a) && !blocked(b)) link(a, b);
  }
  void link(CellId a, CellId b) {
    adj_[static_cast<std::size_t>(a)].push_back(b);
    adj_[static_cast<std::size_t>(b)].push_back(a);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<SensingCell> cells_;
  std::vector<bool> blocked_;
  std::vector<std::vector<CellId>> adj_;
  bool long_edges_ = false;
};

/// Synthetic damage dynamics. Cycles listed in `schedule` replace the whole
/// damage state with the listed set; other cycles sample per cell.
struct DamageProcess {
  std::vector<double> appear;  // per cell, probability an undamaged cell becomes damaged
  std::vector<double> repair;  // per cell, probability a damaged cell is repaired
  std::map<int, std::vector<CellId>> schedule;

  static DamageProcess uniform(std::size_t cells, double appear_p, double repair_p) {
    DamageProcess p;
    p.appear.assign(cells, appear_p);
    p.repair.assign(cells, repair_p);
    return p;
  }

  void validate(const Grid& grid) const {
    if (appear.size() != grid.size() || repair.size() != grid.size())
      throw WorldError("damage process size does not match grid");
    for (std::size_t i = 0; i < appear.size(); ++i) {
      if (!(appear[i] >= 0.0 && appear[i] <= 1.0) || !(repair[i] >= 0.0 && repair[i] <= 1.0))
        throw WorldError("damage probabilities must lie in [0,1] (cell " + std::to_string(i) + ")");
    }
    for (const auto& [cycle, cells] : schedule) {
      for (CellId c : cells)
        if (!grid.traversable_cell(c))
          throw WorldError("damage schedule at cycle " + std::to_string(cycle) + " references invalid cell " +
                           std::to_string(c));
    }
  }
};

/// Advances the ground-truth damage to `cycle`. Deterministic in (seed, cycle).
inline Grid step_damage(Grid grid, const DamageProcess& process, int cycle, std::uint64_t seed) {
  if (auto it = process.schedule.find(cycle); it != process.schedule.end()) {
    for (CellId c : grid.open_cells()) grid.set_damage(c, false);
    for (CellId c : it->second) grid.set_damage(c, true);
    return grid;
  }
  Rng rng(seed, Stream::damage, {static_cast<std::uint64_t>(cycle)});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto c = static_cast<CellId>(i);
    // Draw for every cell so one cell's probability never shifts another's draw.
    const double u = rng.uniform();
    if (grid.blocked(c)) continue;
    if (grid.damaged(c)) {
      if (u < process.repair[i]) grid.set_damage(c, false);
    } else if (u < process.appear[i]) {
      grid.set_damage(c, true);
    }
  }
  return grid;
}

/// Which cells a traveller may enter. Blocked cells are always excluded.
struct PassableView {
  const Grid* grid = nullptr;
  std::span<const std::uint8_t> avoid;  // 1 = treat as impassable; empty = no extra restriction

  bool operator()(CellId c) const {
    if (grid->blocked(c)) return false;
    return avoid.empty() || avoid[static_cast<std::size_t>(c)] == 0;
  }
};

inline constexpr int kUnreachable = -1;

/// Hop distances from `from` to every cell; kUnreachable where no path exists.
/// The source itself is always at distance 0.
template <class Passable>
std::vector<int> bfs_distances(const Grid& grid, CellId from, Passable&& passable) {
  std::vector<int> dist(grid.size(), kUnreachable);
  if (!grid.contains(from)) return dist;
  std::deque<CellId> queue{from};
  dist[static_cast<std::size_t>(from)] = 0;
  while (!queue.empty()) {
    CellId c = queue.front();
    queue.pop_front();
    for (CellId n : grid.neighbors(c)) {
      auto& d = dist[static_cast<std::size_t>(n)];
      if (d != kUnreachable || !passable(n)) continue;
      d = dist[static_cast<std::size_t>(c)] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

/// Minimum hop count avoiding damaged cells (ground truth, or `known_damage`
/// when given). nullopt when unreachable, including when an endpoint is
/// itself impassable.
inline std::optional<int> shortest_distance(const Grid& grid, CellId from, CellId to,
                                            std::span<const std::uint8_t> known_damage = {}) {
  if (!grid.contains(from) || !grid.contains(to)) throw WorldError("shortest_distance: cell out of range");
  if (from == to) return 0;
  std::vector<std::uint8_t> truth;
  if (known_damage.empty()) {
    truth = grid.damage_vector();
    known_damage = truth;
  }
  PassableView view{&grid, known_damage};
  if (!view(to)) return std::nullopt;
  auto dist = bfs_distances(grid, from, view);
  int d = dist[static_cast<std::size_t>(to)];
  if (d == kUnreachable) return std::nullopt;
  return d;
}

/// One shortest path (cell list, from..to) under `passable`; empty if none.
template <class Passable>
std::vector<CellId> shortest_path(const Grid& grid, CellId from, CellId to, Passable&& passable) {
  if (from == to) return {from};
  if (!passable(to)) return {};
  std::vector<CellId> parent(grid.size(), kNoCell);
  std::vector<bool> seen(grid.size(), false);
  std::deque<CellId> queue{from};
  seen[static_cast<std::size_t>(from)] = true;
  while (!queue.empty()) {
    CellId c = queue.front();
    queue.pop_front();
    if (c == to) break;
    for (CellId n : grid.neighbors(c)) {
      if (seen[static_cast<std::size_t>(n)] || !passable(n)) continue;
      seen[static_cast<std::size_t>(n)] = true;
      parent[static_cast<std::size_t>(n)] = c;
      queue.push_back(n);
    }
  }
  if (!seen[static_cast<std::size_t>(to)]) return {};
  std::vector<CellId> path;
  for (CellId c = to; c != kNoCell; c = parent[static_cast<std::size_t>(c)]) path.push_back(c);
  std::reverse(path.begin(), path.end());
  return path;
}

struct GroundTruthEvent {
  int id = 0;
  int cycle = 1;  // report cycle t
  CellId cell = kNoCell;
  std::uint8_t state = 0;  // E_{t,n}
  double deadline_min = 0.0;

  void validate(const Grid& grid) const {
    if (!(deadline_min > 0.0)) throw WorldError("event " + std::to_string(id) + ": deadline must be positive");
    if (!grid.traversable_cell(cell))
      throw WorldError("event " + std::to_string(id) + ": cell " + std::to_string(cell) + " is not a valid open cell");
    if (state > 1) throw WorldError("event " + std::to_string(id) + ": state must be 0 or 1");
  }
};

}  // namespace dasc
