#pragma once

// Yen's k shortest loopless paths on the unit-weight road graph.

#include <algorithm>
#include <deque>
#include <set>
#include <vector>

#include "dasc/scouting.hpp"
#include "dasc/world.hpp"

namespace dasc {

using Path = std::vector<CellId>;

namespace detail {

template <class Passable>
Path bfs_path_excluding(const Grid& grid, CellId from, CellId to, const Passable& passable,
                        const std::vector<bool>& removed_nodes, const std::set<Edge>& removed_edges) {
  if (from == to) return {from};
  std::vector<CellId> parent(grid.size(), kNoCell);
  std::vector<bool> seen(grid.size(), false);
  std::deque<CellId> q{from};
  seen[static_cast<std::size_t>(from)] = true;
  while (!q.empty()) {
    CellId c = q.front();
    q.pop_front();
    for (CellId n : grid.neighbors(c)) {
      const auto ni = static_cast<std::size_t>(n);
      if (seen[ni] || removed_nodes[ni] || !passable(n) || removed_edges.count(make_edge(c, n))) continue;
      seen[ni] = true;
      parent[ni] = c;
      if (n == to) {
        Path p;
        for (CellId x = to; x != kNoCell; x = parent[static_cast<std::size_t>(x)]) {
          p.push_back(x);
          if (x == from) break;
        }
        std::reverse(p.begin(), p.end());
        return p;
      }
      q.push_back(n);
    }
  }
  return {};
}

struct ShorterPath {
  bool operator()(const Path& a, const Path& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

}  // namespace detail

/// Up to k loopless paths from `from` to `to`, shortest first (ties broken by
/// cell sequence), each with at most `max_hops` moves. Cells rejected by
/// `passable` are never entered; the source itself is always allowed.
template <class Passable>
std::vector<Path> k_shortest_paths(const Grid& grid, CellId from, CellId to, std::size_t k, const Passable& passable,
                                   std::size_t max_hops = static_cast<std::size_t>(-1)) {
  std::vector<Path> result;
  if (k == 0 || !grid.contains(from) || !grid.contains(to)) return result;
  if (from == to) {
    result.push_back({from});
    return result;
  }
  if (!passable(to)) return result;
  std::vector<bool> removed(grid.size(), false);
  std::set<Edge> removed_edges;
  Path first = detail::bfs_path_excluding(grid, from, to, passable, removed, removed_edges);
  if (first.empty() || first.size() - 1 > max_hops) return result;
  result.push_back(std::move(first));

  std::set<Path, detail::ShorterPath> candidates;
  while (result.size() < k) {
    const Path& last = result.back();
    for (std::size_t i = 0; i + 1 < last.size(); ++i) {
      const CellId spur = last[i];
      Path root(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      removed_edges.clear();
      std::fill(removed.begin(), removed.end(), false);
      for (const auto& p : result)
        if (p.size() > i + 1 && std::equal(root.begin(), root.end(), p.begin()))
          removed_edges.insert(make_edge(p[i], p[i + 1]));
      for (std::size_t j = 0; j < i; ++j) removed[static_cast<std::size_t>(root[j])] = true;
      Path spur_path = detail::bfs_path_excluding(grid, spur, to, passable, removed, removed_edges);
      if (spur_path.empty()) continue;
      Path total = root;
      total.insert(total.end(), spur_path.begin() + 1, spur_path.end());
      if (total.size() - 1 > max_hops) continue;
      if (std::find(result.begin(), result.end(), total) == result.end()) candidates.insert(std::move(total));
    }
    if (candidates.empty()) break;
    result.push_back(*candidates.begin());
    candidates.erase(candidates.begin());
  }
  return result;
}

}  // namespace dasc
