#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "twbn/graph.hpp"
#include "twbn/scoring.hpp"
#include "twbn/tree_decomposition.hpp"
#include "twbn/util.hpp"

namespace twbn {

// One admissible parent set of a window vertex: its offset score and the
// virtual arcs it would impose (tails of forced arcs into the vertex).
struct MenuEntry {
  std::vector<int> parents;         // global ids, sorted
  double offset_score = 0.0;        // f' = f_P - f_empty, >= 0
  std::vector<int> forced_sources;  // boundary tails u of imposed arcs (u, v)
  bool incumbent = false;
};

// The exact local problem: a budgeted window of the global decomposition
// with filtered parent-set menus, virtual edges, and conditional virtual
// arcs.
struct Subinstance {
  std::vector<int> selected_bags;
  std::vector<int> vertices;  // V_S, sorted global ids
  std::vector<int> boundary;
  std::vector<int> internal;
  std::vector<std::pair<int, int>> virtual_edges;  // global ids, u < v
  std::vector<std::vector<MenuEntry>> menus;       // aligned with `vertices`
  double alpha = 0.0;             // sum of empty-set scores over the window
  double incumbent_offset = 0.0;  // K_0 in score units

  int size() const { return static_cast<int>(vertices.size()); }

  int local_of(int global) const {
    auto it = std::lower_bound(vertices.begin(), vertices.end(), global);
    if (it == vertices.end() || *it != global) return -1;
    return static_cast<int>(it - vertices.begin());
  }

  int incumbent_index(int local) const {
    const auto& menu = menus[static_cast<std::size_t>(local)];
    for (std::size_t i = 0; i < menu.size(); ++i)
      if (menu[i].incumbent) return static_cast<int>(i);
    fail("menu lacks an incumbent entry");
  }
};

// Grows a connected set of bags breadth-first from a random root while the
// union of bag contents fits the budget; every frontier bag is tried, so the
// result is maximal. Roots whose own bag exceeds the budget are skipped and
// redrawn.
inline std::vector<int> select_subtree(const TreeDecomposition& td, int budget,
                                       Rng& rng) {
  require(td.bag_count() > 0, "decomposition has no bags");
  std::vector<int> roots(static_cast<std::size_t>(td.bag_count()));
  std::iota(roots.begin(), roots.end(), 0);
  rng_shuffle(rng, roots);
  for (int root : roots) {
    if (static_cast<int>(td.bag(root).size()) > budget) continue;
    std::set<int> covered(td.bag(root).begin(), td.bag(root).end());
    std::vector<bool> visited(static_cast<std::size_t>(td.bag_count()), false);
    visited[static_cast<std::size_t>(root)] = true;
    std::vector<int> selected{root};
    std::vector<int> level{root};
    while (!level.empty()) {
      std::vector<int> frontier;
      for (int b : level)
        for (int nb : td.tree_neighbors(b))
          if (!visited[static_cast<std::size_t>(nb)]) {
            visited[static_cast<std::size_t>(nb)] = true;
            frontier.push_back(nb);
          }
      std::sort(frontier.begin(), frontier.end());
      std::vector<int> added;
      for (int b : frontier) {
        std::set<int> trial = covered;
        trial.insert(td.bag(b).begin(), td.bag(b).end());
        if (static_cast<int>(trial.size()) <= budget) {
          covered.swap(trial);
          selected.push_back(b);
          added.push_back(b);
        }
      }
      level.swap(added);
    }
    std::sort(selected.begin(), selected.end());
    return selected;
  }
  fail("budget below max bag size");
}

// Boundary vertices occur in some bag outside the selection; the rest of
// the window is internal.
inline std::pair<std::vector<int>, std::vector<int>> classify_vertices(
    const TreeDecomposition& td, const std::vector<int>& selected) {
  std::set<int> window, outside;
  std::vector<bool> in_sel(static_cast<std::size_t>(td.bag_count()), false);
  for (int b : selected) in_sel[static_cast<std::size_t>(b)] = true;
  for (int b = 0; b < td.bag_count(); ++b) {
    auto& dst = in_sel[static_cast<std::size_t>(b)] ? window : outside;
    dst.insert(td.bag(b).begin(), td.bag(b).end());
  }
  std::vector<int> boundary, internal;
  for (int v : window)
    (outside.count(v) ? boundary : internal).push_back(v);
  return {boundary, internal};
}

// Pairs of boundary vertices that co-occur in a bag outside the selection.
inline std::vector<std::pair<int, int>> virtual_edges(
    const TreeDecomposition& td, const std::vector<int>& selected,
    const std::vector<int>& boundary) {
  std::vector<bool> in_sel(static_cast<std::size_t>(td.bag_count()), false);
  for (int b : selected) in_sel[static_cast<std::size_t>(b)] = true;
  std::set<int> bset(boundary.begin(), boundary.end());
  std::set<std::pair<int, int>> out;
  for (int b = 0; b < td.bag_count(); ++b) {
    if (in_sel[static_cast<std::size_t>(b)]) continue;
    std::vector<int> present;
    for (int v : td.bag(b))
      if (bset.count(v)) present.push_back(v);
    for (std::size_t i = 0; i < present.size(); ++i)
      for (std::size_t j = i + 1; j < present.size(); ++j)
        out.emplace(present[i], present[j]);
  }
  return {out.begin(), out.end()};
}

namespace detail {

// For each boundary vertex, the set of external vertices reachable in the
// unchanged part of D: one arc into an external vertex, then any path
// through external vertices.
inline std::map<int, std::set<int>> external_reach(
    const Dag& dag, const std::set<int>& window, const std::vector<int>& boundary) {
  const int n = dag.vertex_count();
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
  for (auto [u, v] : dag.arcs()) children[static_cast<std::size_t>(u)].push_back(v);
  std::map<int, std::set<int>> reach;
  for (int b : boundary) {
    auto& r = reach[b];
    std::vector<int> stack;
    for (int c : children[static_cast<std::size_t>(b)])
      if (!window.count(c)) stack.push_back(c);
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      if (!r.insert(x).second) continue;
      for (int c : children[static_cast<std::size_t>(x)])
        if (!window.count(c)) stack.push_back(c);
    }
  }
  return reach;
}

}  // namespace detail

// Builds the full local problem for a selected subtree of td. Menus keep a
// cached parent set if it lies inside the window, or if some bag outside
// the selection contains the set together with its child; entries whose
// imposed virtual arcs would include a self-loop are dropped.
inline Subinstance build_subinstance(const ScoreCache& cache,
                                     const TreeDecomposition& td,
                                     const std::vector<int>& selected,
                                     const Dag& dag) {
  require(!selected.empty(), "empty bag selection");
  Subinstance sub;
  sub.selected_bags = selected;
  std::sort(sub.selected_bags.begin(), sub.selected_bags.end());

  std::set<int> window;
  for (int b : sub.selected_bags)
    window.insert(td.bag(b).begin(), td.bag(b).end());
  sub.vertices.assign(window.begin(), window.end());

  auto [boundary, internal] = classify_vertices(td, sub.selected_bags);
  sub.boundary = std::move(boundary);
  sub.internal = std::move(internal);
  sub.virtual_edges = virtual_edges(td, sub.selected_bags, sub.boundary);

  // Adjacent boundary vertices must share a selected bag too.
  for (auto [u, v] : sub.virtual_edges) {
    bool together = false;
    for (int b : sub.selected_bags)
      together = together || (td.bag_contains(b, u) && td.bag_contains(b, v));
    require(together, "virtual edge endpoints share no selected bag");
  }

  const auto reach = detail::external_reach(dag, window, sub.boundary);
  std::vector<bool> in_sel(static_cast<std::size_t>(td.bag_count()), false);
  for (int b : sub.selected_bags) in_sel[static_cast<std::size_t>(b)] = true;

  for (int v : sub.vertices) {
    const double f_empty = cache.empty_set_score(v);
    sub.alpha += f_empty;
    const auto& current = dag.parents(v);
    std::vector<MenuEntry> menu;
    bool incumbent_seen = false;
    for (const auto& e : cache.entries(v)) {
      const bool is_incumbent = e.parents == current;
      std::vector<int> externals;
      for (int p : e.parents)
        if (!window.count(p)) externals.push_back(p);

      MenuEntry entry;
      entry.parents = e.parents;
      entry.incumbent = is_incumbent;
      if (!externals.empty()) {
        bool witnessed = false;
        for (int b = 0; b < td.bag_count() && !witnessed; ++b) {
          if (in_sel[static_cast<std::size_t>(b)]) continue;
          if (!td.bag_contains(b, v)) continue;
          witnessed = std::all_of(e.parents.begin(), e.parents.end(),
                                  [&](int p) { return td.bag_contains(b, p); });
        }
        if (!witnessed) {
          require(!is_incumbent, "incumbent parent set lost its witness bag");
          continue;
        }
        bool self_loop = false;
        for (int u : sub.boundary) {
          const auto& r = reach.at(u);
          const bool hits = std::any_of(externals.begin(), externals.end(),
                                        [&](int x) { return r.count(x) > 0; });
          if (!hits) continue;
          if (u == v)
            self_loop = true;
          else
            entry.forced_sources.push_back(u);
        }
        if (self_loop) {
          require(!is_incumbent, "incumbent parent set implies a self-loop");
          continue;
        }
      }
      entry.offset_score = e.score - f_empty;
      if (is_incumbent && entry.offset_score < 0) {
        // Imported structures may carry sets scoring below the empty set;
        // the incumbent must stay representable, so clamp its offset.
        entry.offset_score = 0.0;
      }
      if (entry.offset_score < 0) continue;
      incumbent_seen = incumbent_seen || is_incumbent;
      menu.push_back(std::move(entry));
    }
    require(incumbent_seen, "current parent set of vertex " + std::to_string(v) +
                                " missing from its menu");
    sub.menus.push_back(std::move(menu));
  }

  // Feasibility of the incumbent: its local arcs plus imposed virtual arcs
  // must be acyclic for K_0 to exist.
  std::vector<std::pair<int, int>> arcs;
  for (int i = 0; i < sub.size(); ++i) {
    const auto& entry = sub.menus[static_cast<std::size_t>(i)]
                                 [static_cast<std::size_t>(sub.incumbent_index(i))];
    sub.incumbent_offset += entry.offset_score;
    for (int p : entry.parents) {
      const int lp = sub.local_of(p);
      if (lp >= 0) arcs.emplace_back(lp, i);
    }
    for (int u : entry.forced_sources) arcs.emplace_back(sub.local_of(u), i);
  }
  require(topological_order_of_arcs(sub.size(), arcs).has_value(),
          "incumbent subinstance is infeasible");
  return sub;
}

inline void dump_subinstance(std::ostream& os, const Subinstance& sub) {
  auto list = [&](const std::vector<int>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i)
      s += (i ? " " : "") + std::to_string(xs[i]);
    return s;
  };
  os << "subinstance bags: " << list(sub.selected_bags) << '\n';
  os << "  vertices: " << list(sub.vertices) << '\n';
  os << "  boundary: " << list(sub.boundary) << '\n';
  os << "  internal: " << list(sub.internal) << '\n';
  os << "  virtual edges:";
  for (auto [u, v] : sub.virtual_edges) os << " {" << u << "," << v << "}";
  os << '\n';
  os << "  alpha: " << sub.alpha << "  incumbent offset: " << sub.incumbent_offset
     << '\n';
  for (int i = 0; i < sub.size(); ++i) {
    const auto& menu = sub.menus[static_cast<std::size_t>(i)];
    os << "  menu of " << sub.vertices[static_cast<std::size_t>(i)] << ": "
       << menu.size() << " sets";
    std::size_t forced = 0;
    for (const auto& e : menu) forced += e.forced_sources.size();
    if (forced > 0) os << " (" << forced << " forced arcs)";
    os << '\n';
  }
}

}  // namespace twbn
