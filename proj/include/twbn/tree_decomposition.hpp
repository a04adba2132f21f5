#pragma once

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "twbn/graph.hpp"
#include "twbn/util.hpp"

namespace twbn {

// order[i] = vertex eliminated at position i.
struct EliminationOrdering {
  std::vector<int> order;

  // position[v] = index of v in order.
  std::vector<int> positions() const {
    std::vector<int> pos(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      pos[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
    return pos;
  }

  bool is_permutation_of(int n) const {
    if (static_cast<int>(order.size()) != n) return false;
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int v : order) {
      if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)]) return false;
      seen[static_cast<std::size_t>(v)] = true;
    }
    return true;
  }
};

class TreeDecomposition {
 public:
  int add_bag(std::vector<int> vertices) {
    std::sort(vertices.begin(), vertices.end());
    vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
    bags_.push_back(std::move(vertices));
    tree_.emplace_back();
    return static_cast<int>(bags_.size()) - 1;
  }

  void add_tree_edge(int a, int b) {
    require(a != b && a >= 0 && b >= 0 && a < bag_count() && b < bag_count(),
            "bad tree edge");
    tree_[static_cast<std::size_t>(a)].push_back(b);
    tree_[static_cast<std::size_t>(b)].push_back(a);
  }

  int bag_count() const { return static_cast<int>(bags_.size()); }

  const std::vector<int>& bag(int id) const {
    return bags_[static_cast<std::size_t>(id)];
  }

  const std::vector<int>& tree_neighbors(int id) const {
    return tree_[static_cast<std::size_t>(id)];
  }

  int width() const {
    int m = 0;
    for (const auto& b : bags_) m = std::max(m, static_cast<int>(b.size()));
    return m - 1;
  }

  bool bag_contains(int id, int v) const {
    const auto& b = bag(id);
    return std::binary_search(b.begin(), b.end(), v);
  }

  std::vector<std::pair<int, int>> tree_edges() const {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < bag_count(); ++a)
      for (int b : tree_neighbors(a))
        if (a < b) out.emplace_back(a, b);
    return out;
  }

 private:
  std::vector<std::vector<int>> bags_;
  std::vector<std::vector<int>> tree_;
};

struct TdReport {
  bool ok = true;
  std::vector<std::string> violations;

  void flag(const std::string& v) {
    ok = false;
    violations.push_back(v);
  }
};

// Checks that td is a tree and satisfies T1 (edge coverage) and T2
// (connected, non-empty occurrence) w.r.t. g. Reports all violations.
inline TdReport validate_td(const TreeDecomposition& td, const UndirectedGraph& g) {
  const int n = g.vertex_count();
  for (int b = 0; b < td.bag_count(); ++b)
    for (int v : td.bag(b))
      require(v >= 0 && v < n, "bag vertex " + std::to_string(v) +
                                   " outside the graph's vertex universe");
  TdReport rep;
  if (td.bag_count() == 0) {
    if (n > 0) rep.flag("decomposition has no bags");
    return rep;
  }

  // Tree shape: connected with exactly bag_count-1 edges.
  int edge_total = 0;
  for (int b = 0; b < td.bag_count(); ++b)
    edge_total += static_cast<int>(td.tree_neighbors(b).size());
  edge_total /= 2;
  std::vector<bool> reached(static_cast<std::size_t>(td.bag_count()), false);
  std::vector<int> stack{0};
  reached[0] = true;
  int reach_count = 1;
  while (!stack.empty()) {
    int b = stack.back();
    stack.pop_back();
    for (int c : td.tree_neighbors(b))
      if (!reached[static_cast<std::size_t>(c)]) {
        reached[static_cast<std::size_t>(c)] = true;
        ++reach_count;
        stack.push_back(c);
      }
  }
  if (reach_count != td.bag_count()) rep.flag("tree is not connected");
  if (edge_total != td.bag_count() - 1)
    rep.flag("tree has " + std::to_string(edge_total) + " edges, expected " +
             std::to_string(td.bag_count() - 1));

  // T1: every edge of g inside some bag.
  for (auto [u, v] : g.edges()) {
    bool covered = false;
    for (int b = 0; b < td.bag_count() && !covered; ++b)
      covered = td.bag_contains(b, u) && td.bag_contains(b, v);
    if (!covered)
      rep.flag("T1: edge {" + std::to_string(u) + "," + std::to_string(v) +
               "} not covered by any bag");
  }

  // T2: for every vertex, the occurrence bags induce a non-empty subtree.
  for (int v = 0; v < n; ++v) {
    std::vector<int> occ;
    for (int b = 0; b < td.bag_count(); ++b)
      if (td.bag_contains(b, v)) occ.push_back(b);
    if (occ.empty()) {
      rep.flag("T2: vertex " + std::to_string(v) + " occurs in no bag");
      continue;
    }
    std::set<int> occ_set(occ.begin(), occ.end());
    std::vector<int> frontier{occ.front()};
    std::set<int> seen{occ.front()};
    while (!frontier.empty()) {
      int b = frontier.back();
      frontier.pop_back();
      for (int c : td.tree_neighbors(b))
        if (occ_set.count(c) && !seen.count(c)) {
          seen.insert(c);
          frontier.push_back(c);
        }
    }
    if (seen.size() != occ_set.size())
      rep.flag("T2: occurrence of vertex " + std::to_string(v) +
               " is disconnected");
  }
  return rep;
}

namespace detail {

// Plays the elimination game on a copy of g. Returns per-vertex higher
// neighborhoods (at elimination time, fill edges included).
inline std::vector<std::vector<int>> elimination_neighborhoods(
    const EliminationOrdering& order, const UndirectedGraph& g) {
  const int n = g.vertex_count();
  require(order.is_permutation_of(n), "ordering is not a permutation of the vertices");
  std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
  for (auto [u, v] : g.edges()) {
    adj[static_cast<std::size_t>(u)].insert(v);
    adj[static_cast<std::size_t>(v)].insert(u);
  }
  const auto pos = order.positions();
  std::vector<std::vector<int>> higher(static_cast<std::size_t>(n));
  for (int v : order.order) {
    auto& hv = higher[static_cast<std::size_t>(v)];
    for (int u : adj[static_cast<std::size_t>(v)])
      if (pos[static_cast<std::size_t>(u)] > pos[static_cast<std::size_t>(v)])
        hv.push_back(u);
    std::sort(hv.begin(), hv.end());
    for (std::size_t i = 0; i < hv.size(); ++i)
      for (std::size_t j = i + 1; j < hv.size(); ++j) {
        adj[static_cast<std::size_t>(hv[i])].insert(hv[j]);
        adj[static_cast<std::size_t>(hv[j])].insert(hv[i]);
      }
  }
  return higher;
}

}  // namespace detail

// Width of the elimination game: max number of higher-ordered neighbors of
// any vertex in the fill-in closure of g under the given ordering.
inline int width_of_elimination(const EliminationOrdering& order,
                                const UndirectedGraph& g) {
  int w = 0;
  for (const auto& hv : detail::elimination_neighborhoods(order, g))
    w = std::max(w, static_cast<int>(hv.size()));
  return w;
}

// Tree decomposition from an elimination ordering: bag(v) = {v} plus v's
// higher fill-in neighbors, bag(v) attached to bag(first-eliminated higher
// neighbor). Bags without a higher neighbor attach to the root bag (the
// last-eliminated vertex's bag).
inline TreeDecomposition td_from_elimination(const EliminationOrdering& order,
                                             const UndirectedGraph& g) {
  const int n = g.vertex_count();
  const auto higher = detail::elimination_neighborhoods(order, g);
  const auto pos = order.positions();
  TreeDecomposition td;
  std::vector<int> bag_of(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    std::vector<int> b = higher[static_cast<std::size_t>(v)];
    b.push_back(v);
    bag_of[static_cast<std::size_t>(v)] = td.add_bag(std::move(b));
  }
  if (n == 0) return td;
  const int root = bag_of[static_cast<std::size_t>(order.order.back())];
  for (int v = 0; v < n; ++v) {
    const auto& hv = higher[static_cast<std::size_t>(v)];
    if (hv.empty()) {
      if (bag_of[static_cast<std::size_t>(v)] != root)
        td.add_tree_edge(bag_of[static_cast<std::size_t>(v)], root);
      continue;
    }
    int first = hv.front();
    for (int u : hv)
      if (pos[static_cast<std::size_t>(u)] < pos[static_cast<std::size_t>(first)])
        first = u;
    td.add_tree_edge(bag_of[static_cast<std::size_t>(v)],
                     bag_of[static_cast<std::size_t>(first)]);
  }
  return td;
}

// Min-fill ordering heuristic; ties broken by smallest vertex id.
inline EliminationOrdering min_fill_ordering(const UndirectedGraph& g) {
  const int n = g.vertex_count();
  std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
  for (auto [u, v] : g.edges()) {
    adj[static_cast<std::size_t>(u)].insert(v);
    adj[static_cast<std::size_t>(v)].insert(u);
  }
  std::vector<bool> gone(static_cast<std::size_t>(n), false);
  EliminationOrdering out;
  for (int step = 0; step < n; ++step) {
    int best = -1;
    long best_fill = -1;
    for (int v = 0; v < n; ++v) {
      if (gone[static_cast<std::size_t>(v)]) continue;
      long fill = 0;
      const auto& nb = adj[static_cast<std::size_t>(v)];
      for (auto it = nb.begin(); it != nb.end(); ++it)
        for (auto jt = std::next(it); jt != nb.end(); ++jt)
          if (!adj[static_cast<std::size_t>(*it)].count(*jt)) ++fill;
      if (best == -1 || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    const auto nb = adj[static_cast<std::size_t>(best)];
    for (auto it = nb.begin(); it != nb.end(); ++it)
      for (auto jt = std::next(it); jt != nb.end(); ++jt) {
        adj[static_cast<std::size_t>(*it)].insert(*jt);
        adj[static_cast<std::size_t>(*jt)].insert(*it);
      }
    for (int u : nb) adj[static_cast<std::size_t>(u)].erase(best);
    adj[static_cast<std::size_t>(best)].clear();
    gone[static_cast<std::size_t>(best)] = true;
    out.order.push_back(best);
  }
  return out;
}

// PACE 2017 .td format. Bag ids and vertices are 1-indexed on disk.
inline void write_td(std::ostream& os, const TreeDecomposition& td, int n_vertices) {
  os << "s td " << td.bag_count() << ' ' << td.width() + 1 << ' ' << n_vertices
     << '\n';
  for (int b = 0; b < td.bag_count(); ++b) {
    os << "b " << b + 1;
    for (int v : td.bag(b)) os << ' ' << v + 1;
    os << '\n';
  }
  for (auto [a, b] : td.tree_edges()) os << a + 1 << ' ' << b + 1 << '\n';
}

struct ParsedTd {
  TreeDecomposition td;
  int declared_vertices = 0;
};

inline ParsedTd read_td(std::istream& is) {
  ParsedTd out;
  std::string line;
  int declared_bags = -1;
  std::vector<std::vector<int>> bags;
  std::vector<std::pair<int, int>> edges;
  while (std::getline(is, line)) {
    auto toks = split_ws(line);
    if (toks.empty() || toks[0] == "c") continue;
    if (toks[0] == "s") {
      require(toks.size() >= 5 && toks[1] == "td", "bad .td header");
      declared_bags = std::stoi(toks[2]);
      out.declared_vertices = std::stoi(toks[4]);
      bags.assign(static_cast<std::size_t>(declared_bags), {});
    } else if (toks[0] == "b") {
      require(declared_bags >= 0, ".td bag line before header");
      int id = std::stoi(toks[1]);
      require(id >= 1 && id <= declared_bags, ".td bag id out of range");
      std::vector<int> vs;
      for (std::size_t i = 2; i < toks.size(); ++i)
        vs.push_back(std::stoi(toks[i]) - 1);
      bags[static_cast<std::size_t>(id - 1)] = std::move(vs);
    } else {
      require(declared_bags >= 0 && toks.size() == 2, "bad .td edge line");
      edges.emplace_back(std::stoi(toks[0]) - 1, std::stoi(toks[1]) - 1);
    }
  }
  require(declared_bags >= 0, ".td file missing header");
  for (auto& b : bags) out.td.add_bag(std::move(b));
  for (auto [a, b] : edges) out.td.add_tree_edge(a, b);
  return out;
}

}  // namespace twbn
