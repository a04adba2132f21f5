#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "twbn/util.hpp"

namespace twbn {

// Directed graph given by per-vertex parent sets. Vertices are dense ids
// 0..n-1; acyclicity is checked by callers via is_acyclic().
class Dag {
 public:
  Dag() = default;
  explicit Dag(int n) : parents_(static_cast<std::size_t>(n)) {}

  int vertex_count() const { return static_cast<int>(parents_.size()); }

  const std::vector<int>& parents(int v) const {
    return parents_[static_cast<std::size_t>(v)];
  }

  // Stores a sorted copy; rejects self-parents and out-of-range ids.
  void set_parents(int v, std::vector<int> ps) {
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    for (int p : ps) {
      require(p != v, "vertex " + std::to_string(v) + " listed as its own parent");
      require(p >= 0 && p < vertex_count(), "parent id out of range");
    }
    parents_[static_cast<std::size_t>(v)] = std::move(ps);
  }

  std::vector<std::pair<int, int>> arcs() const {
    std::vector<std::pair<int, int>> out;
    for (int v = 0; v < vertex_count(); ++v)
      for (int p : parents(v)) out.emplace_back(p, v);
    return out;
  }

 private:
  std::vector<std::vector<int>> parents_;
};

class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  explicit UndirectedGraph(int n) : adj_(static_cast<std::size_t>(n)) {}

  int vertex_count() const { return static_cast<int>(adj_.size()); }
  int edge_count() const { return edge_count_; }

  bool has_edge(int u, int v) const {
    return adj_[static_cast<std::size_t>(u)].count(v) > 0;
  }

  void add_edge(int u, int v) {
    require(u != v, "self-loop edge rejected");
    require(u >= 0 && v >= 0 && u < vertex_count() && v < vertex_count(),
            "edge endpoint out of range");
    if (has_edge(u, v)) return;
    adj_[static_cast<std::size_t>(u)].insert(v);
    adj_[static_cast<std::size_t>(v)].insert(u);
    ++edge_count_;
  }

  const std::set<int>& neighbors(int v) const {
    return adj_[static_cast<std::size_t>(v)];
  }

  // Edges as (u, v) pairs with u < v, ascending.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int u = 0; u < vertex_count(); ++u)
      for (int v : neighbors(u))
        if (u < v) out.emplace_back(u, v);
    return out;
  }

 private:
  std::vector<std::set<int>> adj_;
  int edge_count_ = 0;
};

// Topological order of d, or nullopt if d has a directed cycle.
inline std::optional<std::vector<int>> topological_order(const Dag& d) {
  const int n = d.vertex_count();
  std::vector<int> missing(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    missing[static_cast<std::size_t>(v)] = static_cast<int>(d.parents(v).size());
    for (int p : d.parents(v)) children[static_cast<std::size_t>(p)].push_back(v);
  }
  std::vector<int> ready, order;
  for (int v = 0; v < n; ++v)
    if (missing[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int c : children[static_cast<std::size_t>(v)])
      if (--missing[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
  }
  if (static_cast<int>(order.size()) != n) return std::nullopt;
  return order;
}

inline bool is_acyclic(const Dag& d) { return topological_order(d).has_value(); }

// Topological order of an explicit arc list over vertices 0..n-1, or nullopt
// on a cycle.
inline std::optional<std::vector<int>> topological_order_of_arcs(
    int n, const std::vector<std::pair<int, int>>& arcs) {
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (auto [u, v] : arcs) {
    ++indeg[static_cast<std::size_t>(v)];
    out[static_cast<std::size_t>(u)].push_back(v);
  }
  std::vector<int> ready, order;
  for (int v = 0; v < n; ++v)
    if (indeg[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int c : out[static_cast<std::size_t>(v)])
      if (--indeg[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
  }
  if (static_cast<int>(order.size()) != n) return std::nullopt;
  return order;
}

// Moralized graph: every arc undirected plus an edge between every pair of
// distinct co-parents of a common child.
inline UndirectedGraph moralize(const Dag& d) {
  UndirectedGraph g(d.vertex_count());
  for (int v = 0; v < d.vertex_count(); ++v) {
    const auto& ps = d.parents(v);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      g.add_edge(ps[i], v);
      for (std::size_t j = i + 1; j < ps.size(); ++j) g.add_edge(ps[i], ps[j]);
    }
  }
  return g;
}

}  // namespace twbn
