#pragma once

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "twbn/graph.hpp"
#include "twbn/scoring.hpp"
#include "twbn/tree_decomposition.hpp"
#include "twbn/util.hpp"

namespace twbn {

// A (DAG, tree decomposition) pair of moral width <= W, plus its score.
struct InitialSolution {
  Dag dag;
  TreeDecomposition td;
  double score = 0.0;
};

// Incremental k-tree growth: vertices are visited in a seeded-random order;
// each new vertex picks a random existing bag, takes its best-scoring cached
// parent set inside that bag, and opens a new bag of at most W+1 vertices.
// The moral graph stays a subgraph of the k-tree, so the width bound holds
// by construction.
inline InitialSolution greedy_initial(const ScoreCache& cache, int width_bound,
                                      std::uint64_t seed) {
  require(width_bound >= 1, "treewidth bound must be >= 1");
  const int n = cache.variable_count();
  Rng rng(seed);
  std::vector<int> visit(static_cast<std::size_t>(n));
  std::iota(visit.begin(), visit.end(), 0);
  rng_shuffle(rng, visit);

  Dag dag(n);
  TreeDecomposition td;
  std::vector<std::vector<int>> bag_sets;
  for (int i = 0; i < n; ++i) {
    const int v = visit[static_cast<std::size_t>(i)];
    if (i == 0) {
      bag_sets.push_back({v});
      td.add_bag({v});
      continue;
    }
    const int host = rng_int(rng, 0, static_cast<int>(bag_sets.size()) - 1);
    const auto& pool = bag_sets[static_cast<std::size_t>(host)];
    // Entries are sorted by descending score; the first fitting set wins.
    // The new bag holds v plus at most W pool vertices, so a parent set
    // must fit in W vertices as well as in the pool.
    std::vector<int> parents;
    for (const auto& e : cache.entries(v)) {
      if (static_cast<int>(e.parents.size()) > width_bound) continue;
      if (std::includes(pool.begin(), pool.end(), e.parents.begin(), e.parents.end())) {
        parents = e.parents;
        break;
      }
    }
    dag.set_parents(v, parents);
    // New bag: v, its parents, then host-bag filler up to W+1 vertices.
    std::vector<int> bag = parents;
    for (int u : pool) {
      if (static_cast<int>(bag.size()) >= width_bound) break;
      if (!std::binary_search(parents.begin(), parents.end(), u)) bag.push_back(u);
    }
    bag.push_back(v);
    std::sort(bag.begin(), bag.end());
    bag_sets.push_back(bag);
    const int id = td.add_bag(bag);
    td.add_tree_edge(id, host);
  }
  return {dag, td, dag_score(cache, dag)};
}

// One line per vertex: "<v> <- [p1,...,pk] : <score>".
inline void write_dag_file(std::ostream& os, const Dag& dag, const ScoreCache& cache) {
  os << std::setprecision(17);
  for (int v = 0; v < dag.vertex_count(); ++v) {
    os << v << " <- [";
    const auto& ps = dag.parents(v);
    for (std::size_t i = 0; i < ps.size(); ++i) os << (i ? "," : "") << ps[i];
    auto s = cache.score_of(v, ps);
    os << "] : " << (s ? *s : 0.0) << '\n';
  }
}

inline Dag read_dag_file(std::istream& is) {
  std::vector<std::pair<int, std::vector<int>>> lines;
  int max_vertex = -1;
  std::string line;
  while (std::getline(is, line)) {
    if (split_ws(line).empty()) continue;
    const auto arrow = line.find("<-");
    const auto open = line.find('[', arrow == std::string::npos ? 0 : arrow);
    const auto close = line.find(']', open == std::string::npos ? 0 : open);
    require(arrow != std::string::npos && open != std::string::npos &&
                close != std::string::npos,
            "bad DAG file line: " + line);
    const int v = std::stoi(line.substr(0, arrow));
    std::vector<int> parents;
    std::string inner = line.substr(open + 1, close - open - 1);
    for (auto& ch : inner)
      if (ch == ',') ch = ' ';
    for (const auto& tok : split_ws(inner)) parents.push_back(std::stoi(tok));
    max_vertex = std::max(max_vertex, v);
    for (int p : parents) max_vertex = std::max(max_vertex, p);
    lines.emplace_back(v, std::move(parents));
  }
  Dag dag(max_vertex + 1);
  for (auto& [v, ps] : lines) dag.set_parents(v, std::move(ps));
  require(is_acyclic(dag), "DAG file contains a directed cycle");
  return dag;
}

// Wraps an externally produced DAG (and optionally its decomposition) as an
// initial solution. Parent sets absent from the cache are scored from data
// when available; without data they are a hard error. A decomposition is
// derived by min-fill elimination when none is supplied.
inline InitialSolution import_initial(const Dag& dag,
                                      const std::optional<TreeDecomposition>& td_in,
                                      ScoreCache& cache, int width_bound,
                                      const Dataset* data = nullptr,
                                      double score_resolution = 1e-3) {
  require(dag.vertex_count() == cache.variable_count(),
          "DAG and cache disagree on the number of variables");
  for (int v = 0; v < dag.vertex_count(); ++v) {
    if (cache.score_of(v, dag.parents(v)).has_value()) continue;
    require(data != nullptr, "parent set of variable " + std::to_string(v) +
                                 " is not in the cache and no data is available "
                                 "to score it");
    cache.insert_entry(v, dag.parents(v),
                       snap_score(bic_score(*data, v, dag.parents(v)), score_resolution));
  }

  const auto moral = moralize(dag);
  TreeDecomposition td;
  if (td_in.has_value()) {
    td = *td_in;
    auto rep = validate_td(td, moral);
    require(rep.ok, "supplied decomposition is invalid: " +
                        (rep.violations.empty() ? "" : rep.violations.front()));
  } else {
    td = td_from_elimination(min_fill_ordering(moral), moral);
  }
  require(td.width() <= width_bound, "initial solution exceeds treewidth bound");
  return {dag, td, dag_score(cache, dag)};
}

}  // namespace twbn
