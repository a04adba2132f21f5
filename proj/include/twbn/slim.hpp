#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "twbn/initial_solution.hpp"
#include "twbn/maxsat.hpp"
#include "twbn/scoring.hpp"
#include "twbn/solver.hpp"
#include "twbn/subinstance.hpp"
#include "twbn/util.hpp"

namespace twbn {

struct VerifyReport {
  bool ok = true;
  std::vector<std::string> violations;

  void flag(const std::string& v) {
    ok = false;
    violations.push_back(v);
  }
};

// Independent re-check of the local solution conditions: local acyclicity,
// the width bound with its certifying decomposition over the extended moral
// graph, witness bags for external parents, and acyclicity under imposed
// virtual arcs. Nothing here trusts the encoder.
inline VerifyReport verify_local(const TreeDecomposition& td, const Subinstance& sub,
                                 const DecodedLocal& local, int width_bound) {
  VerifyReport rep;
  const int n = sub.size();
  const auto parents = local_parent_sets(sub, local.choice);

  std::vector<std::pair<int, int>> local_arcs;
  for (int v = 0; v < n; ++v)
    for (int u : parents[static_cast<std::size_t>(v)]) local_arcs.emplace_back(u, v);
  if (!topological_order_of_arcs(n, local_arcs).has_value())
    rep.flag("C1: local DAG has a directed cycle");

  std::vector<std::pair<int, int>> fortified = local_arcs;
  for (int v = 0; v < n; ++v) {
    const auto& entry = sub.menus[static_cast<std::size_t>(v)]
                                 [static_cast<std::size_t>(local.choice[static_cast<std::size_t>(v)])];
    for (int gu : entry.forced_sources)
      fortified.emplace_back(sub.local_of(gu), v);
  }
  if (!topological_order_of_arcs(n, fortified).has_value())
    rep.flag("C5: cycle through imposed virtual arcs");

  UndirectedGraph ext_moral(n);
  for (auto [gu, gv] : sub.virtual_edges)
    ext_moral.add_edge(sub.local_of(gu), sub.local_of(gv));
  for (int v = 0; v < n; ++v) {
    const auto& ps = parents[static_cast<std::size_t>(v)];
    for (std::size_t i = 0; i < ps.size(); ++i) {
      ext_moral.add_edge(ps[i], v);
      for (std::size_t j = i + 1; j < ps.size(); ++j) ext_moral.add_edge(ps[i], ps[j]);
    }
  }
  if (local.local_td.width() > width_bound)
    rep.flag("C2: certifying decomposition exceeds width " +
             std::to_string(width_bound));
  auto td_rep = validate_td(local.local_td, ext_moral);
  if (!td_rep.ok)
    rep.flag("C3: not a decomposition of the extended moral graph (" +
             td_rep.violations.front() + ")");

  std::vector<bool> in_sel(static_cast<std::size_t>(td.bag_count()), false);
  for (int b : sub.selected_bags) in_sel[static_cast<std::size_t>(b)] = true;
  for (int v = 0; v < n; ++v) {
    const auto& entry = sub.menus[static_cast<std::size_t>(v)]
                                 [static_cast<std::size_t>(local.choice[static_cast<std::size_t>(v)])];
    const int gv = sub.vertices[static_cast<std::size_t>(v)];
    bool has_external = false;
    for (int gp : entry.parents) has_external = has_external || sub.local_of(gp) < 0;
    if (!has_external) continue;
    bool witnessed = false;
    for (int b = 0; b < td.bag_count() && !witnessed; ++b) {
      if (in_sel[static_cast<std::size_t>(b)]) continue;
      if (!td.bag_contains(b, gv)) continue;
      witnessed = std::all_of(entry.parents.begin(), entry.parents.end(),
                              [&](int gp) { return td.bag_contains(b, gp); });
    }
    if (!witnessed)
      rep.flag("C4: no outside bag witnesses the parents of vertex " +
               std::to_string(gv));
  }
  return rep;
}

struct MergeResult {
  Dag dag;
  TreeDecomposition td;
  double score = 0.0;
  double score_delta = 0.0;
};

// Stitches an accepted local solution back into the global pair: the local
// decomposition replaces the selected subtree, and each remaining component
// hangs off a local bag that contains its boundary clique.
inline MergeResult merge(const ScoreCache& cache, const Dag& dag,
                         const TreeDecomposition& td, double current_score,
                         const Subinstance& sub, const DecodedLocal& local) {
  MergeResult out;
  out.dag = dag;
  for (int v = 0; v < sub.size(); ++v) {
    const auto& entry = sub.menus[static_cast<std::size_t>(v)]
                                 [static_cast<std::size_t>(local.choice[static_cast<std::size_t>(v)])];
    out.dag.set_parents(sub.vertices[static_cast<std::size_t>(v)], entry.parents);
  }

  std::vector<bool> in_sel(static_cast<std::size_t>(td.bag_count()), false);
  for (int b : sub.selected_bags) in_sel[static_cast<std::size_t>(b)] = true;

  // Local bags, remapped to global vertex ids.
  TreeDecomposition merged;
  std::vector<int> local_bag_id(static_cast<std::size_t>(local.local_td.bag_count()));
  for (int b = 0; b < local.local_td.bag_count(); ++b) {
    std::vector<int> bag;
    for (int lv : local.local_td.bag(b))
      bag.push_back(sub.vertices[static_cast<std::size_t>(lv)]);
    local_bag_id[static_cast<std::size_t>(b)] = merged.add_bag(std::move(bag));
  }
  for (auto [a, b] : local.local_td.tree_edges())
    merged.add_tree_edge(local_bag_id[static_cast<std::size_t>(a)],
                         local_bag_id[static_cast<std::size_t>(b)]);

  // External bags keep their contents and internal tree edges.
  std::vector<int> old_bag_id(static_cast<std::size_t>(td.bag_count()), -1);
  for (int b = 0; b < td.bag_count(); ++b)
    if (!in_sel[static_cast<std::size_t>(b)])
      old_bag_id[static_cast<std::size_t>(b)] = merged.add_bag(td.bag(b));
  for (auto [a, b] : td.tree_edges())
    if (old_bag_id[static_cast<std::size_t>(a)] >= 0 &&
        old_bag_id[static_cast<std::size_t>(b)] >= 0)
      merged.add_tree_edge(old_bag_id[static_cast<std::size_t>(a)],
                           old_bag_id[static_cast<std::size_t>(b)]);

  // Components of the tree minus the selection, their boundary cliques, and
  // their attachment bags.
  std::vector<bool> seen(static_cast<std::size_t>(td.bag_count()), false);
  const std::set<int> window(sub.vertices.begin(), sub.vertices.end());
  for (int b = 0; b < td.bag_count(); ++b) {
    if (in_sel[static_cast<std::size_t>(b)] || seen[static_cast<std::size_t>(b)]) continue;
    std::vector<int> component{b};
    seen[static_cast<std::size_t>(b)] = true;
    std::set<int> clique;  // B_i
    int attach_old = -1;   // t_i
    for (std::size_t i = 0; i < component.size(); ++i) {
      const int t = component[i];
      for (int v : td.bag(t))
        if (window.count(v)) clique.insert(v);
      for (int nb : td.tree_neighbors(t)) {
        if (in_sel[static_cast<std::size_t>(nb)]) {
          attach_old = t;
        } else if (!seen[static_cast<std::size_t>(nb)]) {
          seen[static_cast<std::size_t>(nb)] = true;
          component.push_back(nb);
        }
      }
    }
    require(attach_old >= 0, "detached component next to the selection");
    int host = -1;
    for (int lb = 0; lb < local.local_td.bag_count() && host < 0; ++lb) {
      const int gb = local_bag_id[static_cast<std::size_t>(lb)];
      const bool covers = std::all_of(clique.begin(), clique.end(), [&](int v) {
        return merged.bag_contains(gb, v);
      });
      if (covers) host = gb;
    }
    require(host >= 0, "no local bag contains a boundary clique");
    merged.add_tree_edge(host, old_bag_id[static_cast<std::size_t>(attach_old)]);
  }

  out.td = std::move(merged);
  out.score = dag_score(cache, out.dag);
  out.score_delta = out.score - current_score;
  return out;
}

// Full independent re-check of a global solution.
inline VerifyReport global_verify(const Dag& dag, const TreeDecomposition& td,
                                  const ScoreCache& cache, int width_bound,
                                  std::optional<double> expected_score = std::nullopt) {
  VerifyReport rep;
  if (!is_acyclic(dag)) rep.flag("global DAG has a directed cycle");
  const auto moral = moralize(dag);
  auto td_rep = validate_td(td, moral);
  if (!td_rep.ok)
    for (const auto& v : td_rep.violations) rep.flag(v);
  if (td.width() > width_bound)
    rep.flag("decomposition width " + std::to_string(td.width()) + " exceeds " +
             std::to_string(width_bound));
  if (expected_score.has_value()) {
    const double actual = dag_score(cache, dag);
    if (std::abs(actual - *expected_score) > 1e-6)
      rep.flag("score drifted: recomputed " + std::to_string(actual) +
               " vs tracked " + std::to_string(*expected_score));
  }
  return rep;
}

struct ImprovementRecord {
  int iteration = 0;
  double wall_seconds = 0.0;
  long long weight = 0;            // K
  long long incumbent_weight = 0;  // K_0
  double score_before = 0.0;
  double score_after = 0.0;
};

struct EngineState {
  Dag dag;
  TreeDecomposition td;
  double score = 0.0;
  int iterations = 0;
  int accepted = 0;
  int solver_failures = 0;
  int invariant_failures = 0;  // decode/verify/merge violations; must stay 0
  std::vector<std::string> failure_notes;
  std::vector<ImprovementRecord> improvements;
  double elapsed_seconds = 0.0;
};

struct RunOptions {
  int width_bound = 2;
  int budget = 10;
  double solver_timeout = 2.0;
  double time_limit = 60.0;
  long long max_iterations = -1;  // < 0: no cap
  std::uint64_t seed = 1;
  long long weight_scale = 1000;
  SolverConfig solver;
  bool verify_each_merge = false;
  std::string debug_dir;  // when set: per-iteration wcnf/varmap/window dumps
  std::ostream* log = nullptr;
};

// The anytime loop: window selection, encoding, solving, verification, and
// merging, repeated until the time or iteration limit. A single writer owns
// the incumbent; verifier failures discard the iteration and never corrupt
// the accepted state.
inline EngineState run(const ScoreCache& cache, const InitialSolution& initial,
                       const RunOptions& opt) {
  EngineState state;
  state.dag = initial.dag;
  state.td = initial.td;
  state.score = initial.score;
  Rng rng(opt.seed);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  };
  SolverConfig solver = opt.solver;
  solver.timeout_seconds = opt.solver_timeout;
  if (!opt.debug_dir.empty())
    std::filesystem::create_directories(opt.debug_dir);

  while (elapsed() < opt.time_limit &&
         (opt.max_iterations < 0 || state.iterations < opt.max_iterations)) {
    ++state.iterations;
    // A budget below the largest bag can never heal; let it propagate.
    const auto selected = select_subtree(state.td, opt.budget, rng);
    try {
      const auto sub = build_subinstance(cache, state.td, selected, state.dag);
      const auto problem = encode(sub, opt.width_bound, opt.weight_scale);
      if (!opt.debug_dir.empty()) {
        const std::string stem =
            opt.debug_dir + "/iter" + std::to_string(state.iterations);
        std::ofstream wf(stem + ".wcnf");
        emit_wcnf(wf, problem);
        std::ofstream vf(stem + ".varmap");
        write_varmap(vf, problem, sub);
        std::ofstream sf(stem + ".window");
        dump_subinstance(sf, sub);
      }
      const long long k0 = incumbent_weight(problem, sub);
      const auto outcome = solve(problem, sub, solver);
      if (outcome.status == SolveOutcome::Status::Error) {
        ++state.solver_failures;
        state.failure_notes.push_back("iteration " + std::to_string(state.iterations) +
                                      ": solver error: " + outcome.message);
        continue;
      }
      if (!outcome.model.has_value()) continue;
      const long long k = outcome.model->weight;
      if (k <= k0) continue;

      const auto local = decode(problem, *outcome.model, sub);
      const auto local_rep = verify_local(state.td, sub, local, opt.width_bound);
      if (!local_rep.ok) {
        ++state.invariant_failures;
        state.failure_notes.push_back("iteration " + std::to_string(state.iterations) +
                                      ": " + local_rep.violations.front());
        continue;
      }
      auto merged = merge(cache, state.dag, state.td, state.score, sub, local);
      if (opt.verify_each_merge) {
        const auto rep =
            global_verify(merged.dag, merged.td, cache, opt.width_bound, merged.score);
        if (!rep.ok) {
          ++state.invariant_failures;
          state.failure_notes.push_back("iteration " +
                                        std::to_string(state.iterations) + ": " +
                                        rep.violations.front());
          continue;
        }
      }
      ImprovementRecord rec;
      rec.iteration = state.iterations;
      rec.wall_seconds = elapsed();
      rec.weight = k;
      rec.incumbent_weight = k0;
      rec.score_before = state.score;
      rec.score_after = merged.score;
      state.improvements.push_back(rec);
      state.dag = std::move(merged.dag);
      state.td = std::move(merged.td);
      state.score = merged.score;
      ++state.accepted;
      if (opt.log)
        *opt.log << "IMPROVE " << rec.wall_seconds << ' ' << state.score << '\n';
    } catch (const std::exception& e) {
      ++state.invariant_failures;
      state.failure_notes.push_back("iteration " + std::to_string(state.iterations) +
                                    ": " + e.what());
    }
  }
  state.elapsed_seconds = elapsed();
  const auto final_rep =
      global_verify(state.dag, state.td, cache, opt.width_bound, state.score);
  if (!final_rep.ok) {
    ++state.invariant_failures;
    state.failure_notes.push_back("final state: " + final_rep.violations.front());
  }
  return state;
}

}  // namespace twbn
