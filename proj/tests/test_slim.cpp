#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "twbn/bench.hpp"
#include "twbn/slim.hpp"

using namespace twbn;

namespace {

struct Toy {
  ScoreCache cache;
  InitialSolution init;
};

Toy make_toy(Rng& rng, int n, int w, int max_nonempty = 4) {
  Toy t;
  auto data = testing::random_dataset(rng, n, 80);
  t.cache = testing::trim_cache(build_cache(data, 2), max_nonempty);
  t.init = greedy_initial(t.cache, w, rng());
  return t;
}

}  // namespace

TEST_CASE("a zero time limit returns the initial solution unchanged") {
  Rng rng(101);
  auto toy = make_toy(rng, 6, 2);
  RunOptions opt;
  opt.width_bound = 2;
  opt.budget = 6;
  opt.time_limit = 0.0;
  opt.solver.mode = SolverConfig::Mode::Oracle;
  auto state = run(toy.cache, toy.init, opt);
  CHECK(state.iterations == 0);
  CHECK(state.score == Catch::Approx(toy.init.score));
  CHECK(state.invariant_failures == 0);
}

TEST_CASE("whole-tree windows with the oracle reach the global optimum") {
  Rng rng(103);
  for (int round = 0; round < 6; ++round) {
    auto toy = make_toy(rng, 5, 2);
    auto [best, best_dag] = testing::best_bounded_dag(toy.cache, 2);
    RunOptions opt;
    opt.width_bound = 2;
    opt.budget = 5;  // the whole window fits
    opt.time_limit = 60.0;
    opt.max_iterations = 5;
    opt.seed = static_cast<std::uint64_t>(round);
    opt.solver.mode = SolverConfig::Mode::Oracle;
    opt.verify_each_merge = true;
    auto state = run(toy.cache, toy.init, opt);
    CHECK(state.invariant_failures == 0);
    CHECK(state.score == Catch::Approx(best).margin(1e-6));
  }
}

TEST_CASE("merging the incumbent keeps the score and the decomposition valid") {
  Rng rng(107);
  auto toy = make_toy(rng, 7, 2);
  Rng sel_rng(3);
  auto sel = select_subtree(toy.init.td, 5, sel_rng);
  auto sub = build_subinstance(toy.cache, toy.init.td, sel, toy.init.dag);
  Subinstance pinned = sub;
  for (int v = 0; v < pinned.size(); ++v) {
    auto inc = pinned.menus[static_cast<std::size_t>(v)]
                           [static_cast<std::size_t>(pinned.incumbent_index(v))];
    pinned.menus[static_cast<std::size_t>(v)] = {inc};
  }
  auto p = encode(pinned, 2, 1000);
  auto out = solve_internal(p, 10.0);
  REQUIRE(out.status == SolveOutcome::Status::Optimum);
  auto local = decode(p, *out.model, pinned);
  auto rep = verify_local(toy.init.td, pinned, local, 2);
  INFO((rep.violations.empty() ? std::string() : rep.violations[0]));
  REQUIRE(rep.ok);
  auto merged = merge(toy.cache, toy.init.dag, toy.init.td, toy.init.score, pinned, local);
  CHECK(merged.score_delta == Catch::Approx(0.0).margin(1e-9));
  for (int v = 0; v < 7; ++v)
    CHECK(merged.dag.parents(v) == toy.init.dag.parents(v));
  auto grep = global_verify(merged.dag, merged.td, toy.cache, 2, merged.score);
  INFO((grep.violations.empty() ? std::string() : grep.violations[0]));
  CHECK(grep.ok);
}

TEST_CASE("merging a whole-tree window keeps only the local decomposition") {
  Rng rng(109);
  auto toy = make_toy(rng, 5, 2);
  Rng sel_rng(1);
  auto sel = select_subtree(toy.init.td, 5, sel_rng);
  REQUIRE(static_cast<int>(sel.size()) == toy.init.td.bag_count());
  auto sub = build_subinstance(toy.cache, toy.init.td, sel, toy.init.dag);
  CHECK(sub.boundary.empty());
  auto p = encode(sub, 2, 1000);
  auto out = solve_internal(p, 10.0);
  REQUIRE(out.status == SolveOutcome::Status::Optimum);
  auto local = decode(p, *out.model, sub);
  auto merged = merge(toy.cache, toy.init.dag, toy.init.td, toy.init.score, sub, local);
  CHECK(merged.td.bag_count() == local.local_td.bag_count());
  auto grep = global_verify(merged.dag, merged.td, toy.cache, 2, merged.score);
  CHECK(grep.ok);
}

TEST_CASE("verify_local flags fortified-acyclicity and width violations") {
  // Window {0,1}; incumbent path 0 -> 2 -> 1 through the external vertex 2.
  TreeDecomposition td;
  const int b0 = td.add_bag({0, 1});
  const int b1 = td.add_bag({0, 1, 2});
  td.add_tree_edge(b0, b1);
  ScoreCache cache(3);
  cache.set_entries(0, {{{1}, -0.5}, {{}, -1.0}});
  cache.set_entries(1, {{{2}, -2.0}, {{}, -3.0}});
  cache.set_entries(2, {{{0}, -0.5}, {{}, -1.0}});
  Dag dag(3);
  dag.set_parents(2, {0});
  dag.set_parents(1, {2});
  auto sub = build_subinstance(cache, td, {b0}, dag);

  DecodedLocal bad;
  bad.choice = {0, 0};  // 0 <- {1} and 1 <- {2}: cycle via the virtual arc
  REQUIRE(sub.menus[0][0].parents == std::vector<int>{1});
  REQUIRE(sub.menus[1][0].parents == std::vector<int>{2});
  bad.topo_order = {0, 1};
  bad.elimination.order = {0, 1};
  UndirectedGraph g(2);
  g.add_edge(0, 1);
  bad.local_td = td_from_elimination(bad.elimination, g);
  auto rep = verify_local(td, sub, bad, 2);
  REQUIRE_FALSE(rep.ok);
  bool c5 = false;
  for (const auto& v : rep.violations) c5 = c5 || v.find("C5") != std::string::npos;
  CHECK(c5);

  // A one-bag decomposition that is too wide trips C2.
  DecodedLocal wide;
  wide.choice = {static_cast<int>(sub.menus[0].size()) - 1,
                 static_cast<int>(sub.menus[1].size()) - 1};
  wide.topo_order = {0, 1};
  wide.elimination.order = {0, 1};
  wide.local_td = TreeDecomposition{};
  wide.local_td.add_bag({0, 1});
  auto rep2 = verify_local(td, sub, wide, 0);
  REQUIRE_FALSE(rep2.ok);
  CHECK(rep2.violations.front().find("C2") != std::string::npos);
}

TEST_CASE("global_verify flags corrupted decompositions and wide graphs") {
  ScoreCache cache(3);
  cache.set_entries(0, {{{}, -1.0}});
  cache.set_entries(1, {{{}, -1.0}});
  cache.set_entries(2, {{{0, 1}, -0.5}, {{}, -1.0}});
  Dag dag(3);
  dag.set_parents(2, {0, 1});

  TreeDecomposition good = td_from_elimination({{0, 1, 2}}, moralize(dag));
  CHECK(global_verify(dag, good, cache, 2).ok);
  CHECK_FALSE(global_verify(dag, good, cache, 1).ok);  // moral width 2

  TreeDecomposition broken;  // same bags, no tree edges
  for (int b = 0; b < good.bag_count(); ++b) broken.add_bag(good.bag(b));
  auto rep = global_verify(dag, broken, cache, 2);
  REQUIRE_FALSE(rep.ok);

  auto drift = global_verify(dag, good, cache, 2, -999.0);
  REQUIRE_FALSE(drift.ok);
  CHECK(drift.violations.front().find("score drifted") != std::string::npos);
}

TEST_CASE("runs are monotone and safe across seeds") {
  Rng rng(113);
  for (int round = 0; round < 8; ++round) {
    auto toy = make_toy(rng, rng_int(rng, 8, 12), 2);
    RunOptions opt;
    opt.width_bound = 2;
    opt.budget = 5;
    opt.time_limit = 30.0;
    opt.max_iterations = 12;
    opt.seed = rng();
    opt.solver.mode = SolverConfig::Mode::Oracle;
    opt.verify_each_merge = true;
    auto state = run(toy.cache, toy.init, opt);
    INFO((state.failure_notes.empty() ? std::string() : state.failure_notes[0]));
    CHECK(state.invariant_failures == 0);
    CHECK(state.solver_failures == 0);
    CHECK(state.score >= toy.init.score - 1e-9);
    double last = toy.init.score;
    for (const auto& rec : state.improvements) {
      CHECK(rec.score_after >= rec.score_before);
      CHECK(rec.score_before == Catch::Approx(last).margin(1e-9));
      CHECK(rec.weight > rec.incumbent_weight);
      // Theorem-2 identity at the merge.
      CHECK(rec.score_after - rec.score_before ==
            Catch::Approx(static_cast<double>(rec.weight - rec.incumbent_weight) /
                          1000.0)
                .margin(2.0 / 1000.0));
      last = rec.score_after;
    }
    auto final_rep = global_verify(state.dag, state.td, toy.cache, 2, state.score);
    CHECK(final_rep.ok);
  }
}

TEST_CASE("imported external structures are improvable") {
  Rng rng(127);
  auto data = testing::random_dataset(rng, 8, 100);
  auto cache = testing::trim_cache(build_cache(data, 2), 4);
  // A deliberately weak import: the empty DAG.
  auto init = import_initial(Dag(8), std::nullopt, cache, 2);
  RunOptions opt;
  opt.width_bound = 2;
  opt.budget = 6;
  opt.time_limit = 30.0;
  opt.max_iterations = 20;
  opt.seed = 5;
  opt.solver.mode = SolverConfig::Mode::Oracle;
  auto state = run(cache, init, opt);
  CHECK(state.invariant_failures == 0);
  bool improvable = false;
  for (int v = 0; v < 8; ++v)
    improvable = improvable || cache.entries(v).size() > 1;
  if (improvable) CHECK(state.score > init.score);
}

TEST_CASE("debug dumps land in the requested directory") {
  Rng rng(137);
  auto toy = make_toy(rng, 6, 2);
  const std::string dir = std::filesystem::temp_directory_path() / "twbn-dump-test";
  std::filesystem::remove_all(dir);
  RunOptions opt;
  opt.width_bound = 2;
  opt.budget = 5;
  opt.time_limit = 10.0;
  opt.max_iterations = 2;
  opt.solver.mode = SolverConfig::Mode::Oracle;
  opt.debug_dir = dir;
  run(toy.cache, toy.init, opt);
  CHECK(std::filesystem::exists(dir + "/iter1.wcnf"));
  CHECK(std::filesystem::exists(dir + "/iter1.varmap"));
  CHECK(std::filesystem::exists(dir + "/iter1.window"));
  std::ifstream wcnf(dir + "/iter1.wcnf");
  std::string header;
  std::getline(wcnf, header);
  CHECK(header.rfind("p wcnf ", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("the engine survives solver errors and keeps a valid state") {
  Rng rng(131);
  auto toy = make_toy(rng, 9, 2);
  RunOptions opt;
  opt.width_bound = 2;
  opt.budget = 9;  // windows may exceed the oracle's menu-product bound
  opt.time_limit = 10.0;
  opt.max_iterations = 4;
  opt.solver.mode = SolverConfig::Mode::External;
  opt.solver.command = "/nonexistent/solver {wcnf}";
  opt.solver_timeout = 1.0;
  auto state = run(toy.cache, toy.init, opt);
  CHECK(state.solver_failures == 4);
  CHECK(state.score == Catch::Approx(toy.init.score));
  CHECK(global_verify(state.dag, state.td, toy.cache, 2, state.score).ok);
}
