#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "twbn/bench.hpp"
#include "twbn/initial_solution.hpp"

using namespace twbn;

TEST_CASE("greedy_initial always satisfies the solution invariants") {
  Rng rng(41);
  for (int round = 0; round < 30; ++round) {
    const int n = rng_int(rng, 1, 9);
    const int w = rng_int(rng, 1, 3);
    auto data = testing::random_dataset(rng, n, 60);
    auto cache = build_cache(data, 2);
    auto init = greedy_initial(cache, w, static_cast<std::uint64_t>(round));
    CHECK(is_acyclic(init.dag));
    auto rep = validate_td(init.td, moralize(init.dag));
    INFO((rep.violations.empty() ? std::string() : rep.violations[0]));
    CHECK(rep.ok);
    CHECK(init.td.width() <= w);
    CHECK(init.score == Catch::Approx(dag_score(cache, init.dag)));
    CHECK(init.score >= cache.empty_dag_score() - 1e-9);
  }
}

TEST_CASE("greedy_initial returns the empty DAG when nothing beats it") {
  ScoreCache cache(3);
  for (int v = 0; v < 3; ++v) cache.set_entries(v, {{{}, -4.0 - v}});
  auto init = greedy_initial(cache, 2, 7);
  for (int v = 0; v < 3; ++v) CHECK(init.dag.parents(v).empty());
  CHECK(init.score == Catch::Approx(cache.empty_dag_score()));
}

TEST_CASE("greedy_initial can realize the best bounded structure") {
  // Cache optimum at W=2 is the v-structure {0,1} -> 2.
  ScoreCache cache(3);
  cache.set_entries(0, {{{}, -5.0}});
  cache.set_entries(1, {{{}, -5.0}});
  cache.set_entries(2, {{{0, 1}, -2.0}, {{0}, -4.0}, {{1}, -4.5}, {{}, -6.0}});
  auto [best_score, best_dag] = testing::best_bounded_dag(cache, 2);
  CHECK(best_score == Catch::Approx(-12.0));
  CHECK(best_dag.parents(2) == std::vector<int>{0, 1});

  double reached = -1e18;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto init = greedy_initial(cache, 2, seed);
    reached = std::max(reached, init.score);
    CHECK(init.score >= cache.empty_dag_score() - 1e-9);
  }
  CHECK(reached == Catch::Approx(best_score));
}

TEST_CASE("greedy_initial never takes parent sets wider than the bound") {
  // A dominant two-parent set must not be picked at W=1: the moralized
  // triangle would push the width to 2.
  ScoreCache cache(3);
  cache.set_entries(0, {{{}, -5.0}});
  cache.set_entries(1, {{{}, -5.0}});
  cache.set_entries(2, {{{0, 1}, -1.0}, {{}, -6.0}});
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto init = greedy_initial(cache, 1, seed);
    CHECK(init.td.width() <= 1);
    CHECK(init.dag.parents(2).size() <= 1);
    CHECK(validate_td(init.td, moralize(init.dag)).ok);
  }
}

TEST_CASE("greedy_initial keeps the bound on correlated synthetic data") {
  for (int round = 0; round < 12; ++round) {
    auto [data, truth] =
        generate_synthetic(10, 2, 2, 300, 40 + static_cast<std::uint64_t>(round));
    auto cache = build_cache(data, 2);
    for (int w : {1, 2}) {
      auto init = greedy_initial(cache, w, static_cast<std::uint64_t>(round));
      CHECK(init.td.width() <= w);
      CHECK(validate_td(init.td, moralize(init.dag)).ok);
    }
  }
}

TEST_CASE("greedy_initial is deterministic for a fixed seed") {
  Rng rng(43);
  auto data = testing::random_dataset(rng, 7, 80);
  auto cache = build_cache(data, 2);
  auto a = greedy_initial(cache, 2, 99);
  auto b = greedy_initial(cache, 2, 99);
  CHECK(a.score == b.score);
  for (int v = 0; v < 7; ++v) CHECK(a.dag.parents(v) == b.dag.parents(v));
}

TEST_CASE("DAG file round-trips") {
  Rng rng(47);
  auto data = testing::random_dataset(rng, 5, 50);
  auto cache = build_cache(data, 2);
  auto init = greedy_initial(cache, 2, 3);
  std::ostringstream os;
  write_dag_file(os, init.dag, cache);
  std::istringstream is(os.str());
  auto dag = read_dag_file(is);
  REQUIRE(dag.vertex_count() == 5);
  for (int v = 0; v < 5; ++v) CHECK(dag.parents(v) == init.dag.parents(v));
}

TEST_CASE("import_initial accepts an empty DAG at width 0") {
  ScoreCache cache(4);
  for (int v = 0; v < 4; ++v) cache.set_entries(v, {{{}, -2.0}});
  auto init = import_initial(Dag(4), std::nullopt, cache, 1);
  CHECK(init.td.width() == 0);
  CHECK(init.score == Catch::Approx(-8.0));
}

TEST_CASE("import_initial rejects structures above the bound") {
  // Moral graph of {0,1} -> 2 is a triangle: width 2 > 1.
  ScoreCache cache(3);
  cache.set_entries(0, {{{}, -1.0}});
  cache.set_entries(1, {{{}, -1.0}});
  cache.set_entries(2, {{{0, 1}, -1.0}, {{}, -2.0}});
  Dag d(3);
  d.set_parents(2, {0, 1});
  CHECK_THROWS_WITH(import_initial(d, std::nullopt, cache, 1),
                    Catch::Matchers::ContainsSubstring("treewidth bound"));
  CHECK_NOTHROW(import_initial(d, std::nullopt, cache, 2));
}

TEST_CASE("import_initial scores unknown parent sets from data") {
  auto make_cache = [] {
    ScoreCache cache(2);
    cache.set_entries(0, {{{}, -3.0}});
    cache.set_entries(1, {{{}, -3.0}});
    return cache;
  };
  Dag d(2);
  d.set_parents(1, {0});

  auto no_data = make_cache();
  CHECK_THROWS_WITH(import_initial(d, std::nullopt, no_data, 2),
                    Catch::Matchers::ContainsSubstring("not in the cache"));

  Dataset data;
  data.variable_names = {"a", "b"};
  data.arities = {2, 2};
  data.rows = {{0, 0}, {0, 0}, {1, 1}, {1, 1}};
  auto with_data = make_cache();
  auto init = import_initial(d, std::nullopt, with_data, 2, &data);
  REQUIRE(with_data.score_of(1, {0}).has_value());
  CHECK(init.score == Catch::Approx(-3.0 + snap_score(bic_score(data, 1, {0}), 1e-3)));
}

TEST_CASE("import_initial validates a supplied decomposition") {
  ScoreCache cache(3);
  cache.set_entries(0, {{{}, -1.0}});
  cache.set_entries(1, {{{}, -1.0}});
  cache.set_entries(2, {{{0}, -0.5}, {{}, -1.0}});
  Dag d(3);
  d.set_parents(2, {0});

  TreeDecomposition good;
  int a = good.add_bag({0, 2});
  int b = good.add_bag({1});
  good.add_tree_edge(a, b);
  CHECK_NOTHROW(import_initial(d, good, cache, 1));

  TreeDecomposition bad;
  int c = bad.add_bag({0});
  int e = bad.add_bag({1, 2});
  bad.add_tree_edge(c, e);
  CHECK_THROWS_WITH(import_initial(d, bad, cache, 1),
                    Catch::Matchers::ContainsSubstring("invalid"));
}
