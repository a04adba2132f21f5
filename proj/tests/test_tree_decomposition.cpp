#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "twbn/tree_decomposition.hpp"

using namespace twbn;

namespace {

UndirectedGraph make_graph(int n, const std::vector<std::pair<int, int>>& edges) {
  UndirectedGraph g(n);
  for (auto [u, v] : edges) g.add_edge(u, v);
  return g;
}

}  // namespace

TEST_CASE("validate_td accepts a single covering bag") {
  auto g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  TreeDecomposition td;
  td.add_bag({0, 1, 2});
  CHECK(validate_td(td, g).ok);
}

TEST_CASE("validate_td reports an uncovered edge as a T1 violation") {
  auto g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  TreeDecomposition td;
  int a = td.add_bag({0, 1});
  int b = td.add_bag({1, 2});
  td.add_tree_edge(a, b);
  auto rep = validate_td(td, g);
  REQUIRE_FALSE(rep.ok);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].find("T1") != std::string::npos);
  CHECK(rep.violations[0].find("{0,2}") != std::string::npos);
}

TEST_CASE("validate_td reports a disconnected occurrence as a T2 violation") {
  auto g = make_graph(4, {{0, 1}, {0, 3}});
  TreeDecomposition td;
  int a = td.add_bag({0, 1});
  int b = td.add_bag({2});
  int c = td.add_bag({0, 3});
  td.add_tree_edge(a, b);
  td.add_tree_edge(b, c);
  auto rep = validate_td(td, g);
  REQUIRE_FALSE(rep.ok);
  bool found = false;
  for (const auto& v : rep.violations)
    found = found || v.find("T2: occurrence of vertex 0") != std::string::npos;
  CHECK(found);
}

TEST_CASE("validate_td rejects foreign vertices") {
  TreeDecomposition td;
  td.add_bag({0, 5});
  CHECK_THROWS(validate_td(td, make_graph(3, {})));
}

TEST_CASE("width_of_elimination on a triangle is 2 for any order") {
  auto g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  CHECK(width_of_elimination({{0, 1, 2}}, g) == 2);
  CHECK(width_of_elimination({{2, 0, 1}}, g) == 2);
}

TEST_CASE("width_of_elimination on a path needs no fill") {
  auto g = make_graph(3, {{0, 1}, {1, 2}});
  CHECK(width_of_elimination({{0, 1, 2}}, g) == 1);
}

TEST_CASE("width_of_elimination on a 4-cycle with opposite corners first") {
  auto g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  CHECK(width_of_elimination({{0, 2, 1, 3}}, g) == 2);
}

TEST_CASE("td_from_elimination matches the elimination width") {
  auto triangle = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  auto td = td_from_elimination({{0, 1, 2}}, triangle);
  CHECK(td.width() == 2);
  CHECK(validate_td(td, triangle).ok);

  auto edgeless = make_graph(3, {});
  CHECK(td_from_elimination({{0, 1, 2}}, edgeless).width() == 0);

  auto path = make_graph(3, {{0, 1}, {1, 2}});
  auto path_td = td_from_elimination({{0, 1, 2}}, path);
  CHECK(path_td.width() == 1);
  CHECK(validate_td(path_td, path).ok);
  bool has01 = false, has12 = false;
  for (int b = 0; b < path_td.bag_count(); ++b) {
    has01 = has01 || path_td.bag(b) == std::vector<int>{0, 1};
    has12 = has12 || path_td.bag(b) == std::vector<int>{1, 2};
  }
  CHECK(has01);
  CHECK(has12);
}

TEST_CASE("td_from_elimination is valid for random DAG moral graphs") {
  Rng rng(11);
  for (int round = 0; round < 40; ++round) {
    const int n = rng_int(rng, 1, 8);
    auto g = moralize(testing::random_dag(rng, n, 3));
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    rng_shuffle(rng, perm);
    auto td = td_from_elimination({perm}, g);
    auto rep = validate_td(td, g);
    INFO((rep.violations.empty() ? std::string() : rep.violations[0]));
    CHECK(rep.ok);
    CHECK(td.width() == width_of_elimination({perm}, g));
  }
}

TEST_CASE("elimination width upper-bounds treewidth, tight for some order") {
  Rng rng(13);
  for (int round = 0; round < 12; ++round) {
    const int n = rng_int(rng, 2, 6);
    auto g = moralize(testing::random_dag(rng, n, 3));
    const int tw = testing::brute_force_treewidth(g);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    int best = n;
    do {
      const int w = width_of_elimination({perm}, g);
      CHECK(w >= tw);
      best = std::min(best, w);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(best == tw);
  }
}

TEST_CASE("min_fill_ordering respects clique lower bounds") {
  auto g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  auto ord = min_fill_ordering(g);
  CHECK(ord.is_permutation_of(4));
  CHECK(width_of_elimination(ord, g) == 2);
}

TEST_CASE("PACE .td round-trips") {
  auto g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}});
  auto td = td_from_elimination({{0, 1, 2, 3}}, g);
  std::ostringstream os;
  write_td(os, td, 4);
  CHECK(os.str().rfind("s td ", 0) == 0);
  std::istringstream is(os.str());
  auto parsed = read_td(is);
  CHECK(parsed.declared_vertices == 4);
  CHECK(parsed.td.width() == td.width());
  CHECK(parsed.td.bag_count() == td.bag_count());
  CHECK(validate_td(parsed.td, g).ok);
}
