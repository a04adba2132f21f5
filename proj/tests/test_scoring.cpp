#include <cmath>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "twbn/scoring.hpp"

using namespace twbn;

namespace {

Dataset columns(std::vector<int> arities, std::vector<std::vector<int>> rows) {
  Dataset d;
  for (std::size_t v = 0; v < arities.size(); ++v) {
    d.variable_names.push_back("v" + std::to_string(v));
    d.arities.push_back(arities[v]);
  }
  d.rows = std::move(rows);
  d.validate();
  return d;
}

}  // namespace

TEST_CASE("bic_score of a balanced binary marginal") {
  auto d = columns({2}, {{0}, {0}, {1}, {1}});
  // Two cells of count 2: 4*ln(1/2) - ln(4)/2.
  const double expected = 4.0 * std::log(0.5) - std::log(4.0) / 2.0;
  CHECK(bic_score(d, 0, {}) == Catch::Approx(expected).margin(1e-9));
  CHECK(bic_score(d, 0, {}) == Catch::Approx(-3.46573590279973).margin(1e-9));
}

TEST_CASE("bic_score of a constant variable is pure penalty") {
  auto d = columns({3}, {{1}, {1}, {1}, {1}, {1}});
  CHECK(bic_score(d, 0, {}) ==
        Catch::Approx(-std::log(5.0) / 2.0 * 2.0).margin(1e-12));
}

TEST_CASE("bic_score of a perfectly predictive parent") {
  auto d = columns({2, 2}, {{0, 0}, {0, 0}, {1, 1}, {1, 1}});
  const double expected = 0.0 - std::log(4.0) / 2.0 * 1.0 * 2.0;
  CHECK(bic_score(d, 1, {0}) == Catch::Approx(expected).margin(1e-9));
  CHECK(bic_score(d, 1, {0}) == Catch::Approx(-1.38629436111989).margin(1e-9));
}

TEST_CASE("bic_score rejects a variable in its own parent set") {
  auto d = columns({2}, {{0}});
  CHECK_THROWS(bic_score(d, 0, {0}));
}

TEST_CASE("prune keeps only undominated sets") {
  auto one = [](std::vector<ScoredParentSet> es) {
    return prune({std::move(es)}).entries(0);
  };
  auto a = one({{{}, -5}, {{1}, -6}});
  REQUIRE(a.size() == 1);
  CHECK(a[0].parents.empty());

  auto b = one({{{}, -5}, {{1}, -4}, {{1, 2}, -4.5}});
  REQUIRE(b.size() == 2);
  CHECK(b[0].parents == std::vector<int>{1});

  auto c = one({{{}, -5}, {{1}, -4}, {{1, 2}, -3}});
  CHECK(c.size() == 3);
}

TEST_CASE("prune drops ties in favor of the subset") {
  auto kept = prune({{{{}, -5}, {{1}, -5}}}).entries(0);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].parents.empty());
}

TEST_CASE("prune requires the empty set") {
  CHECK_THROWS(prune({{{{1}, -4}}}));
}

TEST_CASE("prune is idempotent and never removes the empty set") {
  Rng rng(23);
  for (int round = 0; round < 20; ++round) {
    auto data = testing::random_dataset(rng, rng_int(rng, 2, 5), 40);
    auto cache = build_cache(data, 2);
    for (int v = 0; v < cache.variable_count(); ++v) {
      std::vector<std::vector<ScoredParentSet>> raw{cache.entries(v)};
      auto again = prune(raw);
      CHECK(again.entries(0).size() == cache.entries(v).size());
      CHECK(cache.score_of(v, {}).has_value());
    }
  }
}

TEST_CASE("build_cache keeps only the empty set for independent variables") {
  auto d = columns({2, 2}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  auto cache = build_cache(d, 1);
  for (int v = 0; v < 2; ++v) {
    REQUIRE(cache.entries(v).size() == 1);
    CHECK(cache.entries(v)[0].parents.empty());
  }
}

TEST_CASE("build_cache with max size 0 yields empty sets only") {
  Rng rng(3);
  auto data = testing::random_dataset(rng, 4, 30);
  auto cache = build_cache(data, 0);
  for (int v = 0; v < 4; ++v) {
    REQUIRE(cache.entries(v).size() == 1);
    CHECK(cache.entries(v)[0].parents.empty());
  }
}

TEST_CASE("candidate restriction by mutual information keeps real parents") {
  // Force the top-k path with a tiny exhaustive limit; the copied column
  // has maximal mutual information and must stay in the pool.
  std::vector<std::vector<int>> rows;
  Rng rng(37);
  for (int i = 0; i < 200; ++i) {
    const int a = rng_int(rng, 0, 1);
    rows.push_back({a, rng_int(rng, 0, 1), a, rng_int(rng, 0, 1)});
  }
  Dataset d;
  d.variable_names = {"a", "b", "c", "e"};
  d.arities = {2, 2, 2, 2};
  d.rows = rows;
  auto restricted = build_cache(d, 1, /*top_k=*/1, /*exhaustive_limit=*/0);
  REQUIRE(restricted.score_of(2, {0}).has_value());
  CHECK(*restricted.score_of(2, {0}) > restricted.empty_set_score(2));
  auto full = build_cache(d, 1);
  CHECK(*restricted.score_of(2, {0}) == Catch::Approx(*full.score_of(2, {0})));
}

TEST_CASE("build_cache keeps a strongly predictive parent") {
  std::vector<std::vector<int>> rows;
  for (int i = 0; i < 200; ++i) rows.push_back({i % 2, i % 2});
  auto cache = build_cache(columns({2, 2}, rows), 1);
  auto with_parent = cache.score_of(1, {0});
  REQUIRE(with_parent.has_value());
  CHECK(*with_parent > cache.empty_set_score(1));
}

TEST_CASE("build_cache output satisfies the pruning invariants") {
  Rng rng(31);
  for (int round = 0; round < 15; ++round) {
    auto data = testing::random_dataset(rng, rng_int(rng, 3, 6), 60);
    auto cache = build_cache(data, 2);
    for (int v = 0; v < cache.variable_count(); ++v) {
      const auto& es = cache.entries(v);
      const double empty = cache.empty_set_score(v);
      for (const auto& e : es) {
        if (e.parents.empty()) continue;
        CHECK(e.score > empty);
        for (const auto& sub : es) {
          if (sub.parents.size() >= e.parents.size()) continue;
          const bool subset = std::includes(e.parents.begin(), e.parents.end(),
                                            sub.parents.begin(), sub.parents.end());
          if (subset) CHECK(e.score > sub.score);
        }
      }
    }
  }
}

TEST_CASE("scores stay below the saturated-likelihood bound") {
  Rng rng(5);
  auto data = testing::random_dataset(rng, 4, 50, 3);
  auto penalty = [&](int v, const std::vector<int>& ps) {
    double q = 1.0;
    for (int p : ps) q *= data.arities[static_cast<std::size_t>(p)];
    return 0.5 * std::log(static_cast<double>(data.row_count())) *
           (data.arities[static_cast<std::size_t>(v)] - 1) * q;
  };
  for (int v = 0; v < 4; ++v) {
    // The log-likelihood term is never positive, so score <= -penalty,
    // and the penalty strictly grows with every added parent.
    CHECK(bic_score(data, v, {}) <= -penalty(v, {}) + 1e-9);
    const std::vector<int> one{(v + 1) % 4};
    const std::vector<int> two{(v + 1) % 4, (v + 2) % 4};
    CHECK(bic_score(data, v, one) <= -penalty(v, one) + 1e-9);
    CHECK(bic_score(data, v, two) <= -penalty(v, two) + 1e-9);
    CHECK(penalty(v, two) > penalty(v, one));
    CHECK(penalty(v, one) > penalty(v, {}));
  }
}

TEST_CASE("dag_score sums cached entries") {
  ScoreCache cache(2);
  cache.set_entries(0, {{{}, -5}});
  cache.set_entries(1, {{{}, -7}, {{0}, -6}});
  Dag d(2);
  CHECK(dag_score(cache, d) == Catch::Approx(-12.0));
  d.set_parents(1, {0});
  CHECK(dag_score(cache, d) == Catch::Approx(-11.0));
  CHECK(cache.empty_dag_score() == Catch::Approx(-12.0));
}

TEST_CASE("dag_score names the missing entry") {
  ScoreCache cache(2);
  cache.set_entries(0, {{{}, -5}});
  cache.set_entries(1, {{{}, -7}});
  Dag d(2);
  d.set_parents(1, {0});
  CHECK_THROWS_WITH(dag_score(cache, d),
                    Catch::Matchers::ContainsSubstring("{0}") &&
                        Catch::Matchers::ContainsSubstring("variable 1"));
}

TEST_CASE("single-variable dag_score") {
  ScoreCache cache(1);
  cache.set_entries(0, {{{}, -5}});
  CHECK(dag_score(cache, Dag(1)) == Catch::Approx(-5.0));
}

TEST_CASE("delta_bic categories") {
  auto rep = delta_bic(-100, -85);
  CHECK(rep.delta == Catch::Approx(15.0));
  CHECK(rep.category == DeltaBicCategory::ExtremelyPositive);

  rep = delta_bic(-100, -103);
  CHECK(rep.delta == Catch::Approx(-3.0));
  CHECK(rep.category == DeltaBicCategory::Negative);

  rep = delta_bic(-42, -42);
  CHECK(rep.delta == 0.0);
  CHECK(rep.category == DeltaBicCategory::Neutral);
}

TEST_CASE("jkl round-trip preserves the cache") {
  Rng rng(17);
  auto data = testing::random_dataset(rng, 5, 80);
  auto cache = build_cache(data, 2);
  std::ostringstream os;
  write_jkl(os, cache);
  std::istringstream is(os.str());
  auto back = read_jkl(is);
  REQUIRE(back.variable_count() == cache.variable_count());
  for (int v = 0; v < cache.variable_count(); ++v) {
    REQUIRE(back.entries(v).size() == cache.entries(v).size());
    for (const auto& e : cache.entries(v)) {
      auto s = back.score_of(v, e.parents);
      REQUIRE(s.has_value());
      CHECK(*s == Catch::Approx(e.score).epsilon(1e-12));
    }
  }
}

TEST_CASE("jkl reader accepts shuffled variable order") {
  std::istringstream is("2\n1 2\n-7.0 0\n-6.0 1 0\n0 1\n-5.0 0\n");
  auto cache = read_jkl(is);
  CHECK(cache.empty_set_score(0) == Catch::Approx(-5.0));
  CHECK(cache.empty_set_score(1) == Catch::Approx(-7.0));
  REQUIRE(cache.score_of(1, {0}).has_value());
}
