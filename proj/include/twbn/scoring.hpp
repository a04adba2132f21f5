#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "twbn/dataset.hpp"
#include "twbn/graph.hpp"
#include "twbn/util.hpp"

namespace twbn {

struct ScoredParentSet {
  std::vector<int> parents;  // sorted ascending
  double score = 0.0;
};

// Per-variable pruned candidate parent sets with their decomposable scores.
// Every variable keeps the empty set; a kept non-empty set scores strictly
// better than each of its kept subsets.
class ScoreCache {
 public:
  ScoreCache() = default;
  explicit ScoreCache(int n) : entries_(static_cast<std::size_t>(n)) {}

  int variable_count() const { return static_cast<int>(entries_.size()); }

  // Entries sorted by descending score.
  const std::vector<ScoredParentSet>& entries(int v) const {
    return entries_[static_cast<std::size_t>(v)];
  }

  std::optional<double> score_of(int v, const std::vector<int>& parents) const {
    std::vector<int> key(parents);
    std::sort(key.begin(), key.end());
    for (const auto& e : entries(v))
      if (e.parents == key) return e.score;
    return std::nullopt;
  }

  double empty_set_score(int v) const {
    auto s = score_of(v, {});
    require(s.has_value(), "cache lacks the empty parent set for variable " +
                               std::to_string(v));
    return *s;
  }

  // Sum of empty-set scores over all variables (the empty DAG's score).
  double empty_dag_score() const {
    double total = 0.0;
    for (int v = 0; v < variable_count(); ++v) total += empty_set_score(v);
    return total;
  }

  void set_entries(int v, std::vector<ScoredParentSet> es) {
    std::stable_sort(es.begin(), es.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    entries_[static_cast<std::size_t>(v)] = std::move(es);
  }

  void insert_entry(int v, std::vector<int> parents, double score) {
    std::sort(parents.begin(), parents.end());
    auto& es = entries_[static_cast<std::size_t>(v)];
    auto pos = std::find_if(es.begin(), es.end(),
                            [&](const auto& e) { return e.score < score; });
    es.insert(pos, {std::move(parents), score});
  }

 private:
  std::vector<std::vector<ScoredParentSet>> entries_;
};

// Scores are snapped to a fixed resolution grid when caches are built, so
// that score differences translate exactly into the integer weights of the
// local MaxSAT objective (resolution 1e-3 matches the default weight scale
// of 1000). Pass 0 to keep raw scores.
inline double snap_score(double score, double resolution) {
  if (resolution <= 0) return score;
  return std::llround(score / resolution) * resolution;
}

// BIC with natural logarithms. Unobserved parent configurations contribute
// no likelihood term.
inline double bic_score(const Dataset& data, int v, const std::vector<int>& parents) {
  const int n = data.variable_count();
  require(v >= 0 && v < n, "variable out of range");
  for (int p : parents) {
    require(p >= 0 && p < n, "parent out of range");
    require(p != v, "variable cannot be its own parent");
  }
  const int rv = data.arities[static_cast<std::size_t>(v)];

  std::unordered_map<long long, std::vector<int>> counts;
  for (const auto& row : data.rows) {
    long long cfg = 0;
    for (int p : parents)
      cfg = cfg * data.arities[static_cast<std::size_t>(p)] +
            row[static_cast<std::size_t>(p)];
    auto& cell = counts[cfg];
    if (cell.empty()) cell.assign(static_cast<std::size_t>(rv), 0);
    ++cell[static_cast<std::size_t>(row[static_cast<std::size_t>(v)])];
  }

  double log_lik = 0.0;
  for (const auto& [cfg, cell] : counts) {
    int nj = 0;
    for (int c : cell) nj += c;
    for (int c : cell)
      if (c > 0) log_lik += c * std::log(static_cast<double>(c) / nj);
  }

  double q = 1.0;
  for (int p : parents) q *= data.arities[static_cast<std::size_t>(p)];
  const double penalty =
      0.5 * std::log(static_cast<double>(data.row_count())) * (rv - 1) * q;
  return log_lik - penalty;
}

// Keeps an entry only if no stored proper subset scores at least as well.
// Ties go to the smaller set.
inline ScoreCache prune(const std::vector<std::vector<ScoredParentSet>>& raw) {
  ScoreCache cache(static_cast<int>(raw.size()));
  for (int v = 0; v < static_cast<int>(raw.size()); ++v) {
    std::map<std::vector<int>, double> by_set;
    for (const auto& e : raw[static_cast<std::size_t>(v)]) {
      auto key = e.parents;
      std::sort(key.begin(), key.end());
      by_set[std::move(key)] = e.score;
    }
    require(by_set.count({}) > 0,
            "raw scores for variable " + std::to_string(v) +
                " lack the empty parent set");
    std::vector<ScoredParentSet> kept;
    for (const auto& [set, score] : by_set) {
      bool dominated = false;
      const auto k = static_cast<int>(set.size());
      // Enumerate proper subsets via bitmask over the set's members.
      for (int mask = 0; mask < (1 << k) - 1 && !dominated; ++mask) {
        std::vector<int> sub;
        for (int i = 0; i < k; ++i)
          if (mask & (1 << i)) sub.push_back(set[static_cast<std::size_t>(i)]);
        auto it = by_set.find(sub);
        if (it != by_set.end() && score <= it->second) dominated = true;
      }
      if (!dominated) kept.push_back({set, score});
    }
    cache.set_entries(v, std::move(kept));
  }
  return cache;
}

namespace detail {

inline double pairwise_mutual_information(const Dataset& data, int u, int v) {
  const int ru = data.arities[static_cast<std::size_t>(u)];
  const int rv = data.arities[static_cast<std::size_t>(v)];
  std::vector<int> joint(static_cast<std::size_t>(ru * rv), 0);
  std::vector<int> mu(static_cast<std::size_t>(ru), 0), mv(static_cast<std::size_t>(rv), 0);
  for (const auto& row : data.rows) {
    const int a = row[static_cast<std::size_t>(u)], b = row[static_cast<std::size_t>(v)];
    ++joint[static_cast<std::size_t>(a * rv + b)];
    ++mu[static_cast<std::size_t>(a)];
    ++mv[static_cast<std::size_t>(b)];
  }
  const double n = data.row_count();
  double mi = 0.0;
  for (int a = 0; a < ru; ++a)
    for (int b = 0; b < rv; ++b) {
      const int c = joint[static_cast<std::size_t>(a * rv + b)];
      if (c == 0) continue;
      mi += (c / n) *
            std::log(c * n /
                     (static_cast<double>(mu[static_cast<std::size_t>(a)]) *
                      mv[static_cast<std::size_t>(b)]));
    }
  return mi;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

template <typename Fn>
void for_each_subset_up_to(const std::vector<int>& pool, int max_size, Fn&& fn) {
  std::vector<int> current;
  auto rec = [&](auto&& self, std::size_t start) -> void {
    fn(current);
    if (static_cast<int>(current.size()) == max_size) return;
    for (std::size_t i = start; i < pool.size(); ++i) {
      current.push_back(pool[i]);
      self(self, i + 1);
      current.pop_back();
    }
  };
  rec(rec, 0);
}

}  // namespace detail

// Scores all candidate parent sets up to max_parent_size, then prunes.
// Exhaustive over all other variables while C(n-1, max_parent_size) stays
// under exhaustive_limit; beyond that, each variable's candidate pool is
// its top_k partners by pairwise mutual information.
inline ScoreCache build_cache(const Dataset& data, int max_parent_size,
                              int top_k = 20, double exhaustive_limit = 1e6,
                              double score_resolution = 1e-3) {
  require(max_parent_size >= 0, "max_parent_size must be >= 0");
  data.validate();
  const int n = data.variable_count();
  const bool exhaustive =
      detail::binomial(n - 1, max_parent_size) <= exhaustive_limit;

  std::vector<std::vector<ScoredParentSet>> raw(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int v = next.fetch_add(1);
      if (v >= n) return;
      std::vector<int> pool;
      if (exhaustive) {
        for (int u = 0; u < n; ++u)
          if (u != v) pool.push_back(u);
      } else {
        std::vector<std::pair<double, int>> ranked;
        for (int u = 0; u < n; ++u)
          if (u != v)
            ranked.emplace_back(-detail::pairwise_mutual_information(data, u, v), u);
        std::sort(ranked.begin(), ranked.end());
        const int k = std::min<int>(top_k, static_cast<int>(ranked.size()));
        for (int i = 0; i < k; ++i) pool.push_back(ranked[static_cast<std::size_t>(i)].second);
        std::sort(pool.begin(), pool.end());
      }
      auto& out = raw[static_cast<std::size_t>(v)];
      detail::for_each_subset_up_to(
          pool, max_parent_size, [&](const std::vector<int>& set) {
            out.push_back({set, snap_score(bic_score(data, v, set), score_resolution)});
          });
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(n));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return prune(raw);
}

// f(D) = sum over v of the cached score of v's parent set.
inline double dag_score(const ScoreCache& cache, const Dag& d) {
  double total = 0.0;
  for (int v = 0; v < d.vertex_count(); ++v) {
    auto s = cache.score_of(v, d.parents(v));
    if (!s.has_value()) {
      std::string set = "{";
      for (std::size_t i = 0; i < d.parents(v).size(); ++i)
        set += (i ? "," : "") + std::to_string(d.parents(v)[i]);
      fail("parent set " + set + "} of variable " + std::to_string(v) +
           " not in score cache");
    }
    total += *s;
  }
  return total;
}

enum class DeltaBicCategory {
  ExtremelyNegative,
  StronglyNegative,
  Negative,
  Neutral,
  Positive,
  StronglyPositive,
  ExtremelyPositive,
};

inline const char* to_string(DeltaBicCategory c) {
  switch (c) {
    case DeltaBicCategory::ExtremelyNegative: return "extremely negative";
    case DeltaBicCategory::StronglyNegative: return "strongly negative";
    case DeltaBicCategory::Negative: return "negative";
    case DeltaBicCategory::Neutral: return "neutral";
    case DeltaBicCategory::Positive: return "positive";
    case DeltaBicCategory::StronglyPositive: return "strongly positive";
    case DeltaBicCategory::ExtremelyPositive: return "extremely positive";
  }
  return "?";
}

struct DeltaBicReport {
  double score_before = 0.0;
  double score_after = 0.0;
  double delta = 0.0;
  DeltaBicCategory category = DeltaBicCategory::Neutral;
};

// Raftery evidence categories with boundaries at |delta| = 2, 6, 10.
inline DeltaBicCategory delta_bic_category(double delta) {
  const double a = std::abs(delta);
  int level = a > 10 ? 3 : a > 6 ? 2 : a > 2 ? 1 : 0;
  if (level == 0) return DeltaBicCategory::Neutral;
  if (delta > 0)
    return level == 3   ? DeltaBicCategory::ExtremelyPositive
           : level == 2 ? DeltaBicCategory::StronglyPositive
                        : DeltaBicCategory::Positive;
  return level == 3   ? DeltaBicCategory::ExtremelyNegative
         : level == 2 ? DeltaBicCategory::StronglyNegative
                      : DeltaBicCategory::Negative;
}

inline DeltaBicReport delta_bic(double before, double after) {
  DeltaBicReport rep;
  rep.score_before = before;
  rep.score_after = after;
  rep.delta = after - before;
  rep.category = delta_bic_category(rep.delta);
  return rep;
}

// Jaakkola/BLIP .jkl: first line n, then per variable a "<var> <#sets>"
// line followed by "<score> <k> <p1> ... <pk>" lines.
inline void write_jkl(std::ostream& os, const ScoreCache& cache) {
  os << cache.variable_count() << '\n';
  os << std::setprecision(17);
  for (int v = 0; v < cache.variable_count(); ++v) {
    const auto& es = cache.entries(v);
    os << v << ' ' << es.size() << '\n';
    for (const auto& e : es) {
      os << e.score << ' ' << e.parents.size();
      for (int p : e.parents) os << ' ' << p;
      os << '\n';
    }
  }
}

inline ScoreCache read_jkl(std::istream& is, double score_resolution = 1e-3) {
  std::string line;
  auto next_tokens = [&]() -> std::vector<std::string> {
    while (std::getline(is, line)) {
      auto toks = split_ws(line);
      if (!toks.empty()) return toks;
    }
    fail("unexpected end of .jkl file");
  };
  auto head = next_tokens();
  const int n = std::stoi(head[0]);
  std::vector<std::vector<ScoredParentSet>> raw(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto var_line = next_tokens();
    require(var_line.size() >= 2, "bad .jkl variable line");
    const int v = std::stoi(var_line[0]);
    require(v >= 0 && v < n, ".jkl variable id out of range");
    const int sets = std::stoi(var_line[1]);
    for (int s = 0; s < sets; ++s) {
      auto toks = next_tokens();
      require(toks.size() >= 2, "bad .jkl score line");
      ScoredParentSet e;
      e.score = snap_score(std::stod(toks[0]), score_resolution);
      const int k = std::stoi(toks[1]);
      require(static_cast<int>(toks.size()) == 2 + k, "bad .jkl parent count");
      for (int j = 0; j < k; ++j) e.parents.push_back(std::stoi(toks[static_cast<std::size_t>(2 + j)]));
      std::sort(e.parents.begin(), e.parents.end());
      raw[static_cast<std::size_t>(v)].push_back(std::move(e));
    }
  }
  return prune(raw);
}

}  // namespace twbn
