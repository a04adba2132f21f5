#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "twbn/subinstance.hpp"
#include "twbn/tree_decomposition.hpp"
#include "twbn/util.hpp"

namespace twbn {

enum class VarKind { Par, Acyc, Ord, Arc, Aux };

struct VarInfo {
  VarKind kind;
  // Par: a = local vertex, b = menu index. Acyc/Ord: locals a < b.
  // Arc: ordered pair (a, b), diagonal included. Aux: a = group, b = slot.
  int a = -1;
  int b = -1;
};

// Counter registers of one cardinality constraint, kept so that models built
// from semantic variables alone can be completed consistently.
struct CardGroup {
  enum class Kind { AtMostOne, AtMostK };
  Kind kind = Kind::AtMostK;
  std::vector<int> lits;  // positive variable ids, in counter order
  int bound = 0;
  int first_aux = 0;
  int aux_count = 0;
};

struct MaxSatModel {
  std::vector<std::uint8_t> values;  // 1-based by variable id
  long long weight = 0;

  bool value(int var) const { return values[static_cast<std::size_t>(var)] != 0; }
  bool satisfies(int lit) const { return lit > 0 ? value(lit) : !value(-lit); }
};

// The weighted partial MaxSAT instance for one subinstance.
class MaxSatProblem {
 public:
  int local_count = 0;
  int width_bound = 0;
  long long weight_scale = 1;
  std::vector<CardGroup> card_groups;

  int var_count() const { return static_cast<int>(info_.size()); }

  int new_var(VarKind kind, int a, int b) {
    info_.push_back({kind, a, b});
    return var_count();
  }

  const VarInfo& info(int var) const {
    return info_[static_cast<std::size_t>(var - 1)];
  }

  int count_kind(VarKind kind) const {
    int c = 0;
    for (const auto& vi : info_)
      if (vi.kind == kind) ++c;
    return c;
  }

  void add_hard(std::vector<int> lits) { hard_.push_back(std::move(lits)); }

  void add_soft_unit(int lit, long long weight) {
    add_soft_clause({lit}, weight);
  }

  void add_soft_clause(std::vector<int> lits, long long weight) {
    require(weight > 0, "soft weights must be positive");
    soft_.emplace_back(std::move(lits), weight);
  }

  const std::vector<std::vector<int>>& hard() const { return hard_; }
  const std::vector<std::pair<std::vector<int>, long long>>& soft() const {
    return soft_;
  }

  long long soft_total() const {
    long long t = 0;
    for (const auto& [cl, w] : soft_) t += w;
    return t;
  }

  long long top() const { return soft_total() + 1; }

  // Lookup tables, filled by encode().
  int par_var(int local, int menu) const {
    return par_[static_cast<std::size_t>(local)][static_cast<std::size_t>(menu)];
  }
  int menu_size(int local) const {
    return static_cast<int>(par_[static_cast<std::size_t>(local)].size());
  }
  int acyc_var(int u, int v) const { return pair_var(acyc_, u, v); }
  int ord_var(int u, int v) const { return pair_var(ord_, u, v); }
  int arc_var(int u, int v) const {
    return arc_[static_cast<std::size_t>(u * local_count + v)];
  }

  // Signed literal meaning "u precedes v".
  int acyc_lit(int u, int v) const { return u < v ? acyc_var(u, v) : -acyc_var(v, u); }
  int ord_lit(int u, int v) const { return u < v ? ord_var(u, v) : -ord_var(v, u); }

  long long evaluate_weight(const std::vector<std::uint8_t>& values) const {
    long long w = 0;
    for (const auto& [cl, weight] : soft_)
      for (int lit : cl) {
        const bool val = values[static_cast<std::size_t>(std::abs(lit))] != 0;
        if ((lit > 0) == val) {
          w += weight;
          break;
        }
      }
    return w;
  }

  // Index of the first violated hard clause, or -1 if all hold.
  int first_violated_hard(const std::vector<std::uint8_t>& values) const {
    for (std::size_t i = 0; i < hard_.size(); ++i) {
      bool sat = false;
      for (int lit : hard_[i]) {
        const bool val = values[static_cast<std::size_t>(std::abs(lit))] != 0;
        if ((lit > 0) == val) {
          sat = true;
          break;
        }
      }
      if (!sat) return static_cast<int>(i);
    }
    return -1;
  }

  std::vector<std::vector<int>> par_;
  std::vector<int> acyc_, ord_, arc_;

 private:
  int pair_var(const std::vector<int>& table, int u, int v) const {
    // Table is indexed by pairs u < v in lexicographic order.
    const int n = local_count;
    return table[static_cast<std::size_t>(u * n - u * (u + 1) / 2 + (v - u - 1))];
  }

  std::vector<VarInfo> info_;
  std::vector<std::vector<int>> hard_;
  std::vector<std::pair<std::vector<int>, long long>> soft_;
};

namespace detail {

// Pairwise for small groups, sequential counter above that.
inline void encode_exactly_one(MaxSatProblem& p, const std::vector<int>& vars,
                               int group_hint) {
  require(!vars.empty(), "exactly-one over an empty group");
  p.add_hard(std::vector<int>(vars.begin(), vars.end()));
  if (vars.size() <= 5) {
    for (std::size_t i = 0; i < vars.size(); ++i)
      for (std::size_t j = i + 1; j < vars.size(); ++j)
        p.add_hard({-vars[i], -vars[j]});
    return;
  }
  CardGroup g;
  g.kind = CardGroup::Kind::AtMostOne;
  g.lits = vars;
  g.bound = 1;
  const int m = static_cast<int>(vars.size());
  g.first_aux = p.var_count() + 1;
  g.aux_count = m - 1;
  std::vector<int> s(static_cast<std::size_t>(m - 1));
  for (int i = 0; i < m - 1; ++i)
    s[static_cast<std::size_t>(i)] = p.new_var(VarKind::Aux, group_hint, i);
  p.add_hard({-vars[0], s[0]});
  for (int i = 1; i < m - 1; ++i) {
    p.add_hard({-vars[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(i)]});
    p.add_hard({-s[static_cast<std::size_t>(i - 1)], s[static_cast<std::size_t>(i)]});
    p.add_hard({-vars[static_cast<std::size_t>(i)], -s[static_cast<std::size_t>(i - 1)]});
  }
  p.add_hard({-vars[static_cast<std::size_t>(m - 1)], -s[static_cast<std::size_t>(m - 2)]});
  p.card_groups.push_back(std::move(g));
}

// Sinz sequential counter for sum(vars) <= bound.
inline void encode_at_most_k(MaxSatProblem& p, const std::vector<int>& vars,
                             int bound, int group_hint) {
  const int m = static_cast<int>(vars.size());
  if (m <= bound) return;
  if (bound == 0) {
    for (int v : vars) p.add_hard({-v});
    return;
  }
  CardGroup g;
  g.kind = CardGroup::Kind::AtMostK;
  g.lits = vars;
  g.bound = bound;
  g.first_aux = p.var_count() + 1;
  g.aux_count = (m - 1) * bound;
  auto s = [&](int i, int j) {  // i in 1..m-1, j in 1..bound
    return g.first_aux + (i - 1) * bound + (j - 1);
  };
  for (int i = 1; i <= m - 1; ++i)
    for (int j = 1; j <= bound; ++j) p.new_var(VarKind::Aux, group_hint, s(i, j));
  p.add_hard({-vars[0], s(1, 1)});
  for (int j = 2; j <= bound; ++j) p.add_hard({-s(1, j)});
  for (int i = 2; i <= m - 1; ++i) {
    p.add_hard({-vars[static_cast<std::size_t>(i - 1)], s(i, 1)});
    p.add_hard({-s(i - 1, 1), s(i, 1)});
    for (int j = 2; j <= bound; ++j) {
      p.add_hard({-vars[static_cast<std::size_t>(i - 1)], -s(i - 1, j - 1), s(i, j)});
      p.add_hard({-s(i - 1, j), s(i, j)});
    }
    p.add_hard({-vars[static_cast<std::size_t>(i - 1)], -s(i - 1, bound)});
  }
  p.add_hard({-vars[static_cast<std::size_t>(m - 1)], -s(m - 1, bound)});
  p.card_groups.push_back(std::move(g));
}

}  // namespace detail

// Builds the weighted partial MaxSAT instance for a subinstance: linear
// orderings for the DAG and the elimination game, moralization and fill-in
// arcs, the out-degree width bound, virtual-edge and conditional virtual-arc
// constraints, and soft unit clauses carrying the scaled offset scores.
inline MaxSatProblem encode(const Subinstance& sub, int width_bound,
                            long long weight_scale, bool arc_direction_mutex = true) {
  require(width_bound >= 1, "treewidth bound must be >= 1");
  require(weight_scale >= 1, "weight scale must be >= 1");
  MaxSatProblem p;
  const int n = sub.size();
  p.local_count = n;
  p.width_bound = width_bound;
  p.weight_scale = weight_scale;

  for (int v = 0; v < n; ++v) {
    require(!sub.menus[static_cast<std::size_t>(v)].empty(),
            "empty menu for a window vertex");
    std::vector<int> vars;
    for (std::size_t m = 0; m < sub.menus[static_cast<std::size_t>(v)].size(); ++m)
      vars.push_back(p.new_var(VarKind::Par, v, static_cast<int>(m)));
    p.par_.push_back(std::move(vars));
  }
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) p.acyc_.push_back(p.new_var(VarKind::Acyc, u, v));
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) p.ord_.push_back(p.new_var(VarKind::Ord, u, v));
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) p.arc_.push_back(p.new_var(VarKind::Arc, u, v));

  // Transitivity of both linear orderings.
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      if (v == u) continue;
      for (int w = 0; w < n; ++w) {
        if (w == u || w == v) continue;
        p.add_hard({-p.acyc_lit(u, v), -p.acyc_lit(v, w), p.acyc_lit(u, w)});
        p.add_hard({-p.ord_lit(u, v), -p.ord_lit(v, w), p.ord_lit(u, w)});
      }
    }

  // No self-loops in the moralized graph.
  for (int v = 0; v < n; ++v) p.add_hard({-p.arc_var(v, v)});

  // Exactly one parent set per vertex.
  for (int v = 0; v < n; ++v) {
    std::vector<int> vars;
    for (int m = 0; m < p.menu_size(v); ++m) vars.push_back(p.par_var(v, m));
    detail::encode_exactly_one(p, vars, v);
  }

  for (int v = 0; v < n; ++v) {
    const auto& menu = sub.menus[static_cast<std::size_t>(v)];
    for (std::size_t m = 0; m < menu.size(); ++m) {
      const int pv = p.par_var(v, static_cast<int>(m));
      std::vector<int> local_parents;
      for (int gp : menu[m].parents) {
        const int u = sub.local_of(gp);
        if (u >= 0) local_parents.push_back(u);
      }
      for (int u : local_parents) {
        // Parents precede their child in the topological ordering...
        p.add_hard({-pv, p.acyc_lit(u, v)});
        // ...and contribute a moral-graph arc along the elimination order.
        p.add_hard({-pv, -p.ord_lit(u, v), p.arc_var(u, v)});
        p.add_hard({-pv, -p.ord_lit(v, u), p.arc_var(v, u)});
      }
      // Moralization: co-parents are coupled.
      for (std::size_t i = 0; i < local_parents.size(); ++i)
        for (std::size_t j = i + 1; j < local_parents.size(); ++j) {
          const int u = local_parents[i], w = local_parents[j];
          p.add_hard({-pv, -p.ord_lit(u, w), p.arc_var(u, w)});
          p.add_hard({-pv, -p.ord_lit(w, u), p.arc_var(w, u)});
        }
      // Conditional virtual arcs fortify acyclicity.
      for (int gu : menu[m].forced_sources) {
        const int u = sub.local_of(gu);
        p.add_hard({-pv, p.acyc_lit(u, v)});
      }
    }
  }

  // Fill-in edges of the elimination game.
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      if (v == u) continue;
      for (int w = 0; w < n; ++w) {
        if (w == u || w == v) continue;
        p.add_hard({-p.arc_var(u, v), -p.arc_var(u, w), -p.ord_lit(v, w),
                    p.arc_var(v, w)});
      }
    }

  // Out-degree bound: at most W arcs leave any vertex.
  for (int v = 0; v < n; ++v) {
    std::vector<int> vars;
    for (int w = 0; w < n; ++w)
      if (w != v) vars.push_back(p.arc_var(v, w));
    detail::encode_at_most_k(p, vars, width_bound, v);
  }

  // At most one arc direction between any pair (redundant, speeds solving).
  if (arc_direction_mutex)
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        p.add_hard({-p.arc_var(u, v), -p.arc_var(v, u)});

  // Virtual edges fortify the treewidth bound.
  for (auto [gu, gv] : sub.virtual_edges) {
    const int u = sub.local_of(gu), v = sub.local_of(gv);
    p.add_hard({-p.ord_lit(u, v), p.arc_var(u, v)});
    p.add_hard({-p.ord_lit(v, u), p.arc_var(v, u)});
  }

  // Soft unit clauses: the scaled offset score of each parent set.
  for (int v = 0; v < n; ++v) {
    const auto& menu = sub.menus[static_cast<std::size_t>(v)];
    for (std::size_t m = 0; m < menu.size(); ++m) {
      const long long w = std::llround(weight_scale * menu[m].offset_score);
      if (w > 0) p.add_soft_unit(p.par_var(v, static_cast<int>(m)), w);
    }
  }
  return p;
}

// Integer weight of the incumbent assignment (K_0), under the same rounding
// as the soft clauses.
inline long long incumbent_weight(const MaxSatProblem& p, const Subinstance& sub) {
  long long k0 = 0;
  for (int v = 0; v < sub.size(); ++v) {
    const auto& e = sub.menus[static_cast<std::size_t>(v)]
                             [static_cast<std::size_t>(sub.incumbent_index(v))];
    k0 += std::llround(p.weight_scale * e.offset_score);
  }
  return k0;
}

// A decoded model: parent choices, both total orders, moral arcs, and the
// certifying local tree decomposition.
struct DecodedLocal {
  std::vector<int> choice;  // menu index per local vertex
  std::vector<int> topo_order;
  EliminationOrdering elimination;
  std::vector<std::pair<int, int>> arcs;
  TreeDecomposition local_td;
};

// Local parent sets (restricted to the window) of a menu selection.
inline std::vector<std::vector<int>> local_parent_sets(const Subinstance& sub,
                                                       const std::vector<int>& choice) {
  std::vector<std::vector<int>> out;
  for (int v = 0; v < sub.size(); ++v) {
    const auto& entry = sub.menus[static_cast<std::size_t>(v)]
                                 [static_cast<std::size_t>(choice[static_cast<std::size_t>(v)])];
    std::vector<int> ps;
    for (int gp : entry.parents) {
      const int u = sub.local_of(gp);
      if (u >= 0) ps.push_back(u);
    }
    out.push_back(std::move(ps));
  }
  return out;
}

// Extracts the structure from a model. The model is verified against the
// hard clauses first; violations are solver-protocol errors.
inline DecodedLocal decode(const MaxSatProblem& p, const MaxSatModel& model,
                           const Subinstance& sub) {
  require(static_cast<int>(model.values.size()) == p.var_count() + 1,
          "model size mismatch");
  const int bad = p.first_violated_hard(model.values);
  require(bad < 0, "solver protocol error: model violates hard clause " +
                       std::to_string(bad));
  const int n = p.local_count;
  DecodedLocal out;
  for (int v = 0; v < n; ++v) {
    int chosen = -1;
    for (int m = 0; m < p.menu_size(v); ++m)
      if (model.value(p.par_var(v, m))) {
        require(chosen < 0, "solver protocol error: two parent sets chosen");
        chosen = m;
      }
    require(chosen >= 0, "solver protocol error: no parent set chosen");
    out.choice.push_back(chosen);
  }

  auto order_from = [&](auto precedes) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), precedes);
    return order;
  };
  out.topo_order = order_from(
      [&](int u, int v) { return model.satisfies(p.acyc_lit(u, v)); });
  out.elimination.order = order_from(
      [&](int u, int v) { return model.satisfies(p.ord_lit(u, v)); });

  UndirectedGraph arc_graph(n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (u != v && model.value(p.arc_var(u, v))) {
        out.arcs.emplace_back(u, v);
        arc_graph.add_edge(u, v);
      }
  out.local_td = td_from_elimination(out.elimination, arc_graph);
  require(out.local_td.width() <= p.width_bound,
          "decoded decomposition exceeds the width bound");
  return out;
}

// Fills cardinality-counter registers of a model whose semantic variables
// are already set, so that it satisfies the sequential-counter clauses.
inline void complete_card_auxiliaries(const MaxSatProblem& p, MaxSatModel& model) {
  for (const auto& g : p.card_groups) {
    int running = 0;
    const int m = static_cast<int>(g.lits.size());
    for (int i = 1; i <= m - 1; ++i) {
      if (model.value(g.lits[static_cast<std::size_t>(i - 1)])) ++running;
      if (g.kind == CardGroup::Kind::AtMostOne) {
        model.values[static_cast<std::size_t>(g.first_aux + (i - 1))] =
            running >= 1 ? 1 : 0;
      } else {
        for (int j = 1; j <= g.bound; ++j)
          model.values[static_cast<std::size_t>(g.first_aux + (i - 1) * g.bound +
                                                (j - 1))] = running >= j ? 1 : 0;
      }
    }
  }
}

// Classic DIMACS weighted-partial format.
inline void emit_wcnf(std::ostream& os, const MaxSatProblem& p) {
  const long long top = p.top();
  os << "p wcnf " << p.var_count() << ' '
     << p.hard().size() + p.soft().size() << ' ' << top << '\n';
  for (const auto& cl : p.hard()) {
    os << top;
    for (int lit : cl) os << ' ' << lit;
    os << " 0\n";
  }
  for (const auto& [cl, w] : p.soft()) {
    os << w;
    for (int lit : cl) os << ' ' << lit;
    os << " 0\n";
  }
}

// Reads a classic weighted-partial DIMACS instance. Clauses at the header's
// top weight are hard; kind information is not recoverable from the file.
inline MaxSatProblem read_wcnf(std::istream& is) {
  MaxSatProblem p;
  std::string line;
  long long top = -1;
  while (std::getline(is, line)) {
    auto toks = split_ws(line);
    if (toks.empty() || toks[0] == "c") continue;
    if (toks[0] == "p") {
      require(toks.size() == 5 && toks[1] == "wcnf", "bad WCNF header");
      const int vars = std::stoi(toks[2]);
      top = std::stoll(toks[4]);
      for (int i = 0; i < vars; ++i) p.new_var(VarKind::Aux, i, 0);
      continue;
    }
    require(top >= 0, "WCNF clause before header");
    const long long w = std::stoll(toks[0]);
    std::vector<int> lits;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      const int lit = std::stoi(toks[i]);
      if (lit == 0) break;
      require(std::abs(lit) <= p.var_count(), "WCNF literal out of range");
      lits.push_back(lit);
    }
    if (w == top)
      p.add_hard(std::move(lits));
    else
      p.add_soft_clause(std::move(lits), w);
  }
  require(top >= 0, "WCNF file missing header");
  return p;
}

// Debugging sidecar: one comment line per variable.
inline void write_varmap(std::ostream& os, const MaxSatProblem& p,
                         const Subinstance& sub) {
  auto global = [&](int local) {
    return sub.vertices[static_cast<std::size_t>(local)];
  };
  for (int id = 1; id <= p.var_count(); ++id) {
    const auto& vi = p.info(id);
    switch (vi.kind) {
      case VarKind::Par: {
        const auto& e = sub.menus[static_cast<std::size_t>(vi.a)]
                                 [static_cast<std::size_t>(vi.b)];
        os << "c varmap par " << global(vi.a) << " {";
        for (std::size_t i = 0; i < e.parents.size(); ++i)
          os << (i ? "," : "") << e.parents[i];
        os << "} " << id << '\n';
        break;
      }
      case VarKind::Acyc:
        os << "c varmap acyc " << global(vi.a) << ' ' << global(vi.b) << ' ' << id << '\n';
        break;
      case VarKind::Ord:
        os << "c varmap ord " << global(vi.a) << ' ' << global(vi.b) << ' ' << id << '\n';
        break;
      case VarKind::Arc:
        os << "c varmap arc " << global(vi.a) << ' ' << global(vi.b) << ' ' << id << '\n';
        break;
      case VarKind::Aux:
        os << "c varmap aux " << vi.a << ' ' << vi.b << ' ' << id << '\n';
        break;
    }
  }
}

}  // namespace twbn
