#pragma once

#include <cerrno>
#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twbn/maxsat.hpp"
#include "twbn/subinstance.hpp"
#include "twbn/util.hpp"

namespace twbn {

struct SolverConfig {
  enum class Mode { External, Oracle, Internal };
  Mode mode = Mode::Internal;
  std::string command;  // external template; "{wcnf}" is replaced by the file
  double timeout_seconds = 2.0;
};

struct SolveOutcome {
  enum class Status { Optimum, Satisfiable, Unknown, Error };
  Status status = Status::Unknown;
  std::optional<MaxSatModel> model;
  double wall_seconds = 0.0;
  std::string message;
};

namespace detail {

// Depth-first branch and bound over the clauses with unit propagation.
// Anytime: returns the best model found when the deadline expires.
class BranchAndBound {
 public:
  BranchAndBound(const MaxSatProblem& p, double timeout_seconds)
      : p_(p), deadline_(std::chrono::steady_clock::now() +
                         std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                             std::chrono::duration<double>(timeout_seconds))) {
    const int nv = p.var_count();
    values_.assign(static_cast<std::size_t>(nv) + 1, 0);
    pos_occ_.resize(static_cast<std::size_t>(nv) + 1);
    neg_occ_.resize(static_cast<std::size_t>(nv) + 1);
    const auto& hard = p.hard();
    free_count_.reserve(hard.size() + p.soft().size());
    sat_count_.assign(hard.size() + p.soft().size(), 0);
    clauses_.reserve(hard.size() + p.soft().size());
    for (const auto& cl : hard) add_clause(cl, -1);
    for (const auto& [cl, w] : p.soft()) add_clause(cl, w);
    remaining_ = p.soft_total();
  }

  SolveOutcome run() {
    SolveOutcome out;
    const auto start = std::chrono::steady_clock::now();
    bool complete = true;
    if (initial_propagate())
      complete = search();
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (best_weight_ < 0) {
      out.status = complete ? SolveOutcome::Status::Error : SolveOutcome::Status::Unknown;
      if (complete) out.message = "hard clauses are unsatisfiable";
      return out;
    }
    out.status = complete ? SolveOutcome::Status::Optimum
                          : SolveOutcome::Status::Satisfiable;
    MaxSatModel model;
    model.values = best_values_;
    model.weight = best_weight_;
    out.model = std::move(model);
    return out;
  }

 private:
  struct Clause {
    std::vector<int> lits;
    long long weight;  // -1 for hard
  };

  void add_clause(const std::vector<int>& lits, long long weight) {
    const int id = static_cast<int>(clauses_.size());
    clauses_.push_back({lits, weight});
    free_count_.push_back(static_cast<int>(lits.size()));
    for (int lit : lits)
      (lit > 0 ? pos_occ_[static_cast<std::size_t>(lit)]
               : neg_occ_[static_cast<std::size_t>(-lit)])
          .push_back(id);
  }

  bool timed_out() {
    if (++ticks_ % 2048 != 0) return timeout_flag_;
    if (std::chrono::steady_clock::now() >= deadline_) timeout_flag_ = true;
    return timeout_flag_;
  }

  // Assigns var and updates clause counters. Returns false on a hard
  // conflict. Newly implied units are appended to queue_.
  bool assign(int var, int8_t val) {
    values_[static_cast<std::size_t>(var)] = val;
    trail_.push_back(var);
    const auto& sat_side = val > 0 ? pos_occ_[static_cast<std::size_t>(var)]
                                   : neg_occ_[static_cast<std::size_t>(var)];
    const auto& unsat_side = val > 0 ? neg_occ_[static_cast<std::size_t>(var)]
                                     : pos_occ_[static_cast<std::size_t>(var)];
    bool ok = true;
    for (int id : sat_side) {
      if (sat_count_[static_cast<std::size_t>(id)]++ == 0) {
        const long long w = clauses_[static_cast<std::size_t>(id)].weight;
        if (w >= 0) {
          earned_ += w;
          remaining_ -= w;
        }
      }
      --free_count_[static_cast<std::size_t>(id)];
    }
    for (int id : unsat_side) {
      const int free = --free_count_[static_cast<std::size_t>(id)];
      if (sat_count_[static_cast<std::size_t>(id)] > 0) continue;
      const long long w = clauses_[static_cast<std::size_t>(id)].weight;
      if (free == 0) {
        if (w < 0)
          ok = false;
        else
          remaining_ -= w;
      } else if (free == 1 && w < 0) {
        queue_.push_back(id);
      }
    }
    return ok;
  }

  void undo_to(std::size_t mark) {
    while (trail_.size() > mark) {
      const int var = trail_.back();
      trail_.pop_back();
      const int8_t val = values_[static_cast<std::size_t>(var)];
      const auto& sat_side = val > 0 ? pos_occ_[static_cast<std::size_t>(var)]
                                     : neg_occ_[static_cast<std::size_t>(var)];
      const auto& unsat_side = val > 0 ? neg_occ_[static_cast<std::size_t>(var)]
                                       : pos_occ_[static_cast<std::size_t>(var)];
      for (int id : sat_side) {
        ++free_count_[static_cast<std::size_t>(id)];
        if (--sat_count_[static_cast<std::size_t>(id)] == 0) {
          const long long w = clauses_[static_cast<std::size_t>(id)].weight;
          if (w >= 0) {
            earned_ -= w;
            remaining_ += w;
          }
        }
      }
      for (int id : unsat_side) {
        const int free = free_count_[static_cast<std::size_t>(id)]++;
        if (sat_count_[static_cast<std::size_t>(id)] > 0) continue;
        const long long w = clauses_[static_cast<std::size_t>(id)].weight;
        if (free == 0 && w >= 0) remaining_ += w;
      }
      values_[static_cast<std::size_t>(var)] = 0;
    }
    queue_.clear();
  }

  // Unit propagation from queued clauses. Returns false on conflict.
  bool propagate() {
    while (!queue_.empty()) {
      const int id = queue_.back();
      queue_.pop_back();
      if (sat_count_[static_cast<std::size_t>(id)] > 0) continue;
      if (free_count_[static_cast<std::size_t>(id)] != 1) continue;
      int unit = 0;
      for (int lit : clauses_[static_cast<std::size_t>(id)].lits)
        if (values_[static_cast<std::size_t>(std::abs(lit))] == 0) {
          unit = lit;
          break;
        }
      if (unit == 0) continue;
      if (!assign(std::abs(unit), unit > 0 ? 1 : -1)) return false;
    }
    return true;
  }

  bool initial_propagate() {
    // Seed with initial unit clauses.
    for (std::size_t id = 0; id < clauses_.size(); ++id)
      if (clauses_[id].weight < 0 && clauses_[id].lits.size() == 1)
        queue_.push_back(static_cast<int>(id));
    return propagate();
  }

  int pick_branch_var() {
    for (int var = next_var_hint_; var <= p_.var_count(); ++var)
      if (values_[static_cast<std::size_t>(var)] == 0) {
        next_var_hint_ = var;
        return var;
      }
    return 0;
  }

  // Returns true if the subtree was searched exhaustively.
  bool search() {
    if (timed_out()) return false;
    if (earned_ + remaining_ <= best_weight_) return true;  // bound
    const int saved_hint = next_var_hint_;
    const int var = pick_branch_var();
    if (var == 0) {
      if (earned_ > best_weight_) {
        best_weight_ = earned_;
        best_values_.assign(values_.begin(), values_.end());
      }
      return true;
    }
    bool complete = true;
    const bool par_first_true = p_.info(var).kind == VarKind::Par;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const int8_t val = (attempt == 0) == par_first_true ? 1 : -1;
      const std::size_t mark = trail_.size();
      if (assign(var, val) && propagate()) {
        if (!search()) complete = false;
      }
      undo_to(mark);
      next_var_hint_ = var;
      if (timeout_flag_) {
        complete = false;
        break;
      }
    }
    next_var_hint_ = saved_hint;
    return complete;
  }

  const MaxSatProblem& p_;
  std::chrono::steady_clock::time_point deadline_;
  bool timeout_flag_ = false;
  std::uint64_t ticks_ = 0;

  std::vector<Clause> clauses_;
  std::vector<int> free_count_;
  std::vector<int> sat_count_;
  std::vector<std::vector<int>> pos_occ_, neg_occ_;
  std::vector<int8_t> values_;
  std::vector<int> trail_;
  std::vector<int> queue_;
  int next_var_hint_ = 1;

  long long earned_ = 0;
  long long remaining_ = 0;
  long long best_weight_ = -1;
  std::vector<std::uint8_t> best_values_;
};

}  // namespace detail

// Exact anytime search over the clause set itself; independent of the
// subinstance semantics.
inline SolveOutcome solve_internal(const MaxSatProblem& p, double timeout_seconds) {
  detail::BranchAndBound bb(p, timeout_seconds);
  auto out = bb.run();
  if (out.model.has_value()) {
    // Best-values snapshots store int8 flags; normalize to 0/1.
    for (auto& v : out.model->values) v = v == 1 ? 1 : 0;
    out.model->weight = p.evaluate_weight(out.model->values);
  }
  return out;
}

// Exhaustive enumeration of all menu combinations, checking local
// acyclicity (with imposed virtual arcs) directly and the width bound by
// trying elimination orderings of the extended moral graph. Serves as the
// independent reference for the encoding.
inline SolveOutcome solve_oracle(const MaxSatProblem& p, const Subinstance& sub) {
  const auto start = std::chrono::steady_clock::now();
  SolveOutcome out;
  const int n = sub.size();
  if (n > 8) {
    out.status = SolveOutcome::Status::Error;
    out.message = "oracle too large: more than 8 window vertices";
    return out;
  }
  double combos = 1.0;
  for (const auto& menu : sub.menus) combos *= static_cast<double>(menu.size());
  if (combos > 1e5) {
    out.status = SolveOutcome::Status::Error;
    out.message = "oracle too large: menu product exceeds 1e5";
    return out;
  }

  // Local virtual edges.
  std::vector<std::pair<int, int>> virt;
  for (auto [gu, gv] : sub.virtual_edges)
    virt.emplace_back(sub.local_of(gu), sub.local_of(gv));

  // Memoized width feasibility per extended-moral-graph edge set: a witness
  // elimination ordering of width <= W, if one exists.
  std::map<std::vector<std::pair<int, int>>, std::optional<std::vector<int>>> memo;
  auto width_witness = [&](const UndirectedGraph& g)
      -> const std::optional<std::vector<int>>& {
    auto key = g.edges();
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::optional<std::vector<int>> witness;
    do {
      if (width_of_elimination({perm}, g) <= p.width_bound) {
        witness = perm;
        break;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return memo.emplace(std::move(key), std::move(witness)).first->second;
  };

  long long best = -1;
  std::vector<int> best_choice, best_topo, best_elim;
  std::vector<int> choice(static_cast<std::size_t>(n), 0);
  for (;;) {
    long long weight = 0;
    std::vector<std::pair<int, int>> arcs;  // local DAG arcs + virtual arcs
    UndirectedGraph ext_moral(n);
    for (auto [u, v] : virt) ext_moral.add_edge(u, v);
    for (int v = 0; v < n; ++v) {
      const auto& e = sub.menus[static_cast<std::size_t>(v)]
                               [static_cast<std::size_t>(choice[static_cast<std::size_t>(v)])];
      const long long w = std::llround(p.weight_scale * e.offset_score);
      if (w > 0) weight += w;
      std::vector<int> locals;
      for (int gp : e.parents) {
        const int u = sub.local_of(gp);
        if (u >= 0) locals.push_back(u);
      }
      for (int u : locals) {
        arcs.emplace_back(u, v);
        ext_moral.add_edge(u, v);
      }
      for (std::size_t i = 0; i < locals.size(); ++i)
        for (std::size_t j = i + 1; j < locals.size(); ++j)
          ext_moral.add_edge(locals[i], locals[j]);
      for (int gu : e.forced_sources) arcs.emplace_back(sub.local_of(gu), v);
    }
    if (weight > best) {
      auto topo = topological_order_of_arcs(n, arcs);
      if (topo.has_value()) {
        const auto& witness = width_witness(ext_moral);
        if (witness.has_value()) {
          best = weight;
          best_choice = choice;
          best_topo = *topo;
          best_elim = *witness;
        }
      }
    }
    int v = 0;
    while (v < n) {
      auto& c = choice[static_cast<std::size_t>(v)];
      if (++c < static_cast<int>(sub.menus[static_cast<std::size_t>(v)].size())) break;
      c = 0;
      ++v;
    }
    if (v == n) break;
  }

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (best < 0) {
    out.status = SolveOutcome::Status::Error;
    out.message = "no feasible menu combination";
    return out;
  }

  // Translate the winning combination into a full model.
  MaxSatModel model;
  model.values.assign(static_cast<std::size_t>(p.var_count()) + 1, 0);
  for (int v = 0; v < n; ++v)
    model.values[static_cast<std::size_t>(
        p.par_var(v, best_choice[static_cast<std::size_t>(v)]))] = 1;
  std::vector<int> topo_pos(static_cast<std::size_t>(n)), elim_pos(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    topo_pos[static_cast<std::size_t>(best_topo[static_cast<std::size_t>(i)])] = i;
    elim_pos[static_cast<std::size_t>(best_elim[static_cast<std::size_t>(i)])] = i;
  }
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      if (topo_pos[static_cast<std::size_t>(u)] < topo_pos[static_cast<std::size_t>(v)])
        model.values[static_cast<std::size_t>(p.acyc_var(u, v))] = 1;
      if (elim_pos[static_cast<std::size_t>(u)] < elim_pos[static_cast<std::size_t>(v)])
        model.values[static_cast<std::size_t>(p.ord_var(u, v))] = 1;
    }
  // Arc variables: the fill-in closure of the winning extended moral graph.
  UndirectedGraph ext_moral(n);
  for (auto [u, v] : virt) ext_moral.add_edge(u, v);
  const auto parent_sets = local_parent_sets(sub, best_choice);
  for (int v = 0; v < n; ++v) {
    for (int u : parent_sets[static_cast<std::size_t>(v)]) ext_moral.add_edge(u, v);
    for (std::size_t i = 0; i < parent_sets[static_cast<std::size_t>(v)].size(); ++i)
      for (std::size_t j = i + 1; j < parent_sets[static_cast<std::size_t>(v)].size(); ++j)
        ext_moral.add_edge(parent_sets[static_cast<std::size_t>(v)][i],
                           parent_sets[static_cast<std::size_t>(v)][j]);
  }
  const auto higher = detail::elimination_neighborhoods({best_elim}, ext_moral);
  for (int v = 0; v < n; ++v)
    for (int w : higher[static_cast<std::size_t>(v)])
      model.values[static_cast<std::size_t>(p.arc_var(v, w))] = 1;
  complete_card_auxiliaries(p, model);
  model.weight = p.evaluate_weight(model.values);
  require(model.weight == best, "oracle model weight mismatch");
  out.status = SolveOutcome::Status::Optimum;
  out.model = std::move(model);
  return out;
}

namespace detail {

struct ParsedSolverOutput {
  std::string status_line;
  std::vector<std::vector<std::string>> model_blocks;
};

inline ParsedSolverOutput split_solver_output(const std::string& text) {
  ParsedSolverOutput out;
  std::istringstream is(text);
  std::string line;
  bool in_block = false;
  while (std::getline(is, line)) {
    auto toks = split_ws(line);
    if (toks.empty()) {
      in_block = false;
      continue;
    }
    if (toks[0] == "v") {
      if (!in_block) {
        out.model_blocks.emplace_back();
        in_block = true;
      }
      out.model_blocks.back().insert(out.model_blocks.back().end(),
                                     toks.begin() + 1, toks.end());
    } else {
      in_block = false;
      if (toks[0] == "s") {
        out.status_line = line.substr(line.find('s') + 1);
        while (!out.status_line.empty() && out.status_line.front() == ' ')
          out.status_line.erase(out.status_line.begin());
      }
    }
  }
  return out;
}

// Accepts both signed-literal lists and 0/1 bitstrings.
inline std::optional<std::vector<std::uint8_t>> parse_model_block(
    const std::vector<std::string>& tokens, int var_count) {
  if (tokens.empty()) return std::nullopt;
  std::string bits;
  bool all_binary = true;
  for (const auto& t : tokens) {
    if (t.find_first_not_of("01") != std::string::npos) {
      all_binary = false;
      break;
    }
    bits += t;
  }
  std::vector<std::uint8_t> values(static_cast<std::size_t>(var_count) + 1, 0);
  if (all_binary && static_cast<int>(bits.size()) == var_count &&
      (tokens.size() == 1 || var_count > static_cast<int>(tokens.size()))) {
    for (int i = 0; i < var_count; ++i)
      values[static_cast<std::size_t>(i + 1)] =
          bits[static_cast<std::size_t>(i)] == '1' ? 1 : 0;
    return values;
  }
  for (const auto& t : tokens) {
    long lit;
    try {
      lit = std::stol(t);
    } catch (...) {
      return std::nullopt;
    }
    if (lit == 0) continue;  // terminator
    const long var = std::labs(lit);
    if (var > var_count) return std::nullopt;
    values[static_cast<std::size_t>(var)] = lit > 0 ? 1 : 0;
  }
  return values;
}

}  // namespace detail

// Runs an external MaxSAT solver on the emitted WCNF with a hard wall-clock
// timeout, harvesting the last printed model (MaxSAT-evaluation output
// conventions).
inline SolveOutcome solve_external(const MaxSatProblem& p, const SolverConfig& cfg) {
  SolveOutcome out;
  const auto start = std::chrono::steady_clock::now();

  char path[] = "/tmp/twbn-XXXXXX.wcnf";
  const int fd = mkstemps(path, 5);
  if (fd < 0) {
    out.status = SolveOutcome::Status::Error;
    out.message = "cannot create temporary WCNF file";
    return out;
  }
  {
    std::ofstream os(path);
    emit_wcnf(os, p);
  }
  close(fd);

  std::string cmd = cfg.command;
  const std::string placeholder = "{wcnf}";
  if (auto at = cmd.find(placeholder); at != std::string::npos) {
    while ((at = cmd.find(placeholder)) != std::string::npos)
      cmd.replace(at, placeholder.size(), path);
  } else {
    cmd += " ";
    cmd += path;
  }

  int pipefd[2];
  if (pipe(pipefd) != 0) {
    std::remove(path);
    out.status = SolveOutcome::Status::Error;
    out.message = "pipe failed";
    return out;
  }
  const pid_t pid = fork();
  if (pid < 0) {
    std::remove(path);
    out.status = SolveOutcome::Status::Error;
    out.message = "solver spawn failed";
    return out;
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(pipefd[1], STDOUT_FILENO);
    close(pipefd[0]);
    close(pipefd[1]);
    execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(pipefd[1]);

  std::string output;
  bool killed = false;
  auto read_until = [&](std::chrono::steady_clock::time_point limit) {
    char buf[4096];
    for (;;) {
      const auto now = std::chrono::steady_clock::now();
      const int wait_ms =
          now >= limit ? 0
                       : static_cast<int>(
                             std::chrono::duration_cast<std::chrono::milliseconds>(
                                 limit - now)
                                 .count()) +
                             1;
      struct pollfd pfd{pipefd[0], POLLIN, 0};
      const int r = poll(&pfd, 1, wait_ms);
      if (r > 0) {
        const ssize_t got = read(pipefd[0], buf, sizeof buf);
        if (got <= 0) return true;  // EOF: child closed stdout
        output.append(buf, static_cast<std::size_t>(got));
      } else if (r == 0) {
        return false;  // timeout
      } else if (errno != EINTR) {
        return true;
      }
    }
  };

  const auto deadline =
      start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                  std::chrono::duration<double>(cfg.timeout_seconds));
  if (!read_until(deadline)) {
    killed = true;
    kill(-pid, SIGTERM);
    // Grace period: keep harvesting whatever the solver prints on the way out.
    if (!read_until(std::chrono::steady_clock::now() + std::chrono::seconds(1)))
      kill(-pid, SIGKILL);
    read_until(std::chrono::steady_clock::now() + std::chrono::milliseconds(200));
  }
  close(pipefd[0]);
  int wait_status = 0;
  waitpid(pid, &wait_status, 0);
  std::remove(path);
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto parsed = detail::split_solver_output(output);
  std::optional<std::vector<std::uint8_t>> values;
  for (auto it = parsed.model_blocks.rbegin(); it != parsed.model_blocks.rend(); ++it) {
    values = detail::parse_model_block(*it, p.var_count());
    if (values.has_value()) break;
    // A truncated final block is expected when the solver was interrupted.
    if (!killed) {
      out.status = SolveOutcome::Status::Error;
      out.message = "unparsable model line from solver";
      return out;
    }
  }
  auto finish_with_model = [&](SolveOutcome::Status ok_status) {
    if (!values.has_value()) {
      out.status = SolveOutcome::Status::Unknown;
      return;
    }
    MaxSatModel model;
    model.values = std::move(*values);
    model.weight = p.evaluate_weight(model.values);
    out.model = std::move(model);
    out.status = ok_status;
  };

  if (parsed.status_line.rfind("OPTIMUM", 0) == 0) {
    finish_with_model(killed ? SolveOutcome::Status::Satisfiable
                             : SolveOutcome::Status::Optimum);
  } else if (parsed.status_line.rfind("SATISFIABLE", 0) == 0) {
    finish_with_model(SolveOutcome::Status::Satisfiable);
  } else if (parsed.status_line.rfind("UNKNOWN", 0) == 0) {
    if (values.has_value())
      finish_with_model(SolveOutcome::Status::Satisfiable);
    else
      out.status = SolveOutcome::Status::Unknown;
  } else if (killed) {
    finish_with_model(SolveOutcome::Status::Satisfiable);
  } else if (!WIFEXITED(wait_status) || WEXITSTATUS(wait_status) != 0) {
    out.status = SolveOutcome::Status::Error;
    out.message = "solver spawn failed: " +
                  (output.size() > 400 ? output.substr(output.size() - 400) : output);
  } else {
    out.status = SolveOutcome::Status::Unknown;
  }
  return out;
}

inline SolveOutcome solve(const MaxSatProblem& p, const Subinstance& sub,
                          const SolverConfig& cfg) {
  switch (cfg.mode) {
    case SolverConfig::Mode::External: return solve_external(p, cfg);
    case SolverConfig::Mode::Oracle: return solve_oracle(p, sub);
    case SolverConfig::Mode::Internal: return solve_internal(p, cfg.timeout_seconds);
  }
  fail("bad solver mode");
}

}  // namespace twbn
