// twbn-slim: anytime learner for bounded-treewidth Bayesian network
// structures. Builds a heuristic solution, then repeatedly solves budgeted
// local windows exactly through a weighted-partial MaxSAT encoding and
// merges the improvements back.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "twbn/bench.hpp"
#include "twbn/initial_solution.hpp"
#include "twbn/slim.hpp"
#include "twbn/solver.hpp"

namespace {

struct LearnArgs {
  std::string data_file;
  std::string jkl_file;
  int treewidth = 0;
  int max_parents = -1;  // default: min(treewidth, 3)
  std::string solver_command;
  bool oracle = false;
  std::string initial_dag;
  std::string initial_td;
  std::string out_dag;
  std::string out_td;
  std::string save_jkl;
  bool report = false;
  bool verify = false;
  bool print_defaults = false;
  std::string debug_dir;
  twbn::RunOptions run;  // budget, timeouts, seed, weight scale
};

int run_learn(const LearnArgs& args) {
  using namespace twbn;
  if (args.print_defaults) {
    RunOptions defaults;
    std::cout << "budget=" << defaults.budget
              << " solver_timeout=" << defaults.solver_timeout
              << " weight_scale=" << defaults.weight_scale << '\n';
    return 0;
  }

  std::optional<Dataset> data;
  ScoreCache cache;
  if (!args.data_file.empty()) {
    std::ifstream f(args.data_file);
    require(f.good(), "cannot open " + args.data_file);
    data = read_dataset(f);
    const int max_parents =
        args.max_parents > 0 ? args.max_parents : std::min(args.treewidth, 3);
    std::cerr << "scoring " << data->variable_count() << " variables over "
              << data->row_count() << " rows (parent sets up to " << max_parents
              << ")...\n";
    cache = build_cache(*data, max_parents);
  } else {
    std::ifstream f(args.jkl_file);
    require(f.good(), "cannot open " + args.jkl_file);
    cache = read_jkl(f);
  }
  if (!args.save_jkl.empty()) {
    std::ofstream f(args.save_jkl);
    write_jkl(f, cache);
  }

  InitialSolution initial;
  if (!args.initial_dag.empty()) {
    std::ifstream f(args.initial_dag);
    require(f.good(), "cannot open " + args.initial_dag);
    Dag dag = read_dag_file(f);
    std::optional<TreeDecomposition> td;
    if (!args.initial_td.empty()) {
      std::ifstream g(args.initial_td);
      require(g.good(), "cannot open " + args.initial_td);
      td = read_td(g).td;
    }
    initial = import_initial(dag, td, cache, args.treewidth,
                             data ? &*data : nullptr);
  } else {
    initial = greedy_initial(cache, args.treewidth, args.run.seed);
  }
  std::cerr << "initial score " << initial.score << " (width "
            << initial.td.width() << ")\n";

  RunOptions opt = args.run;
  opt.width_bound = args.treewidth;
  opt.verify_each_merge = args.verify;
  opt.debug_dir = args.debug_dir;
  if (args.oracle)
    opt.solver.mode = SolverConfig::Mode::Oracle;
  else if (!args.solver_command.empty()) {
    opt.solver.mode = SolverConfig::Mode::External;
    opt.solver.command = args.solver_command;
  } else {
    opt.solver.mode = SolverConfig::Mode::Internal;
  }
  if (args.report) opt.log = &std::cout;

  auto state = run(cache, initial, opt);

  std::cerr << "final score " << state.score << " after " << state.iterations
            << " iterations (" << state.accepted << " merges, "
            << state.elapsed_seconds << " s)\n";
  for (const auto& note : state.failure_notes) std::cerr << "warning: " << note << '\n';
  if (args.report) {
    auto rep = delta_bic(initial.score, state.score);
    std::cout << "initial score: " << rep.score_before << '\n'
              << "final score:   " << rep.score_after << '\n'
              << "delta BIC:     " << rep.delta << " (" << to_string(rep.category)
              << ")\n";
  }
  if (!args.out_dag.empty()) {
    std::ofstream f(args.out_dag);
    write_dag_file(f, state.dag, cache);
  }
  if (!args.out_td.empty()) {
    std::ofstream f(args.out_td);
    write_td(f, state.td, state.dag.vertex_count());
  }
  const auto final_rep =
      global_verify(state.dag, state.td, cache, args.treewidth, state.score);
  if (!final_rep.ok) {
    std::cerr << "FINAL VERIFICATION FAILED: " << final_rep.violations.front()
              << '\n';
    return 2;
  }
  return state.invariant_failures == 0 ? 0 : 2;
}

int run_bench_cmd(const std::string& spec_file, const std::string& out_file,
                  bool print_defaults) {
  using namespace twbn;
  if (print_defaults) {
    BenchSpec defaults;
    std::cout << "treewidths=";
    for (std::size_t i = 0; i < defaults.treewidths.size(); ++i)
      std::cout << (i ? "," : "") << defaults.treewidths[i];
    std::cout << " seeds=" << defaults.seeds << '\n';
    return 0;
  }
  std::ifstream f(spec_file);
  require(f.good(), "cannot open " + spec_file);
  auto spec = parse_bench_spec(f);
  auto rows = run_bench(spec, &std::cerr);
  std::ofstream out(out_file);
  require(out.good(), "cannot open " + out_file);
  write_results_csv(out, rows);
  std::cerr << "wrote " << rows.size() << " rows to " << out_file << '\n';
  return 0;
}

// Exact solver for small WCNF instances, speaking MaxSAT-evaluation output.
// Useful as a --solver target when no dedicated MaxSAT solver is installed.
int run_maxsat(const std::string& wcnf_file, double timeout) {
  using namespace twbn;
  std::ifstream f(wcnf_file);
  require(f.good(), "cannot open " + wcnf_file);
  auto p = read_wcnf(f);
  auto out = solve_internal(p, timeout);
  if (!out.model.has_value()) {
    std::cout << "s UNKNOWN\n";
    return 0;
  }
  std::cout << "o " << p.soft_total() - out.model->weight << '\n';
  std::cout << (out.status == SolveOutcome::Status::Optimum ? "s OPTIMUM FOUND\n"
                                                            : "s SATISFIABLE\n");
  std::cout << "v";
  for (int var = 1; var <= p.var_count(); ++var)
    std::cout << ' ' << (out.model->value(var) ? var : -var);
  std::cout << " 0\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anytime bounded-treewidth Bayesian network structure learner"};
  app.require_subcommand(1);

  LearnArgs learn;
  auto* lc = app.add_subcommand("learn", "improve a structure under a treewidth bound");
  auto* data_opt = lc->add_option("--data", learn.data_file,
                                  "sample file: names, arities, then one row per sample");
  auto* jkl_opt = lc->add_option("--jkl", learn.jkl_file, "precomputed score cache (.jkl)");
  lc->add_option("--treewidth", learn.treewidth, "treewidth bound W")
      ->required()
      ->check(CLI::PositiveNumber);
  lc->add_option("--budget", learn.run.budget, "max window size")->capture_default_str();
  lc->add_option("--solver", learn.solver_command,
                 "external MaxSAT command; {wcnf} is replaced by the instance path");
  lc->add_flag("--oracle", learn.oracle, "use the exhaustive test backend");
  lc->add_option("--solver-timeout", learn.run.solver_timeout,
                 "per-call solver timeout in seconds")->capture_default_str();
  lc->add_option("--time-limit", learn.run.time_limit, "total run time in seconds")->capture_default_str();
  lc->add_option("--seed", learn.run.seed, "random seed")->capture_default_str();
  lc->add_option("--weight-scale", learn.run.weight_scale,
                 "integer weight per score unit")->capture_default_str();
  lc->add_option("--max-parents", learn.max_parents,
                 "cache parent-set size limit (default: min(W, 3))");
  lc->add_option("--initial-dag", learn.initial_dag, "import an initial DAG file");
  lc->add_option("--initial-td", learn.initial_td, "decomposition for --initial-dag");
  lc->add_option("--out-dag", learn.out_dag, "write the final DAG here");
  lc->add_option("--out-td", learn.out_td, "write the final decomposition (PACE .td)");
  lc->add_option("--save-jkl", learn.save_jkl, "write the score cache (.jkl)");
  lc->add_flag("--report", learn.report, "print the delta-BIC report and IMPROVE lines");
  lc->add_flag("--verify", learn.verify, "re-verify the global solution after every merge");
  lc->add_option("--debug-dir", learn.debug_dir,
                 "dump per-iteration WCNF, varmap, and window files");
  lc->add_flag("--print-defaults", learn.print_defaults, "print defaults and exit");
  data_opt->excludes(jkl_opt);

  std::string spec_file, out_file = "results.csv";
  bool bench_defaults = false;
  auto* bc = app.add_subcommand("bench", "sweep datasets, bounds, and seeds");
  bc->add_option("--spec", spec_file, "bench spec file");
  bc->add_option("--out", out_file, "output CSV")->capture_default_str();
  bc->add_flag("--print-defaults", bench_defaults, "print defaults and exit");

  std::string wcnf_file;
  double maxsat_timeout = 3600.0;
  auto* mc = app.add_subcommand("maxsat", "solve a small WCNF instance exactly");
  mc->add_option("wcnf", wcnf_file, "DIMACS weighted-partial file")->required();
  mc->add_option("--timeout", maxsat_timeout, "search timeout in seconds")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (lc->parsed()) {
      if (!learn.print_defaults && learn.data_file.empty() && learn.jkl_file.empty())
        throw std::runtime_error("one of --data or --jkl is required");
      return run_learn(learn);
    }
    if (bc->parsed()) {
      if (!bench_defaults && spec_file.empty())
        throw std::runtime_error("--spec is required");
      return run_bench_cmd(spec_file, out_file, bench_defaults);
    }
    return run_maxsat(wcnf_file, maxsat_timeout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
