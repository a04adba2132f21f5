#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "twbn/dataset.hpp"
#include "twbn/scoring.hpp"
#include "twbn/slim.hpp"
#include "twbn/util.hpp"

namespace twbn {

// Random ground-truth network and forward-sampled data. Deterministic and
// byte-identical for a fixed seed.
inline std::pair<Dataset, Dag> generate_synthetic(int n, int max_parents, int arity,
                                                  int rows, std::uint64_t seed) {
  require(n >= 1 && arity >= 2 && rows >= 1 && max_parents >= 0,
          "bad generator parameters");
  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng_shuffle(rng, order);

  Dag dag(n);
  for (int i = 1; i < n; ++i) {
    const int v = order[static_cast<std::size_t>(i)];
    const int k = rng_int(rng, 0, std::min(max_parents, i));
    std::vector<int> pool(order.begin(), order.begin() + i);
    rng_shuffle(rng, pool);
    dag.set_parents(v, {pool.begin(), pool.begin() + k});
  }

  // Dirichlet(1,...,1) rows of each conditional table, via normalized
  // exponentials.
  std::vector<std::vector<std::vector<double>>> cpt(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    long long configs = 1;
    for (std::size_t i = 0; i < dag.parents(v).size(); ++i) configs *= arity;
    auto& table = cpt[static_cast<std::size_t>(v)];
    table.resize(static_cast<std::size_t>(configs));
    for (auto& row : table) {
      row.resize(static_cast<std::size_t>(arity));
      double total = 0.0;
      for (auto& p : row) {
        p = -std::log(1.0 - rng_unit(rng));
        total += p;
      }
      for (auto& p : row) p /= total;
    }
  }

  Dataset data;
  for (int v = 0; v < n; ++v) {
    data.variable_names.push_back("v" + std::to_string(v));
    data.arities.push_back(arity);
  }
  for (int r = 0; r < rows; ++r) {
    std::vector<int> row(static_cast<std::size_t>(n), -1);
    for (int v : order) {
      long long cfg = 0;
      for (int p : dag.parents(v)) cfg = cfg * arity + row[static_cast<std::size_t>(p)];
      const auto& probs = cpt[static_cast<std::size_t>(v)][static_cast<std::size_t>(cfg)];
      double u = rng_unit(rng);
      int value = arity - 1;
      for (int k = 0; k < arity; ++k) {
        u -= probs[static_cast<std::size_t>(k)];
        if (u < 0) {
          value = k;
          break;
        }
      }
      row[static_cast<std::size_t>(v)] = value;
    }
    data.rows.push_back(std::move(row));
  }
  return {data, dag};
}

struct BenchEntry {
  enum class Kind { Synthetic, DataFile, JklFile };
  Kind kind = Kind::Synthetic;
  std::string name;
  std::string file;     // DataFile/JklFile
  int n = 50;           // Synthetic
  int arity = 2;        // Synthetic
  int rows = 5000;      // Synthetic
  int gen_parents = 3;  // Synthetic ground-truth in-degree bound
  std::uint64_t gen_seed = 1;
  int cache_parents = -1;  // -1: min(treewidth, 3)
};

struct BenchSpec {
  std::vector<int> treewidths{2, 5, 8};
  int seeds = 3;
  double time_limit = 60.0;
  double solver_timeout = 2.0;
  int budget = 10;
  SolverConfig solver;
  std::vector<BenchEntry> entries;
};

struct BenchRow {
  std::string dataset;
  int treewidth = 0;
  std::uint64_t seed = 0;
  double initial_score = 0.0;
  double final_score = 0.0;
  double delta = 0.0;
  std::string category;
  int improving_iterations = 0;
  std::string status = "ok";
};

// Key/value lines plus [[synthetic]] / [[data]] / [[jkl]] tables.
inline BenchSpec parse_bench_spec(std::istream& is) {
  BenchSpec spec;
  BenchEntry* current = nullptr;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "[[synthetic]]" || toks[0] == "[[data]]" || toks[0] == "[[jkl]]") {
      BenchEntry e;
      e.kind = toks[0] == "[[synthetic]]" ? BenchEntry::Kind::Synthetic
               : toks[0] == "[[data]]"    ? BenchEntry::Kind::DataFile
                                          : BenchEntry::Kind::JklFile;
      spec.entries.push_back(e);
      current = &spec.entries.back();
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            "bench spec line " + std::to_string(line_no) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (current == nullptr) {
      if (key == "treewidths") {
        spec.treewidths.clear();
        std::string v = value;
        for (auto& ch : v)
          if (ch == ',') ch = ' ';
        for (const auto& t : split_ws(v)) spec.treewidths.push_back(std::stoi(t));
      } else if (key == "seeds") {
        spec.seeds = std::stoi(value);
      } else if (key == "time_limit") {
        spec.time_limit = std::stod(value);
      } else if (key == "solver_timeout") {
        spec.solver_timeout = std::stod(value);
      } else if (key == "budget") {
        spec.budget = std::stoi(value);
      } else if (key == "solver") {
        if (value == "internal") {
          spec.solver.mode = SolverConfig::Mode::Internal;
        } else if (value == "oracle") {
          spec.solver.mode = SolverConfig::Mode::Oracle;
        } else {
          spec.solver.mode = SolverConfig::Mode::External;
          spec.solver.command = value;
        }
      } else {
        fail("bench spec line " + std::to_string(line_no) + ": unknown key " + key);
      }
      continue;
    }
    if (key == "name") current->name = value;
    else if (key == "file") current->file = value;
    else if (key == "n") current->n = std::stoi(value);
    else if (key == "arity") current->arity = std::stoi(value);
    else if (key == "rows") current->rows = std::stoi(value);
    else if (key == "max_parents") current->gen_parents = std::stoi(value);
    else if (key == "seed") current->gen_seed = std::stoull(value);
    else if (key == "cache_parents") current->cache_parents = std::stoi(value);
    else
      fail("bench spec line " + std::to_string(line_no) + ": unknown key " + key);
  }
  require(spec.seeds >= 1, "bench spec needs seeds >= 1");
  for (int w : spec.treewidths) require(w >= 1, "treewidth bounds must be >= 1");
  return spec;
}

// One row per (entry, treewidth, seed) cell, in spec order. Per-cell
// failures become rows with a status note; the sweep never aborts.
inline std::vector<BenchRow> run_bench(const BenchSpec& spec,
                                       std::ostream* progress = nullptr) {
  std::vector<BenchRow> rows;
  for (const auto& entry : spec.entries) {
    for (int w : spec.treewidths) {
      for (int s = 1; s <= spec.seeds; ++s) {
        BenchRow row;
        row.dataset = entry.name.empty() ? "unnamed" : entry.name;
        row.treewidth = w;
        row.seed = static_cast<std::uint64_t>(s);
        try {
          ScoreCache cache;
          const int cache_parents =
              entry.cache_parents > 0 ? entry.cache_parents : std::min(w, 3);
          if (entry.kind == BenchEntry::Kind::Synthetic) {
            auto [data, truth] = generate_synthetic(entry.n, entry.gen_parents,
                                                    entry.arity, entry.rows,
                                                    entry.gen_seed);
            cache = build_cache(data, cache_parents);
          } else if (entry.kind == BenchEntry::Kind::DataFile) {
            std::ifstream f(entry.file);
            require(f.good(), "cannot open data file " + entry.file);
            cache = build_cache(read_dataset(f), cache_parents);
          } else {
            std::ifstream f(entry.file);
            require(f.good(), "cannot open score file " + entry.file);
            cache = read_jkl(f);
          }
          auto initial = greedy_initial(cache, w, static_cast<std::uint64_t>(s));
          RunOptions opt;
          opt.width_bound = w;
          opt.budget = spec.budget;
          opt.solver_timeout = spec.solver_timeout;
          opt.time_limit = spec.time_limit;
          opt.seed = static_cast<std::uint64_t>(s);
          opt.solver = spec.solver;
          auto state = run(cache, initial, opt);
          auto rep = delta_bic(initial.score, state.score);
          row.initial_score = rep.score_before;
          row.final_score = rep.score_after;
          row.delta = rep.delta;
          row.category = to_string(rep.category);
          row.improving_iterations = state.accepted;
          if (state.invariant_failures > 0)
            row.status = "invariant failures: " +
                         std::to_string(state.invariant_failures);
        } catch (const std::exception& e) {
          std::string msg = e.what();
          for (auto& ch : msg)
            if (ch == ',' || ch == '\n') ch = ';';
          row.status = "error: " + msg;
          row.category = to_string(DeltaBicCategory::Neutral);
        }
        rows.push_back(row);
        if (progress)
          *progress << row.dataset << " W=" << row.treewidth << " seed=" << row.seed
                    << " -> " << row.status << '\n';
      }
    }
  }
  return rows;
}

inline void write_results_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "dataset,treewidth,seed,initial_score,final_score,delta_bic,category,"
        "improving_iterations,status\n";
  os << std::fixed << std::setprecision(6);
  for (const auto& r : rows)
    os << r.dataset << ',' << r.treewidth << ',' << r.seed << ','
       << r.initial_score << ',' << r.final_score << ',' << r.delta << ','
       << r.category << ',' << r.improving_iterations << ',' << r.status << '\n';
}

inline std::vector<BenchRow> read_results_csv(std::istream& is) {
  std::vector<BenchRow> rows;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "empty results file");
  while (std::getline(is, line)) {
    if (split_ws(line).empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    require(fields.size() == 9, "bad results row: " + line);
    BenchRow r;
    r.dataset = fields[0];
    r.treewidth = std::stoi(fields[1]);
    r.seed = std::stoull(fields[2]);
    r.initial_score = std::stod(fields[3]);
    r.final_score = std::stod(fields[4]);
    r.delta = std::stod(fields[5]);
    r.category = fields[6];
    r.improving_iterations = std::stoi(fields[7]);
    r.status = fields[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace twbn
