#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "twbn/util.hpp"

namespace twbn {

// Complete categorical samples: rows[i][v] in 0..arities[v]-1.
struct Dataset {
  std::vector<std::string> variable_names;
  std::vector<int> arities;
  std::vector<std::vector<int>> rows;

  int variable_count() const { return static_cast<int>(arities.size()); }
  int row_count() const { return static_cast<int>(rows.size()); }

  void validate() const {
    require(variable_names.size() == arities.size(),
            "name/arity count mismatch");
    for (int r : arities) require(r >= 1, "arity must be positive");
    require(!rows.empty(), "dataset needs at least one row");
    for (const auto& row : rows) {
      require(row.size() == arities.size(), "row width mismatch");
      for (std::size_t v = 0; v < row.size(); ++v)
        require(row[v] >= 0 && row[v] < arities[v],
                "value out of range for variable " + variable_names[v]);
    }
  }
};

// Line 1: variable names, line 2: arities, then one row per sample.
inline Dataset read_dataset(std::istream& is) {
  Dataset d;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "empty data file");
  d.variable_names = split_ws(line);
  require(static_cast<bool>(std::getline(is, line)), "data file missing arity line");
  for (const auto& tok : split_ws(line)) d.arities.push_back(std::stoi(tok));
  while (std::getline(is, line)) {
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    std::vector<int> row;
    row.reserve(toks.size());
    for (const auto& tok : toks) row.push_back(std::stoi(tok));
    d.rows.push_back(std::move(row));
  }
  d.validate();
  return d;
}

inline void write_dataset(std::ostream& os, const Dataset& d) {
  for (std::size_t v = 0; v < d.variable_names.size(); ++v)
    os << (v ? " " : "") << d.variable_names[v];
  os << '\n';
  for (std::size_t v = 0; v < d.arities.size(); ++v)
    os << (v ? " " : "") << d.arities[v];
  os << '\n';
  for (const auto& row : d.rows) {
    for (std::size_t v = 0; v < row.size(); ++v) os << (v ? " " : "") << row[v];
    os << '\n';
  }
}

}  // namespace twbn
