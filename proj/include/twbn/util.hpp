#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace twbn {

using Rng = std::mt19937_64;

// Uniform integer in [lo, hi]. Hand-rolled so results depend only on the
// mt19937_64 stream, not on the standard library's distribution internals.
inline int rng_int(Rng& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

// Uniform double in [0, 1).
inline double rng_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void rng_shuffle(Rng& rng, std::vector<T>& v) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    std::swap(v[static_cast<std::size_t>(i)],
              v[static_cast<std::size_t>(rng_int(rng, 0, i))]);
  }
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace twbn
