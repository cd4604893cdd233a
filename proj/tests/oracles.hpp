#pragma once
// Brute-force references shared by the unit and acceptance tests.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "dimer/height.hpp"
#include "dimer/lattice.hpp"

namespace oracle {

// All perfect matchings of a square set, as partner vectors. The lowest
// unmatched square in row-major order can only pair to the right or upward.
inline std::vector<std::vector<int>> enumerate_matchings(const dimer::SquareSet& s,
                                                         std::size_t limit = 1u << 22) {
  std::vector<std::vector<int>> out;
  std::vector<int> partner(s.size(), -1);
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    if (out.size() >= limit) return;
    while (from < s.size() && partner[from] >= 0) ++from;
    if (from == s.size()) {
      out.push_back(partner);
      return;
    }
    const dimer::Site a = s[from];
    const dimer::Site cand[2] = {{a.x + 1, a.y}, {a.x, a.y + 1}};
    for (const auto& b : cand) {
      const int j = s.index_of(b);
      if (j < 0 || partner[j] >= 0) continue;
      partner[from] = j;
      partner[j] = static_cast<int>(from);
      rec(from + 1);
      partner[from] = -1;
      partner[j] = -1;
    }
  };
  rec(0);
  return out;
}

inline std::uint64_t count_matchings(const dimer::SquareSet& s) {
  std::uint64_t n = 0;
  std::vector<int> partner(s.size(), -1);
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    while (from < s.size() && partner[from] >= 0) ++from;
    if (from == s.size()) {
      ++n;
      return;
    }
    const dimer::Site a = s[from];
    const dimer::Site cand[2] = {{a.x + 1, a.y}, {a.x, a.y + 1}};
    for (const auto& b : cand) {
      const int j = s.index_of(b);
      if (j < 0 || partner[j] >= 0) continue;
      partner[from] = j;
      partner[j] = static_cast<int>(from);
      rec(from + 1);
      partner[from] = -1;
      partner[j] = -1;
    }
  };
  rec(0);
  return n;
}

inline dimer::Tiling as_tiling(std::shared_ptr<const dimer::SquareSet> host,
                               std::vector<int> partner) {
  dimer::Tiling t;
  t.host = std::move(host);
  t.partner = std::move(partner);
  return t;
}

// Matrix-free reference: Gaussian elimination on a small dense complex matrix.
}  // namespace oracle
