#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "dimer/height.hpp"
#include "dimer/lattice.hpp"

namespace dimer {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream: the k-th draw is a pure function of (key, k).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(splitmix64(seed ^ splitmix64(stream))) {}

  std::uint64_t next() { return splitmix64(key_ ^ splitmix64(counter_++)); }
  // Exactly uniform on [0, n).
  std::uint32_t below(std::uint32_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do r = next();
    while (r >= limit);
    return static_cast<std::uint32_t>(r % n);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Directed essential spanning forest: next[v] is the neighbour v points to,
// -1 on the boundary set.
struct SpanningForest {
  std::shared_ptr<const SiteGraph> graph;
  std::vector<int> next;

  bool operator==(const SpanningForest& o) const { return next == o.next; }
};

SpanningForest wilson_forest(std::shared_ptr<const SiteGraph> g, CounterRng& rng);
SpanningForest wilson_forest(std::shared_ptr<const SiteGraph> g, std::uint64_t seed);
// Throws ForestHostMismatch unless every non-boundary vertex points along an
// edge and reaches the boundary.
void validate_forest(const SpanningForest& f);

// Precomputed graphs for one Temperleyan host.
class TemperleyMap {
 public:
  explicit TemperleyMap(const TemperleyanPolyomino& tp);

  const TemperleyanPolyomino& host() const { return tp_; }
  const std::shared_ptr<const SquareSet>& squares() const { return squares_; }
  const std::shared_ptr<const SiteGraph>& b0_graph() const { return b0_; }
  const SiteGraph& b1_graph() const { return b1_; }

  Tiling forest_to_tiling(const SpanningForest& f) const;
  SpanningForest tiling_to_forest(const Tiling& t) const;
  // Uniform tiling and its forest, from the per-sample stream (seed, index).
  // Forests whose leftover dual is not a tree (possible around holes) are
  // rejected and redrawn from the same stream.
  Tiling sample(std::uint64_t seed, std::uint64_t index = 0, SpanningForest* forest = nullptr) const;

  static constexpr std::size_t kMaxAttempts = 100000;

 private:
  std::optional<Tiling> try_tiling(const SpanningForest& f) const;

  TemperleyanPolyomino tp_;
  std::shared_ptr<const SquareSet> squares_;
  std::shared_ptr<const SiteGraph> b0_;
  SiteGraph b1_;
};

Tiling forest_to_tiling(const SpanningForest& f, const TemperleyanPolyomino& tp);
SpanningForest tiling_to_forest(const Tiling& t, const TemperleyanPolyomino& tp);
Tiling sample_tiling(const TemperleyanPolyomino& tp, std::uint64_t seed);

// Cumulative net turning (left turns minus right turns) along the directed
// path from `start`, one entry per non-boundary vertex on the path. Entry k
// equals the change of the corner-averaged height from path[0] to path[k].
std::vector<int> path_turning(const SpanningForest& f, const Site& start);
// Vertices of that path, ending at the boundary vertex it reaches.
std::vector<Site> forest_path(const SpanningForest& f, const Site& start);

// Runs `body(index, tiling, forest)` for samples 0..n-1 on `threads` workers.
// Samples are assigned round-robin so worker w handles indices w, w+T, ...
void for_each_sample(const TemperleyMap& map, std::size_t n, std::uint64_t seed, int threads,
                     const std::function<void(int worker, std::size_t index, const Tiling&,
                                              const SpanningForest&)>& body);

}  // namespace dimer
