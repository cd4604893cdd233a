#include "dimer/sampler.hpp"

#include <exception>
#include <optional>
#include <thread>

namespace dimer {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw DimerError(kind, msg); }

void check_reachable(const SiteGraph& g) {
  std::vector<char> seen(g.size(), 0);
  std::vector<int> queue;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (g.boundary[v]) {
      seen[v] = 1;
      queue.push_back(static_cast<int>(v));
    }
  for (std::size_t q = 0; q < queue.size(); ++q) {
    auto [lo, hi] = g.neighbors(queue[q]);
    for (const int* p = lo; p != hi; ++p)
      if (!seen[*p]) {
        seen[*p] = 1;
        queue.push_back(*p);
      }
  }
  if (queue.size() != g.size()) fail(ErrorKind::UnreachableBoundary, "some vertex cannot reach the boundary set");
}

Site midpoint(const Site& a, const Site& b) { return {(a.x + b.x) / 2, (a.y + b.y) / 2}; }

}  // namespace

SpanningForest wilson_forest(std::shared_ptr<const SiteGraph> g, CounterRng& rng) {
  check_reachable(*g);
  const std::size_t n = g->size();
  SpanningForest f;
  f.next.assign(n, -1);
  std::vector<char> in_tree(g->boundary.begin(), g->boundary.end());
  for (std::size_t start = 0; start < n; ++start) {
    if (in_tree[start]) continue;
    // Random walk until the current tree is hit; later exits overwrite earlier
    // ones, which erases loops implicitly.
    int u = static_cast<int>(start);
    while (!in_tree[u]) {
      const int deg = g->degree(u);
      const int k = static_cast<int>(rng.below(static_cast<std::uint32_t>(deg)));
      f.next[u] = g->adj[g->adj_offset[u] + k];
      u = f.next[u];
    }
    u = static_cast<int>(start);
    while (!in_tree[u]) {
      in_tree[u] = 1;
      u = f.next[u];
    }
  }
  f.graph = std::move(g);
  return f;
}

SpanningForest wilson_forest(std::shared_ptr<const SiteGraph> g, std::uint64_t seed) {
  CounterRng rng(seed);
  return wilson_forest(std::move(g), rng);
}

void validate_forest(const SpanningForest& f) {
  const SiteGraph& g = *f.graph;
  if (f.next.size() != g.size()) fail(ErrorKind::ForestHostMismatch, "forest size does not match graph");
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.boundary[v]) {
      if (f.next[v] != -1) fail(ErrorKind::ForestHostMismatch, "boundary vertex has an outgoing edge");
      continue;
    }
    bool adjacent = false;
    auto [lo, hi] = g.neighbors(static_cast<int>(v));
    for (const int* p = lo; p != hi; ++p) adjacent |= *p == f.next[v];
    if (!adjacent) fail(ErrorKind::ForestHostMismatch, "outgoing edge is not a graph edge");
  }
  std::vector<char> state(g.size(), 0);  // 0 new, 1 on current path, 2 rooted
  for (std::size_t v = 0; v < g.size(); ++v) {
    std::vector<int> path;
    int u = static_cast<int>(v);
    while (!g.boundary[u] && state[u] == 0) {
      state[u] = 1;
      path.push_back(u);
      u = f.next[u];
    }
    if (!g.boundary[u] && state[u] == 1) fail(ErrorKind::ForestHostMismatch, "forest has a directed cycle");
    for (int p : path) state[p] = 2;
  }
}

TemperleyMap::TemperleyMap(const TemperleyanPolyomino& tp)
    : tp_(tp),
      squares_(std::make_shared<const SquareSet>(tp.host().squares())),
      b0_(std::make_shared<const SiteGraph>(b0_prime_graph(tp))),
      b1_(b1_dual_graph(tp)) {}

std::optional<Tiling> TemperleyMap::try_tiling(const SpanningForest& f) const {
  const SquareSet& s = *squares_;
  const SiteGraph& g = *b0_;
  if (f.next.size() != g.size()) return std::nullopt;
  Tiling t;
  t.host = squares_;
  t.partner.assign(s.size(), -1);
  std::size_t matched = 0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.boundary[v]) continue;
    if (f.next[v] < 0) return std::nullopt;
    const Site a = g.vertices[v];
    const Site w = midpoint(a, g.vertices[f.next[v]]);
    const int ia = s.index_of(a), iw = s.index_of(w);
    if (ia < 0 || iw < 0 || t.partner[iw] >= 0) return std::nullopt;
    t.partner[ia] = iw;
    t.partner[iw] = ia;
    matched += 2;
  }

  // Dual tree on B1 + d0 through the whites the primal left free.
  const SiteGraph& d = b1_;
  const int root = d.index_of(tp_.d0());
  std::vector<char> seen(d.size(), 0);
  seen[root] = 1;
  std::vector<int> queue{root};
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const int a = queue[q];
    auto [lo, hi] = d.neighbors(a);
    for (const int* p = lo; p != hi; ++p) {
      if (seen[*p]) continue;
      const int iw = s.index_of(midpoint(d.vertices[a], d.vertices[*p]));
      if (t.partner[iw] >= 0) continue;
      seen[*p] = 1;
      queue.push_back(*p);
      const int ib = s.index_of(d.vertices[*p]);
      t.partner[ib] = iw;
      t.partner[iw] = ib;
      matched += 2;
    }
  }
  // A dual cycle around a hole leaves part of the dual unreached.
  if (queue.size() != d.size() || matched != s.size()) return std::nullopt;
  return t;
}

Tiling TemperleyMap::forest_to_tiling(const SpanningForest& f) const {
  auto t = try_tiling(f);
  if (!t) fail(ErrorKind::ForestHostMismatch, "forest does not leave a dual spanning tree rooted at d0");
  return std::move(*t);
}

SpanningForest TemperleyMap::tiling_to_forest(const Tiling& t) const {
  const SquareSet& s = *squares_;
  const SiteGraph& g = *b0_;
  if (t.partner.size() != s.size()) fail(ErrorKind::ForestHostMismatch, "tiling is not on this host");
  SpanningForest f;
  f.graph = b0_;
  f.next.assign(g.size(), -1);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.boundary[v]) continue;
    const Site a = g.vertices[v];
    const int p = t.partner[s.index_of(a)];
    if (p < 0) fail(ErrorKind::ForestHostMismatch, "unmatched B0 square");
    const Site w = s[p];
    const int u = g.index_of({2 * w.x - a.x, 2 * w.y - a.y});
    if (u < 0) fail(ErrorKind::ForestHostMismatch, "domino does not lie over a graph edge");
    f.next[v] = u;
  }
  validate_forest(f);
  return f;
}

Tiling TemperleyMap::sample(std::uint64_t seed, std::uint64_t index, SpanningForest* forest) const {
  CounterRng rng(seed, index);
  // Uniform forests conditioned on mapping to a tiling are uniform tilings.
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    SpanningForest f;
    try {
      f = wilson_forest(b0_, rng);
    } catch (const DimerError& e) {
      fail(ErrorKind::Untilable, e.what());
    }
    if (auto t = try_tiling(f)) {
      if (forest) *forest = std::move(f);
      return std::move(*t);
    }
  }
  fail(ErrorKind::Untilable, "no forest in the image of the tiling map after many attempts");
}

Tiling forest_to_tiling(const SpanningForest& f, const TemperleyanPolyomino& tp) {
  return TemperleyMap(tp).forest_to_tiling(f);
}

SpanningForest tiling_to_forest(const Tiling& t, const TemperleyanPolyomino& tp) {
  return TemperleyMap(tp).tiling_to_forest(t);
}

Tiling sample_tiling(const TemperleyanPolyomino& tp, std::uint64_t seed) {
  return TemperleyMap(tp).sample(seed);
}

std::vector<Site> forest_path(const SpanningForest& f, const Site& start) {
  const SiteGraph& g = *f.graph;
  int v = g.index_of(start);
  if (v < 0) fail(ErrorKind::ForestHostMismatch, "start is not a forest vertex");
  std::vector<Site> path{g.vertices[v]};
  std::size_t guard = 0;
  while (!g.boundary[v]) {
    v = f.next[v];
    path.push_back(g.vertices[v]);
    if (++guard > g.size()) fail(ErrorKind::ForestHostMismatch, "forest has a directed cycle");
  }
  return path;
}

std::vector<int> path_turning(const SpanningForest& f, const Site& start) {
  const auto path = forest_path(f, start);
  std::vector<int> out{0};
  // Entry k includes the turn made at path[k]; path.back() is the boundary vertex.
  for (std::size_t k = 1; k + 1 < path.size(); ++k) {
    const int ax = path[k].x - path[k - 1].x, ay = path[k].y - path[k - 1].y;
    const int bx = path[k + 1].x - path[k].x, by = path[k + 1].y - path[k].y;
    const int cross = ax * by - ay * bx;
    out.push_back(out.back() + (cross > 0 ? 1 : cross < 0 ? -1 : 0));
  }
  return out;
}

void for_each_sample(const TemperleyMap& map, std::size_t n, std::uint64_t seed, int threads,
                     const std::function<void(int, std::size_t, const Tiling&,
                                              const SpanningForest&)>& body) {
  threads = std::max(1, threads);
  auto work = [&](int worker) {
    for (std::size_t i = static_cast<std::size_t>(worker); i < n; i += static_cast<std::size_t>(threads)) {
      SpanningForest f;
      const Tiling t = map.sample(seed, i, &f);
      body(worker, i, t, f);
    }
  };
  if (threads == 1) {
    work(0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        work(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace dimer
