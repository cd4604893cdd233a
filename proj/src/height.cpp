#include "dimer/height.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace dimer {

namespace {

constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw DimerError(kind, msg); }

GridBox vertex_box(const SquareSet& s) {
  const auto& b = s.box();
  return GridBox{b.x0, b.y0, b.width + 1, b.height + 1};
}

bool host_vertex(const SquareSet& s, int i, int j) {
  return s.contains(i - 1, j - 1) || s.contains(i, j - 1) || s.contains(i - 1, j) ||
         s.contains(i, j);
}

// Heights along every loop, starting from 0 at the loop's first vertex. The
// extra trailing entry is the value after closing the loop.
std::vector<std::vector<int>> raw_loop_heights(const Polyomino& host) {
  std::vector<std::vector<int>> out;
  for (const auto& loop : host.loops()) {
    const auto& vs = loop.vertices;
    std::vector<int> h(vs.size() + 1, 0);
    for (std::size_t k = 0; k < vs.size(); ++k)
      h[k + 1] = h[k] + edge_height_step(vs[k], vs[(k + 1) % vs.size()], false);
    out.push_back(std::move(h));
  }
  return out;
}

int floor_mod4(int v) { return ((v % 4) + 4) % 4; }

}  // namespace

std::vector<std::pair<Site, Site>> Tiling::dominoes() const {
  std::vector<std::pair<Site, Site>> out;
  out.reserve(partner.size() / 2);
  for (std::size_t i = 0; i < partner.size(); ++i) {
    const Site& s = (*host)[i];
    if (is_white(s) && partner[i] >= 0) out.emplace_back(s, (*host)[partner[i]]);
  }
  return out;
}

bool Tiling::matched(const Site& a, const Site& b) const {
  const int i = host->index_of(a);
  const int j = host->index_of(b);
  return i >= 0 && j >= 0 && partner[i] == j;
}

Tiling make_tiling(std::shared_ptr<const SquareSet> host,
                   const std::vector<std::pair<Site, Site>>& dominoes) {
  Tiling t;
  t.partner.assign(host->size(), -1);
  for (const auto& [a, b] : dominoes) {
    const int i = host->index_of(a);
    const int j = host->index_of(b);
    if (i < 0 || j < 0) fail(ErrorKind::ForestHostMismatch, "domino outside the host");
    if (t.partner[i] >= 0 || t.partner[j] >= 0)
      fail(ErrorKind::ForestHostMismatch, "square covered twice");
    t.partner[i] = j;
    t.partner[j] = i;
  }
  t.host = std::move(host);
  validate_tiling(t);
  return t;
}

void validate_tiling(const Tiling& t) {
  if (!t.host || t.partner.size() != t.host->size())
    fail(ErrorKind::ForestHostMismatch, "tiling size does not match host");
  for (std::size_t i = 0; i < t.partner.size(); ++i) {
    const int j = t.partner[i];
    if (j < 0 || j >= static_cast<int>(t.partner.size()) || t.partner[j] != static_cast<int>(i))
      fail(ErrorKind::ForestHostMismatch, "partner map is not a perfect matching");
    const Site a = (*t.host)[i], b = (*t.host)[j];
    if (std::abs(a.x - b.x) + std::abs(a.y - b.y) != 1)
      fail(ErrorKind::ForestHostMismatch, "paired squares are not adjacent");
  }
}

std::pair<Site, Site> edge_sides(const Vertex& a, const Vertex& b) {
  const int dx = b.x - a.x, dy = b.y - a.y;
  if (dx == 1 && dy == 0) return {{a.x, a.y}, {a.x, a.y - 1}};
  if (dx == 0 && dy == 1) return {{a.x - 1, a.y}, {a.x, a.y}};
  if (dx == -1 && dy == 0) return {{a.x - 1, a.y - 1}, {a.x - 1, a.y}};
  if (dx == 0 && dy == -1) return {{a.x, a.y - 1}, {a.x - 1, a.y - 1}};
  fail(ErrorKind::PathLeavesHost, "path step is not a unit lattice step");
}

int edge_height_step(const Vertex& a, const Vertex& b, bool crossed) {
  const bool black_left = is_black(edge_sides(a, b).first);
  if (crossed) return black_left ? -3 : 3;
  return black_left ? 1 : -1;
}

HeightField height_field(const Tiling& t, const Vertex& base, int base_value) {
  const SquareSet& s = *t.host;
  HeightField h;
  h.box = vertex_box(s);
  h.values.assign(h.box.cells(), HeightField::kMissing);
  h.base = base;
  h.base_value = base_value;
  if (s.empty()) return h;
  if (!h.box.contains(base.x, base.y) || !host_vertex(s, base.x, base.y))
    fail(ErrorKind::DisconnectedHost, "base vertex is not a vertex of the host");

  auto step = [&](const Vertex& a, const Vertex& b, int& delta) {
    const auto [l, r] = edge_sides(a, b);
    const int il = s.index_of(l), ir = s.index_of(r);
    if (il < 0 && ir < 0) return false;
    const bool crossed = il >= 0 && ir >= 0 && t.partner[il] == ir;
    delta = edge_height_step(a, b, crossed);
    return true;
  };

  std::vector<Vertex> queue{base};
  h.values[h.box.linear(base.x, base.y)] = base_value;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const Vertex a = queue[q];
    const int ha = h.values[h.box.linear(a.x, a.y)];
    for (int d = 0; d < 4; ++d) {
      const Vertex b{a.x + kDx[d], a.y + kDy[d]};
      int delta = 0;
      if (!h.box.contains(b.x, b.y) || !step(a, b, delta)) continue;
      int& hb = h.values[h.box.linear(b.x, b.y)];
      if (hb == HeightField::kMissing) {
        hb = ha + delta;
        queue.push_back(b);
      } else if (hb != ha + delta) {
        fail(ErrorKind::Unsupported, "height is not single valued (unbalanced hole)");
      }
    }
  }
  std::size_t total = 0;
  for (int j = h.box.y0; j < h.box.y0 + h.box.height; ++j)
    for (int i = h.box.x0; i < h.box.x0 + h.box.width; ++i) total += host_vertex(s, i, j);
  if (total != queue.size()) fail(ErrorKind::DisconnectedHost, "host vertices are not connected");
  return h;
}

std::pair<Vertex, int> canonical_gauge(const TemperleyanPolyomino& tp) {
  const auto& loop = tp.host().loops().at(0).vertices;
  const Site d0 = tp.d0();
  auto is_d0_corner = [&](const Vertex& v) {
    return (v.x == d0.x || v.x == d0.x + 1) && (v.y == d0.y || v.y == d0.y + 1);
  };
  const std::size_t n = loop.size();
  std::size_t base_k = n, run_end = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (!is_d0_corner(loop[k])) continue;
    if (base_k == n || row_major_less(loop[k], loop[base_k])) base_k = k;
    if (!is_d0_corner(loop[(k + 1) % n])) run_end = k;
  }
  if (base_k == n || run_end == n)
    fail(ErrorKind::BadRemovalClass, "d0 does not touch the host's outer boundary");
  // Heights relative to 0 at the base, walking forward from the base.
  std::vector<int> rel(n, 0);
  for (std::size_t m = 0; m + 1 < n; ++m) {
    const std::size_t k = (base_k + m) % n;
    rel[(k + 1) % n] = rel[k] + edge_height_step(loop[k], loop[(k + 1) % n], false);
  }
  const int a = rel[(run_end + 1) % n];
  const int b = rel[(run_end + 2) % n];
  return {loop[base_k], -std::min(a, b)};
}

HeightField height_field(const Tiling& t, const TemperleyanPolyomino& tp) {
  const auto [base, value] = canonical_gauge(tp);
  return height_field(t, base, value);
}

std::vector<std::vector<int>> boundary_heights(const Polyomino& host, const Vertex& base,
                                               int base_value) {
  auto raw = raw_loop_heights(host);
  std::vector<std::vector<int>> out(raw.size());
  const auto& outer = host.loops().at(0).vertices;
  const auto it = std::find(outer.begin(), outer.end(), base);
  if (it == outer.end()) fail(ErrorKind::UnreachableBoundary, "base vertex is not on the outer loop");
  const int shift0 = base_value - raw[0][it - outer.begin()];
  out[0].assign(raw[0].begin(), raw[0].end() - 1);
  for (auto& v : out[0]) v += shift0;
  if (raw.size() == 1) return out;

  // Residues mod 4 are tiling independent: propagate them with the uncrossed rule.
  const SquareSet& s = host.squares();
  const GridBox box = vertex_box(s);
  std::vector<int> mod(box.cells(), -1);
  std::vector<Vertex> queue{base};
  mod[box.linear(base.x, base.y)] = floor_mod4(base_value);
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const Vertex a = queue[q];
    for (int d = 0; d < 4; ++d) {
      const Vertex b{a.x + kDx[d], a.y + kDy[d]};
      if (!box.contains(b.x, b.y)) continue;
      const auto [l, r] = edge_sides(a, b);
      if (!s.contains(l) && !s.contains(r)) continue;
      int& mb = mod[box.linear(b.x, b.y)];
      if (mb >= 0) continue;
      mb = floor_mod4(mod[box.linear(a.x, a.y)] + edge_height_step(a, b, false));
      queue.push_back(b);
    }
  }
  for (std::size_t c = 1; c < raw.size(); ++c) {
    const Vertex first = host.loops()[c].vertices[0];
    const int shift = mod[box.linear(first.x, first.y)];
    out[c].assign(raw[c].begin(), raw[c].end() - 1);
    for (auto& v : out[c]) v += shift;
  }
  return out;
}

std::vector<std::vector<int>> boundary_heights(const TemperleyanPolyomino& tp,
                                               const Vertex& base, int base_value) {
  return boundary_heights(tp.host(), base, base_value);
}

int height_change_along_path(const HeightField& h, const SquareSet& host,
                             const std::vector<Vertex>& path) {
  if (path.empty()) return 0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const auto [l, r] = edge_sides(path[k], path[k + 1]);
    if (!host.contains(l) && !host.contains(r))
      fail(ErrorKind::PathLeavesHost, "path step leaves the host");
  }
  if (!h.has(path.front()) || !h.has(path.back()))
    fail(ErrorKind::PathLeavesHost, "path endpoint has no height");
  return h.at(path.back()) - h.at(path.front());
}

HeightField face_height_field(const Tiling& t) {
  const SquareSet& s = *t.host;
  HeightField h;
  h.box = vertex_box(s);
  h.values.assign(h.box.cells(), HeightField::kMissing);
  auto interior = [&](int i, int j) {
    return s.contains(i - 1, j - 1) && s.contains(i, j - 1) && s.contains(i - 1, j) &&
           s.contains(i, j);
  };
  bool first = true;
  for (int j = h.box.y0; j < h.box.y0 + h.box.height; ++j)
    for (int i = h.box.x0; i < h.box.x0 + h.box.width; ++i) {
      if (!interior(i, j) || h.values[h.box.linear(i, j)] != HeightField::kMissing) continue;
      if (first) {
        h.base = {i, j};
        first = false;
      }
      h.values[h.box.linear(i, j)] = 0;
      std::vector<Vertex> queue{{i, j}};
      for (std::size_t q = 0; q < queue.size(); ++q) {
        const Vertex f = queue[q];
        const int hf = h.values[h.box.linear(f.x, f.y)];
        // Each neighbouring face lies across one dual edge between two squares.
        for (int d = 0; d < 4; ++d) {
          const Vertex g{f.x + kDx[d], f.y + kDy[d]};
          if (!interior(g.x, g.y)) continue;
          const auto [p, q2] = edge_sides(f, g);
          const Site blk = is_black(p) ? p : q2;
          const Site wht = is_black(p) ? q2 : p;
          // Walking black -> white, the face on the left sits at
          // (B + W + rot(W - B) + (1,1)) / 2 in vertex indices.
          const int dx = wht.x - blk.x, dy = wht.y - blk.y;
          const Vertex left{(blk.x + wht.x - dy + 1) / 2, (blk.y + wht.y + dx + 1) / 2};
          const int diff = t.matched(blk, wht) ? -3 : 1;  // left minus right
          const int hg = left == g ? hf + diff : hf - diff;
          int& slot = h.values[h.box.linear(g.x, g.y)];
          if (slot == HeightField::kMissing) {
            slot = hg;
            queue.push_back(g);
          }
        }
      }
    }
  return h;
}

bool fournier_check(const Polyomino& host) {
  const SquareSet& s = host.squares();
  if (s.empty()) return true;
  const auto raw = raw_loop_heights(host);
  for (const auto& r : raw)
    if (r.back() != 0) return false;  // a loop with unbalanced interior
  const auto bh = boundary_heights(host, host.loops()[0].vertices[0], 0);

  const GridBox box = vertex_box(s);
  const std::size_t n = box.cells();
  // Directed constraint edges: h(b) <= h(a) + cost.
  struct Arc {
    int to;
    int cost;
  };
  std::vector<std::vector<Arc>> arcs(n);
  for (int j = box.y0; j < box.y0 + box.height; ++j)
    for (int i = box.x0; i < box.x0 + box.width; ++i) {
      const Vertex a{i, j};
      for (int d = 0; d < 4; ++d) {
        const Vertex b{i + kDx[d], j + kDy[d]};
        if (!box.contains(b.x, b.y)) continue;
        const auto [l, r] = edge_sides(a, b);
        const bool in_l = s.contains(l), in_r = s.contains(r);
        if (!in_l && !in_r) continue;
        int cost;
        if (in_l && in_r) {
          cost = is_black(l) ? 1 : 3;
        } else {
          cost = edge_height_step(a, b, false);  // pinned both ways
        }
        arcs[box.linear(a.x, a.y)].push_back({static_cast<int>(box.linear(b.x, b.y)), cost});
      }
    }

  constexpr long long kInf = std::numeric_limits<long long>::max() / 4;
  for (std::size_t c = 0; c < bh.size(); ++c) {
    std::vector<long long> dist(n, kInf);
    std::vector<int> relax_count(n, 0);
    std::vector<char> in_queue(n, 0);
    std::deque<int> queue;
    const auto& vs = host.loops()[c].vertices;
    for (std::size_t k = 0; k < vs.size(); ++k) {
      const int id = static_cast<int>(box.linear(vs[k].x, vs[k].y));
      dist[id] = bh[c][k];
      queue.push_back(id);
      in_queue[id] = 1;
    }
    while (!queue.empty()) {
      const int a = queue.front();
      queue.pop_front();
      in_queue[a] = 0;
      for (const Arc& arc : arcs[a]) {
        if (dist[a] + arc.cost < dist[arc.to]) {
          dist[arc.to] = dist[a] + arc.cost;
          if (++relax_count[arc.to] > static_cast<int>(n)) return false;  // negative cycle
          if (!in_queue[arc.to]) {
            in_queue[arc.to] = 1;
            queue.push_back(arc.to);
          }
        }
      }
    }
    for (std::size_t k = 0; k < vs.size(); ++k)
      if (dist[box.linear(vs[k].x, vs[k].y)] < bh[c][k]) return false;
  }
  return true;
}

bool fournier_check(const TemperleyanPolyomino& tp) { return fournier_check(tp.host()); }

void write_height_csv(std::ostream& out, const HeightField& h, double eps) {
  out << "x,y,h\n";
  for (int j = h.box.y0; j < h.box.y0 + h.box.height; ++j)
    for (int i = h.box.x0; i < h.box.x0 + h.box.width; ++i) {
      const int v = h.values[h.box.linear(i, j)];
      if (v == HeightField::kMissing) continue;
      const Point p = position(Vertex{i, j}, eps);
      out << p.real() << ',' << p.imag() << ',' << v << '\n';
    }
}

}  // namespace dimer
