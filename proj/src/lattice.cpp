#include "dimer/lattice.hpp"

#include <algorithm>
#include <climits>
#include <cstdint>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace dimer {

namespace {

constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

std::uint64_t pack(int x, int y) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) |
         static_cast<std::uint32_t>(y);
}

int direction_of(int dx, int dy) {
  for (int d = 0; d < 4; ++d)
    if (kDx[d] == dx && kDy[d] == dy) return d;
  return -1;
}

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw DimerError(kind, msg); }

std::string str(const Site& s) {
  return "(" + std::to_string(s.x) + "," + std::to_string(s.y) + ")";
}

bool connected(const SquareSet& set) {
  if (set.empty()) return true;
  std::vector<char> seen(set.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const Site s = set[stack.back()];
    stack.pop_back();
    for (int d = 0; d < 4; ++d) {
      const int j = set.index_of(s.x + kDx[d], s.y + kDy[d]);
      if (j >= 0 && !seen[j]) {
        seen[j] = 1;
        ++count;
        stack.push_back(j);
      }
    }
  }
  return count == set.size();
}

// Builds CSR adjacency from an edge list over vertex indices.
void build_csr(SiteGraph& g, const std::vector<std::pair<int, int>>& edges) {
  const std::size_t n = g.vertices.size();
  g.adj_offset.assign(n + 1, 0);
  for (auto [a, b] : edges) {
    ++g.adj_offset[a + 1];
    ++g.adj_offset[b + 1];
  }
  for (std::size_t i = 0; i < n; ++i) g.adj_offset[i + 1] += g.adj_offset[i];
  g.adj.assign(g.adj_offset[n], 0);
  std::vector<int> fill(g.adj_offset.begin(), g.adj_offset.end() - 1);
  for (auto [a, b] : edges) {
    g.adj[fill[a]++] = b;
    g.adj[fill[b]++] = a;
  }
}

}  // namespace

const char* to_string(SquareClass c) {
  switch (c) {
    case SquareClass::W0: return "W0";
    case SquareClass::W1: return "W1";
    case SquareClass::B0: return "B0";
    case SquareClass::B1: return "B1";
  }
  return "?";
}

SquareSet::SquareSet(std::vector<Site> sites) : sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end(),
            [](const Site& a, const Site& b) { return row_major_less(a, b); });
  sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  if (sites_.empty()) return;
  int x0 = INT_MAX, x1 = INT_MIN, y0 = INT_MAX, y1 = INT_MIN;
  for (const auto& s : sites_) {
    x0 = std::min(x0, s.x);
    x1 = std::max(x1, s.x);
    y0 = std::min(y0, s.y);
    y1 = std::max(y1, s.y);
  }
  box_ = GridBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  index_.assign(box_.cells(), -1);
  for (std::size_t i = 0; i < sites_.size(); ++i)
    index_[box_.linear(sites_[i].x, sites_[i].y)] = static_cast<int>(i);
}

long long BoundaryLoop::twice_area() const {
  long long a = 0;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = vertices[i];
    const auto& q = vertices[(i + 1) % n];
    a += static_cast<long long>(p.x) * q.y - static_cast<long long>(q.x) * p.y;
  }
  return a;
}

Polyomino::Polyomino(std::vector<Site> squares, double spacing)
    : squares_(std::move(squares)), spacing_(spacing) {
  if (!(spacing > 0.0)) fail(ErrorKind::InvalidPolyomino, "spacing must be positive");
  if (squares_.empty()) return;
  if (!connected(squares_)) fail(ErrorKind::InvalidPolyomino, "squares are not connected");

  // Directed boundary edges, counterclockwise around each square: the start
  // vertex maps to the direction of the unique outgoing boundary edge.
  std::unordered_map<std::uint64_t, int> out;
  out.reserve(squares_.size());
  for (const auto& s : squares_.sites()) {
    const Vertex corner[4] = {{s.x, s.y}, {s.x + 1, s.y}, {s.x + 1, s.y + 1}, {s.x, s.y + 1}};
    const Site nb[4] = {{s.x, s.y - 1}, {s.x + 1, s.y}, {s.x, s.y + 1}, {s.x - 1, s.y}};
    const int dir[4] = {0, 1, 2, 3};
    for (int k = 0; k < 4; ++k) {
      if (squares_.contains(nb[k])) continue;
      if (!out.emplace(pack(corner[k].x, corner[k].y), dir[k]).second)
        fail(ErrorKind::InvalidPolyomino,
             "boundary pinches at vertex (" + std::to_string(corner[k].x) + "," +
                 std::to_string(corner[k].y) + ")");
    }
  }

  std::vector<Vertex> starts;
  starts.reserve(out.size());
  for (const auto& [key, d] : out)
    starts.push_back({static_cast<int>(static_cast<std::uint32_t>(key >> 32)),
                      static_cast<int>(static_cast<std::uint32_t>(key))});
  std::sort(starts.begin(), starts.end(),
            [](const Vertex& a, const Vertex& b) { return row_major_less(a, b); });

  std::unordered_map<std::uint64_t, int> visited;
  for (const auto& v0 : starts) {
    if (visited.count(pack(v0.x, v0.y))) continue;
    BoundaryLoop loop;
    Vertex v = v0;
    do {
      visited.emplace(pack(v.x, v.y), 1);
      loop.vertices.push_back(v);
      const int d = out.at(pack(v.x, v.y));
      v = {v.x + kDx[d], v.y + kDy[d]};
    } while (!(v == v0));
    loops_.push_back(std::move(loop));
  }

  // Starts were taken in row-major order, so the outer loop (which owns the
  // lowest vertex) comes first and holes are ordered deterministically.
  int outer = 0;
  for (std::size_t i = 0; i < loops_.size(); ++i) {
    if (loops_[i].twice_area() > 0) {
      if (i != 0) outer = static_cast<int>(i);
    }
  }
  int positive = 0;
  for (const auto& l : loops_) positive += l.twice_area() > 0;
  if (positive != 1) fail(ErrorKind::InvalidPolyomino, "expected exactly one outer boundary loop");
  std::rotate(loops_.begin(), loops_.begin() + outer, loops_.begin() + outer + 1);
}

int Polyomino::loop_of_edge(const Vertex& a, const Vertex& b) const {
  const int d = direction_of(b.x - a.x, b.y - a.y);
  if (d < 0) return -1;
  // The edge a->b is a boundary edge with interior on the left iff the square
  // on its left is present and the one on its right is not.
  Site left, right;
  switch (d) {
    case 0: left = {a.x, a.y}; right = {a.x, a.y - 1}; break;
    case 1: left = {a.x - 1, a.y}; right = {a.x, a.y}; break;
    case 2: left = {a.x - 1, a.y - 1}; right = {a.x - 1, a.y}; break;
    default: left = {a.x, a.y - 1}; right = {a.x - 1, a.y - 1}; break;
  }
  if (!squares_.contains(left) || squares_.contains(right)) return -1;
  for (std::size_t i = 0; i < loops_.size(); ++i) {
    const auto& vs = loops_[i].vertices;
    for (std::size_t k = 0; k < vs.size(); ++k)
      if (vs[k] == a && vs[(k + 1) % vs.size()] == b) return static_cast<int>(i);
  }
  return -1;
}

std::vector<Corner> Polyomino::corners() const {
  std::vector<Corner> result;
  for (const auto& loop : loops_) {
    const auto& vs = loop.vertices;
    const std::size_t n = vs.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vertex& prev = vs[(k + n - 1) % n];
      const Vertex& cur = vs[k];
      const Vertex& next = vs[(k + 1) % n];
      const int ix = cur.x - prev.x, iy = cur.y - prev.y;
      const int ox = next.x - cur.x, oy = next.y - cur.y;
      if (ix == ox && iy == oy) continue;
      const bool convex = ix * oy - iy * ox > 0;
      const int bx = convex ? ox - ix : ix - ox;
      const int by = convex ? oy - iy : iy - oy;
      // Vertex {i,j} sits at (i-1/2, j-1/2); half a bisector step lands on a center.
      const Site sq{cur.x + (bx - 1) / 2, cur.y + (by - 1) / 2};
      result.push_back({cur, convex, sq});
    }
  }
  return result;
}

bool validate_even(const Polyomino& p) {
  for (const auto& c : p.corners())
    if (classify_square(c.square) != SquareClass::B1) return false;
  return true;
}

TemperleyanPolyomino make_temperleyan(const Polyomino& p, const Site& d0,
                                      const std::vector<Site>& inner_sites, double delta) {
  if (p.empty()) fail(ErrorKind::InvalidPolyomino, "empty polyomino");
  if (!validate_even(p)) fail(ErrorKind::NotEven, "a corner square is not of class B1");
  const auto& sq = p.squares();
  if (!sq.contains(d0) || classify_square(d0) != SquareClass::B1)
    fail(ErrorKind::BadRemovalClass, "d0 " + str(d0) + " must be a B1 square of the polyomino");
  bool on_outer = false;
  for (int d = 0; d < 4; ++d)
    if (!sq.contains(d0.x + kDx[d], d0.y + kDy[d])) {
      // Whether the missing neighbour is outside the outer loop is checked by
      // tracing: the edge between them lies on some loop.
      const Vertex a = d == 0 ? Vertex{d0.x + 1, d0.y}
                     : d == 1 ? Vertex{d0.x + 1, d0.y + 1}
                     : d == 2 ? Vertex{d0.x, d0.y + 1}
                              : Vertex{d0.x, d0.y};
      const Vertex b = d == 0 ? Vertex{d0.x + 1, d0.y + 1}
                     : d == 1 ? Vertex{d0.x, d0.y + 1}
                     : d == 2 ? Vertex{d0.x, d0.y}
                              : Vertex{d0.x + 1, d0.y};
      if (p.loop_of_edge(a, b) == 0) on_outer = true;
    }
  if (!on_outer) fail(ErrorKind::BadRemovalClass, "d0 " + str(d0) + " does not touch the outer boundary");

  const std::size_t holes = p.loops().size() - 1;
  if (inner_sites.size() != holes)
    fail(ErrorKind::BadExposedPlacement, "need exactly one exposed square per hole (" +
                                             std::to_string(holes) + ")");
  std::vector<int> hole_of(inner_sites.size(), -1);
  std::vector<int> used(p.loops().size(), 0);
  for (std::size_t j = 0; j < inner_sites.size(); ++j) {
    const Site s = inner_sites[j];
    if (classify_square(s) != SquareClass::B0)
      fail(ErrorKind::BadExposedPlacement, "exposed square " + str(s) + " is not of class B0");
    if (sq.contains(s)) fail(ErrorKind::BadExposedPlacement, "exposed square " + str(s) + " lies in P");
    int touching = 0;
    int nb_dir = -1;
    for (int d = 0; d < 4; ++d)
      if (sq.contains(s.x + kDx[d], s.y + kDy[d])) {
        ++touching;
        nb_dir = d;
      }
    if (touching != 1)
      fail(ErrorKind::BadExposedPlacement,
           "exposed square " + str(s) + " borders " + std::to_string(touching) + " squares of P");
    // Shared edge, oriented with the P square on the left.
    const Site q{s.x + kDx[nb_dir], s.y + kDy[nb_dir]};
    Vertex a, b;
    if (nb_dir == 0) { a = {q.x, q.y + 1}; b = {q.x, q.y}; }
    else if (nb_dir == 2) { a = {s.x, s.y}; b = {s.x, s.y + 1}; }
    else if (nb_dir == 1) { a = {q.x, q.y}; b = {q.x + 1, q.y}; }
    else { a = {s.x + 1, s.y}; b = {s.x, s.y}; }
    const int loop = p.loop_of_edge(a, b);
    if (loop <= 0)
      fail(ErrorKind::BadExposedPlacement, "exposed square " + str(s) + " is not inside a hole");
    if (used[loop]++)
      fail(ErrorKind::BadExposedPlacement, "two exposed squares in the same hole");
    hole_of[j] = loop;
  }

  std::vector<Site> host_sites;
  host_sites.reserve(sq.size() + inner_sites.size());
  for (const auto& s : sq.sites())
    if (!(s == d0)) host_sites.push_back(s);
  for (const auto& s : inner_sites) host_sites.push_back(s);

  TemperleyanPolyomino tp;
  tp.base_ = p;
  tp.d0_ = d0;
  tp.delta_ = delta;
  try {
    tp.host_ = Polyomino(host_sites, p.spacing());
  } catch (const DimerError& e) {
    fail(ErrorKind::BadRemovalClass, std::string("host is not a valid polyomino: ") + e.what());
  }
  if (tp.host_.loops().size() != p.loops().size())
    fail(ErrorKind::BadExposedPlacement, "removal or exposure changed the number of holes");

  // Reorder the exposed squares to follow the host's hole order.
  tp.exposed_.assign(holes, Site{});
  std::vector<int> filled(holes, 0);
  for (const auto& s : inner_sites) {
    int loop = -1;
    for (int d = 0; d < 4 && loop < 0; ++d) {
      const Site t{s.x + kDx[d], s.y + kDy[d]};
      if (tp.host_.squares().contains(t)) continue;
      // Edge of s facing t, oriented with s on the left.
      Vertex a, b;
      if (d == 0) { a = {s.x + 1, s.y}; b = {s.x + 1, s.y + 1}; }
      else if (d == 1) { a = {s.x + 1, s.y + 1}; b = {s.x, s.y + 1}; }
      else if (d == 2) { a = {s.x, s.y + 1}; b = {s.x, s.y}; }
      else { a = {s.x, s.y}; b = {s.x + 1, s.y}; }
      loop = tp.host_.loop_of_edge(a, b);
    }
    if (loop <= 0 || filled[loop - 1]++)
      fail(ErrorKind::BadExposedPlacement, "exposed square " + str(s) + " fills its hole");
    tp.exposed_[loop - 1] = s;
  }

  long long black = 0, white = 0;
  for (const auto& s : tp.host_.squares().sites()) (is_black(s) ? black : white)++;
  if (black != white)
    fail(ErrorKind::UnbalancedColors,
         std::to_string(black) + " black vs " + std::to_string(white) + " white squares");
  return tp;
}

Polyomino block_polyomino(const std::vector<Site>& b0_centers, double spacing) {
  std::vector<Site> sites;
  sites.reserve(9 * b0_centers.size());
  for (const auto& c : b0_centers) {
    if (classify_square(c) != SquareClass::B0)
      fail(ErrorKind::NotEven, "block center " + str(c) + " is not of class B0");
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) sites.push_back({c.x + dx, c.y + dy});
  }
  return Polyomino(std::move(sites), spacing);
}

SiteGraph interior_dual(const SquareSet& squares) {
  SiteGraph g;
  g.vertices = squares.sites();
  g.lookup = squares;
  g.boundary.assign(g.vertices.size(), 0);
  g.exposed.assign(g.vertices.size(), 0);
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const Site s = g.vertices[i];
    for (int d = 0; d < 2; ++d) {
      const int j = squares.index_of(s.x + kDx[d], s.y + kDy[d]);
      if (j >= 0) edges.emplace_back(static_cast<int>(i), j);
    }
  }
  build_csr(g, edges);
  return g;
}

SiteGraph interior_dual(const TemperleyanPolyomino& tp) {
  SiteGraph g = interior_dual(tp.host().squares());
  for (const auto& e : tp.exposed()) g.exposed[g.index_of(e)] = 1;
  return g;
}

SiteGraph b0_prime_graph(const TemperleyanPolyomino& tp) {
  const auto& host = tp.host().squares();
  std::vector<Site> verts;
  for (const auto& s : host.sites()) {
    const auto c = classify_square(s);
    if (c == SquareClass::B0) {
      verts.push_back(s);
    } else if (c == SquareClass::W0) {
      verts.push_back({s.x - 1, s.y});
      verts.push_back({s.x + 1, s.y});
    } else if (c == SquareClass::W1) {
      verts.push_back({s.x, s.y - 1});
      verts.push_back({s.x, s.y + 1});
    }
  }
  SiteGraph g;
  g.lookup = SquareSet(std::move(verts));
  g.vertices = g.lookup.sites();
  const std::size_t n = g.vertices.size();
  g.boundary.assign(n, 0);
  g.exposed.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) g.boundary[i] = !host.contains(g.vertices[i]);
  for (const auto& e : tp.exposed()) g.exposed[g.index_of(e)] = 1;

  std::vector<std::pair<int, int>> edges;
  for (const auto& s : host.sites()) {
    const auto c = classify_square(s);
    if (c == SquareClass::W0)
      edges.emplace_back(g.index_of({s.x - 1, s.y}), g.index_of({s.x + 1, s.y}));
    else if (c == SquareClass::W1)
      edges.emplace_back(g.index_of({s.x, s.y - 1}), g.index_of({s.x, s.y + 1}));
  }
  build_csr(g, edges);
  return g;
}

SiteGraph b1_dual_graph(const TemperleyanPolyomino& tp) {
  const auto& host = tp.host().squares();
  std::vector<Site> verts{tp.d0()};
  for (const auto& s : host.sites())
    if (classify_square(s) == SquareClass::B1) verts.push_back(s);
  SiteGraph g;
  g.lookup = SquareSet(std::move(verts));
  g.vertices = g.lookup.sites();
  const std::size_t n = g.vertices.size();
  g.boundary.assign(n, 0);
  g.exposed.assign(n, 0);
  g.boundary[g.index_of(tp.d0())] = 1;

  std::vector<std::pair<int, int>> edges;
  for (const auto& s : host.sites()) {
    const auto c = classify_square(s);
    if (c != SquareClass::W0 && c != SquareClass::W1) continue;
    const Site a = c == SquareClass::W0 ? Site{s.x, s.y - 1} : Site{s.x - 1, s.y};
    const Site b = c == SquareClass::W0 ? Site{s.x, s.y + 1} : Site{s.x + 1, s.y};
    const int ia = g.index_of(a), ib = g.index_of(b);
    if (ia < 0 || ib < 0)
      fail(ErrorKind::InvalidPolyomino, "white square " + str(s) + " has a B1 neighbour outside the host");
    edges.emplace_back(ia, ib);
  }
  build_csr(g, edges);
  return g;
}

std::string to_run_length(const SquareSet& squares) {
  std::ostringstream out;
  const auto& s = squares.sites();
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1].y == s[i].y && s[j + 1].x == s[j].x + 1) ++j;
    out << s[i].y << ' ' << s[i].x << ' ' << s[j].x << '\n';
    i = j + 1;
  }
  return out.str();
}

std::vector<Site> from_run_length(const std::string& text) {
  std::istringstream in(text);
  std::vector<int> nums;
  int v = 0;
  while (in >> v) nums.push_back(v);
  if (!in.eof() || nums.size() % 3 != 0) fail(ErrorKind::RegionParse, "malformed run-length list");
  std::vector<Site> sites;
  for (std::size_t k = 0; k < nums.size(); k += 3) {
    const int y = nums[k], x0 = nums[k + 1], x1 = nums[k + 2];
    if (x1 < x0) fail(ErrorKind::RegionParse, "run with end before start");
    for (int x = x0; x <= x1; ++x) sites.push_back({x, y});
  }
  return sites;
}

Polyomino even_rectangle(int x0, int y0, int w, int h, double spacing) {
  if ((x0 & 1) || !(y0 & 1) || !(w & 1) || !(h & 1) || w < 1 || h < 1)
    fail(ErrorKind::NotEven, "even rectangle needs x0 even, y0 odd and odd sides");
  std::vector<Site> sites;
  sites.reserve(static_cast<std::size_t>(w) * h);
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) sites.push_back({x, y});
  return Polyomino(std::move(sites), spacing);
}

TemperleyanPolyomino temperleyan_rectangle(int w, int h, int d0_x, bool on_top, double spacing) {
  const Polyomino p = even_rectangle(0, 1, w, h, spacing);
  return make_temperleyan(p, Site{d0_x, on_top ? h : 1}, {});
}

TemperleyanPolyomino temperleyan_annulus(int outer_side, int hole_side, double spacing) {
  const int margin = (outer_side - hole_side) / 2;
  if (!(outer_side & 1) || !(hole_side & 1) || hole_side < 5 || margin < 3 || !(margin & 1))
    fail(ErrorKind::NotEven, "annulus needs odd sides, hole >= 5 and an odd margin >= 3");
  const int hx = margin, hy = 1 + margin;
  std::vector<Site> sites;
  for (int y = 1; y <= outer_side; ++y)
    for (int x = 0; x < outer_side; ++x)
      if (x < hx || x >= hx + hole_side || y < hy || y >= hy + hole_side) sites.push_back({x, y});
  const Polyomino p(std::move(sites), spacing);
  int d0x = (outer_side - 1) / 2;
  d0x -= d0x & 1;
  int ex = hx + (hole_side - 1) / 2;
  if (!(ex & 1)) ex += 1;
  return make_temperleyan(p, Site{d0x, 1}, {Site{ex, hy}});
}

}  // namespace dimer
