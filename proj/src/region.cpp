#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <sstream>

#include "dimer/lattice.hpp"

namespace dimer {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw DimerError(kind, msg); }

double signed_area(const std::vector<Point>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point p = poly[i], q = poly[(i + 1) % poly.size()];
    a += p.real() * q.imag() - q.real() * p.imag();
  }
  return a / 2;
}

// Even-odd membership on a grid of spacing `step`, one scanline per row.
class InsideGrid {
 public:
  InsideGrid(const RegionSpec& spec, double step) : step_(step) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& c : spec.components)
      for (const auto& p : c) {
        x0 = std::min(x0, p.real());
        x1 = std::max(x1, p.real());
        y0 = std::min(y0, p.imag());
        y1 = std::max(y1, p.imag());
      }
    i0_ = static_cast<int>(std::floor(x0 / step)) - 1;
    j0_ = static_cast<int>(std::floor(y0 / step)) - 1;
    w_ = static_cast<int>(std::ceil(x1 / step)) + 2 - i0_;
    h_ = static_cast<int>(std::ceil(y1 / step)) + 2 - j0_;
    cells_.assign(static_cast<std::size_t>(w_) * h_, 0);
    // A tiny offset keeps scanlines off polyline vertices.
    const double nudge = step * 1e-7 * std::numbers::pi;
    std::vector<double> xs;
    for (int j = 0; j < h_; ++j) {
      const double y = (j0_ + j) * step + nudge;
      xs.clear();
      for (const auto& c : spec.components)
        for (std::size_t k = 0; k < c.size(); ++k) {
          const Point p = c[k], q = c[(k + 1) % c.size()];
          if ((p.imag() > y) == (q.imag() > y)) continue;
          const double t = (y - p.imag()) / (q.imag() - p.imag());
          xs.push_back(p.real() + t * (q.real() - p.real()));
        }
      std::sort(xs.begin(), xs.end());
      for (int i = 0; i < w_; ++i) {
        const double x = (i0_ + i) * step + nudge;
        const auto below = std::lower_bound(xs.begin(), xs.end(), x) - xs.begin();
        cells_[static_cast<std::size_t>(j) * w_ + i] = below % 2 == 1;
      }
    }
  }

  // Membership of the grid point (i * step, j * step).
  bool inside(int i, int j) const {
    i -= i0_;
    j -= j0_;
    if (i < 0 || j < 0 || i >= w_ || j >= h_) return false;
    return cells_[static_cast<std::size_t>(j) * w_ + i] != 0;
  }
  int i_begin() const { return i0_; }
  int i_end() const { return i0_ + w_; }
  int j_begin() const { return j0_; }
  int j_end() const { return j0_ + h_; }

 private:
  double step_;
  int i0_ = 0, j0_ = 0, w_ = 0, h_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct Nearest {
  double distance = std::numeric_limits<double>::infinity();
  Point tangent;
};

Nearest nearest_on(const std::vector<Point>& c, Point p) {
  Nearest best;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const Point a = c[k], b = c[(k + 1) % c.size()];
    const Point d = b - a;
    const double len2 = std::norm(d);
    if (len2 == 0) continue;
    const double t = std::clamp(((p - a) * std::conj(d)).real() / len2, 0.0, 1.0);
    const double dist = std::abs(p - (a + t * d));
    if (dist < best.distance) best = {dist, d / std::sqrt(len2)};
  }
  return best;
}

int round_to_parity(double t, int parity) {
  return static_cast<int>(std::lround((t - parity) / 2)) * 2 + parity;
}

double feature_size(const RegionSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : spec.components) {
    double x0 = best, x1 = -best, y0 = best, y1 = -best;
    for (const auto& p : c) {
      x0 = std::min(x0, p.real());
      x1 = std::max(x1, p.real());
      y0 = std::min(y0, p.imag());
      y1 = std::max(y1, p.imag());
    }
    best = std::min({best, x1 - x0, y1 - y0});
  }
  return best;
}

// Lattice edge of a loop with its inside and outside squares.
struct LoopEdge {
  Site inside, outside;
  Point mid;
};

std::vector<LoopEdge> loop_edges(const BoundaryLoop& loop, double eps) {
  std::vector<LoopEdge> out;
  const auto& vs = loop.vertices;
  for (std::size_t k = 0; k < vs.size(); ++k) {
    const Vertex a = vs[k], b = vs[(k + 1) % vs.size()];
    const int dx = b.x - a.x, dy = b.y - a.y;
    // Interior on the left of the step a -> b.
    Site in, out_sq;
    if (dx == 1) { in = {a.x, a.y}; out_sq = {a.x, a.y - 1}; }
    else if (dx == -1) { in = {b.x, b.y - 1}; out_sq = {b.x, b.y}; }
    else if (dy == 1) { in = {a.x - 1, a.y}; out_sq = {a.x, a.y}; }
    else { in = {b.x, b.y}; out_sq = {b.x - 1, b.y}; }
    out.push_back({in, out_sq, (position(a, eps) + position(b, eps)) / 2.0});
  }
  return out;
}

// Midpoint of the longest straight run of a loop.
Point longest_flat_midpoint(const BoundaryLoop& loop, double eps) {
  const auto& vs = loop.vertices;
  const std::size_t n = vs.size();
  auto dir = [&](std::size_t k) {
    const Vertex a = vs[k % n], b = vs[(k + 1) % n];
    return std::pair<int, int>{b.x - a.x, b.y - a.y};
  };
  // Start at a turn so runs do not wrap.
  std::size_t start = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (dir(k) != dir(k + n - 1)) {
      start = k;
      break;
    }
  std::size_t best_len = 0, best_from = start, run_from = start, len = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t at = start + k;
    if (k > 0 && dir(at) != dir(at - 1)) {
      run_from = at;
      len = 0;
    }
    if (++len > best_len) {
      best_len = len;
      best_from = run_from;
    }
  }
  const Vertex a = vs[best_from % n], b = vs[(best_from + best_len) % n];
  return (position(a, eps) + position(b, eps)) / 2.0;
}

}  // namespace

double default_delta(double eps, double feature) {
  const double raw = 8 * eps * std::ceil(1 / std::sqrt(eps));
  const double capped = std::min(raw, feature / 4);
  // Whole blocks of the B0 lattice.
  return std::max(2 * eps, std::floor(capped / (2 * eps)) * 2 * eps);
}

TemperleyanPolyomino discretize_region(const RegionSpec& spec, double eps, std::optional<double> delta) {
  if (!(eps > 0)) fail(ErrorKind::RegionParse, "eps must be positive");
  if (spec.components.empty()) fail(ErrorKind::RegionParse, "region has no boundary");
  const double feature = feature_size(spec);
  const double flat = delta ? *delta : default_delta(eps, feature);
  if (feature < 6 * eps) fail(ErrorKind::ResolutionTooCoarse, "eps is too large for the region");

  // Blocks are the 3x3 squares around B0 sites; accept those whose 7x7 grid of
  // half-spacing points lies inside the region.
  const InsideGrid grid(spec, eps / 2);
  auto block_inside = [&](int cx, int cy) {
    for (int j = 2 * cy - 3; j <= 2 * cy + 3; ++j)
      for (int i = 2 * cx - 3; i <= 2 * cx + 3; ++i)
        if (!grid.inside(i, j)) return false;
    return true;
  };
  auto center_inside = [&](int cx, int cy) { return grid.inside(2 * cx, 2 * cy); };
  std::vector<std::pair<int, int>> blocks;
  const int cx0 = grid.i_begin() / 2 - 2, cx1 = grid.i_end() / 2 + 2;
  const int cy0 = grid.j_begin() / 2 - 2, cy1 = grid.j_end() / 2 + 2;
  for (int cy = cy0 - (cy0 & 1); cy <= cy1; cy += 2)
    for (int cx = cx0 | 1; cx <= cx1; cx += 2)
      if (block_inside(cx, cy)) blocks.emplace_back(cx, cy);
  if (blocks.empty()) fail(ErrorKind::ResolutionTooCoarse, "no block of squares fits inside the region");

  // Straighten the boundary within `flat` of each marked point: in a window
  // along the tangent, the block row nearest the curve becomes the edge row.
  for (std::size_t c = 0; c < spec.marked_points.size() && c < spec.components.size(); ++c) {
    const Point m = spec.marked_points[c];
    const Nearest near = nearest_on(spec.components[c], m);
    const bool horizontal = std::abs(near.tangent.real()) >= std::abs(near.tangent.imag());
    // Region side of the curve: probe half a block inward along the normal.
    const Point normal = near.tangent * Point(0, 1);
    const Point probe = m + normal * (2.0 * eps);
    const bool left_inside = grid.inside(static_cast<int>(std::lround(probe.real() / (eps / 2))),
                                         static_cast<int>(std::lround(probe.imag() / (eps / 2))));
    const Point inward = left_inside ? normal : -normal;
    // In block-center units along the normal axis.
    const double along = horizontal ? m.imag() / eps : m.real() / eps;
    const int s = (horizontal ? inward.imag() : inward.real()) > 0 ? 1 : -1;
    const int row = round_to_parity(along + 1.5 * s, horizontal ? 0 : 1);
    const int depth = static_cast<int>(std::ceil(flat / eps)) + 2;
    auto in_window = [&](int cx, int cy) {
      const double t = horizontal ? cx * eps - m.real() : cy * eps - m.imag();
      return std::abs(t) <= flat;
    };
    std::vector<std::pair<int, int>> kept;
    for (auto [cx, cy] : blocks) {
      const int n = horizontal ? cy : cx;
      if (in_window(cx, cy) && (n - row) * s < 0 && (row - n) * s <= depth) continue;
      kept.emplace_back(cx, cy);
    }
    const int lo = static_cast<int>(std::floor(((horizontal ? m.real() : m.imag()) - flat) / eps)) - 2;
    const int hi = static_cast<int>(std::ceil(((horizontal ? m.real() : m.imag()) + flat) / eps)) + 2;
    for (int t = lo; t <= hi; ++t) {
      const bool t_ok = horizontal ? (t & 1) : !(t & 1);
      if (!t_ok) continue;
      for (int k = 0; k <= depth; k += 2) {
        const int n = row + s * k;
        const int cx = horizontal ? t : n, cy = horizontal ? n : t;
        if (in_window(cx, cy) && center_inside(cx, cy)) kept.emplace_back(cx, cy);
      }
    }
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    blocks = std::move(kept);
  }

  std::vector<Site> centers;
  for (auto [cx, cy] : blocks) centers.push_back({cx, cy});
  Polyomino p;
  try {
    p = block_polyomino(centers, eps);
  } catch (const DimerError& e) {
    fail(ErrorKind::ResolutionTooCoarse, std::string("blocks do not form a polyomino: ") + e.what());
  }
  if (p.loops().size() != spec.components.size())
    fail(ErrorKind::ResolutionTooCoarse, "discretization has " + std::to_string(p.loops().size()) +
                                             " boundary loops, region has " +
                                             std::to_string(spec.components.size()));

  // Match each hole loop to the nearest region component.
  std::vector<int> loop_of_component(spec.components.size(), -1);
  loop_of_component[0] = 0;
  for (std::size_t l = 1; l < p.loops().size(); ++l) {
    const Point v = position(p.loops()[l].vertices.front(), eps);
    std::size_t best = 1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c < spec.components.size(); ++c) {
      const double d = nearest_on(spec.components[c], v).distance;
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (loop_of_component[best] >= 0)
      fail(ErrorKind::ResolutionTooCoarse, "two hole loops approximate the same component");
    loop_of_component[best] = static_cast<int>(l);
  }

  auto target = [&](std::size_t c) {
    return c < spec.marked_points.size() ? spec.marked_points[c]
                                         : longest_flat_midpoint(p.loops()[loop_of_component[c]], eps);
  };
  const SquareSet& sq = p.squares();
  Site d0;
  {
    const Point m = target(0);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : loop_edges(p.loops()[0], eps))
      if (classify_square(e.inside) == SquareClass::B1 && std::abs(e.mid - m) < best) {
        best = std::abs(e.mid - m);
        d0 = e.inside;
      }
    if (!std::isfinite(best)) fail(ErrorKind::ResolutionTooCoarse, "no B1 square on the outer boundary");
  }
  std::vector<Site> exposed;
  for (std::size_t c = 1; c < spec.components.size(); ++c) {
    const Point m = target(c);
    double best = std::numeric_limits<double>::infinity();
    Site pick;
    for (const auto& e : loop_edges(p.loops()[loop_of_component[c]], eps)) {
      if (classify_square(e.outside) != SquareClass::B0) continue;
      int touching = 0;
      for (Site n : {Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}}) touching += sq.contains(e.outside + n);
      if (touching != 1) continue;
      if (std::abs(e.mid - m) < best) {
        best = std::abs(e.mid - m);
        pick = e.outside;
      }
    }
    if (!std::isfinite(best)) fail(ErrorKind::ResolutionTooCoarse, "no place for an exposed square in a hole");
    exposed.push_back(pick);
  }
  try {
    return make_temperleyan(p, d0, exposed, flat);
  } catch (const DimerError& e) {
    fail(ErrorKind::ResolutionTooCoarse, e.what());
  }
}

// Region documents: {"components": [component...], "marked_points": [[x, y]...],
// "probes": {"name": [x, y]}, "eps": e, "delta": d}. A component is a list of
// [x, y] points, or a list of pieces {"points": [[x, y]...]} and
// {"arc": {"center": [x, y], "radius": r, "start": a, "end": b}}, or
// {"circle": {"center": [x, y], "radius": r}}. Arcs are sampled at a quarter
// of the finest spacing in use.
RegionSpec region_from_json(const std::string& text, double resolution) {
  using nlohmann::json;
  RegionSpec spec;
  try {
    const json j = json::parse(text);
    auto point = [](const json& v) { return Point(v.at(0).get<double>(), v.at(1).get<double>()); };
    if (j.contains("eps")) spec.eps = j.at("eps").get<double>();
    if (j.contains("delta")) spec.delta = j.at("delta").get<double>();
    const double step = (spec.eps ? std::min(*spec.eps, resolution) : resolution) / 4;
    auto arc = [&](std::vector<Point>& out, Point center, double r, double a, double b) {
      const int n = std::max(16, static_cast<int>(std::ceil(std::abs(b - a) * r / step)));
      for (int k = 0; k < n; ++k) out.push_back(center + std::polar(r, a + (b - a) * k / n));
    };
    for (const auto& c : j.at("components")) {
      std::vector<Point> poly;
      if (c.is_object() && c.contains("circle")) {
        const auto& ci = c.at("circle");
        arc(poly, point(ci.at("center")), ci.at("radius").get<double>(), 0, 2 * std::numbers::pi);
      } else {
        for (const auto& piece : c) {
          if (piece.is_array()) {
            poly.push_back(point(piece));
          } else if (piece.contains("points")) {
            for (const auto& q : piece.at("points")) poly.push_back(point(q));
          } else if (piece.contains("arc")) {
            const auto& a = piece.at("arc");
            arc(poly, point(a.at("center")), a.at("radius").get<double>(), a.at("start").get<double>(),
                a.at("end").get<double>());
          } else {
            fail(ErrorKind::RegionParse, "unknown boundary piece");
          }
        }
      }
      if (poly.size() < 3) fail(ErrorKind::RegionParse, "boundary component with fewer than 3 points");
      spec.components.push_back(std::move(poly));
    }
    if (j.contains("marked_points"))
      for (const auto& m : j.at("marked_points")) spec.marked_points.push_back(point(m));
    if (j.contains("probes"))
      for (const auto& [name, v] : j.at("probes").items()) spec.probe_points.emplace_back(name, point(v));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::RegionParse, e.what());
  }
  if (spec.components.empty()) fail(ErrorKind::RegionParse, "region has no boundary components");
  if (spec.marked_points.size() > spec.components.size())
    fail(ErrorKind::RegionParse, "more marked points than boundary components");
  // Outer counterclockwise, holes clockwise.
  for (std::size_t c = 0; c < spec.components.size(); ++c) {
    const bool ccw = signed_area(spec.components[c]) > 0;
    if (ccw != (c == 0)) std::reverse(spec.components[c].begin(), spec.components[c].end());
  }
  return spec;
}

RegionSpec load_region(const std::string& path, double resolution) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::RegionParse, "cannot open region file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return region_from_json(ss.str(), resolution);
}

std::string region_to_json(const RegionSpec& spec) {
  nlohmann::json j;
  auto pt = [](Point p) { return nlohmann::json::array({p.real(), p.imag()}); };
  j["components"] = nlohmann::json::array();
  for (const auto& c : spec.components) {
    auto arr = nlohmann::json::array();
    for (const auto& p : c) arr.push_back(pt(p));
    j["components"].push_back(arr);
  }
  j["marked_points"] = nlohmann::json::array();
  for (const auto& m : spec.marked_points) j["marked_points"].push_back(pt(m));
  j["probes"] = nlohmann::json::object();
  for (const auto& [name, p] : spec.probe_points) j["probes"][name] = pt(p);
  if (spec.eps) j["eps"] = *spec.eps;
  if (spec.delta) j["delta"] = *spec.delta;
  return j.dump(2);
}

RegionSpec rectangle_region(double x0, double y0, double x1, double y1) {
  RegionSpec s;
  s.components.push_back({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
  s.marked_points.push_back({(x0 + x1) / 2, y0});
  return s;
}

RegionSpec disk_region(Point center, double radius, double resolution) {
  RegionSpec s;
  std::vector<Point> c;
  const int n = std::max(64, static_cast<int>(std::ceil(2 * std::numbers::pi * radius / (resolution / 4))));
  for (int k = 0; k < n; ++k) c.push_back(center + std::polar(radius, 2 * std::numbers::pi * k / n));
  s.components.push_back(std::move(c));
  s.marked_points.push_back(center - Point(0, radius));
  return s;
}

RegionSpec square_annulus_region(double outer, double inner) {
  RegionSpec s;
  const double a = outer / 2, b = inner / 2;
  s.components.push_back({{-a, -a}, {a, -a}, {a, a}, {-a, a}});
  s.components.push_back({{-b, -b}, {-b, b}, {b, b}, {b, -b}});
  s.marked_points.push_back({0, -a});
  s.marked_points.push_back({0, -b});
  return s;
}

}  // namespace dimer
