#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dimer/error.hpp"

namespace dimer {

// A lattice square, identified by the integer coordinates of its center.
struct Site {
  int x = 0;
  int y = 0;

  friend bool operator==(const Site&, const Site&) = default;
  Site operator+(const Site& o) const { return {x + o.x, y + o.y}; }
  Site operator-(const Site& o) const { return {x - o.x, y - o.y}; }
};

// A corner of the square lattice. Vertex {i, j} is the point (i - 1/2, j - 1/2),
// i.e. the lower-left corner of square {i, j}.
struct Vertex {
  int x = 0;
  int y = 0;

  friend bool operator==(const Vertex&, const Vertex&) = default;
};

// Row-major order: by y, then x.
inline bool row_major_less(const Site& a, const Site& b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}
inline bool row_major_less(const Vertex& a, const Vertex& b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

enum class SquareClass : std::uint8_t { W0, W1, B0, B1 };

constexpr SquareClass classify_square(int x, int y) {
  const bool xo = (x & 1) != 0;
  const bool yo = (y & 1) != 0;
  if (!xo && !yo) return SquareClass::W0;
  if (xo && yo) return SquareClass::W1;
  return xo ? SquareClass::B0 : SquareClass::B1;
}
constexpr SquareClass classify_square(const Site& s) { return classify_square(s.x, s.y); }
constexpr bool is_white(const Site& s) {
  const auto c = classify_square(s);
  return c == SquareClass::W0 || c == SquareClass::W1;
}
constexpr bool is_black(const Site& s) { return !is_white(s); }

const char* to_string(SquareClass c);

// Axis-aligned integer box with a dense index, used for O(1) membership lookups.
struct GridBox {
  int x0 = 0, y0 = 0, width = 0, height = 0;

  bool contains(int x, int y) const {
    return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height;
  }
  std::size_t linear(int x, int y) const {
    return static_cast<std::size_t>(y - y0) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x - x0);
  }
  std::size_t cells() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
};

// Immutable set of squares in row-major order with dense index lookup.
class SquareSet {
 public:
  SquareSet() = default;
  explicit SquareSet(std::vector<Site> sites);

  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  const std::vector<Site>& sites() const { return sites_; }
  const Site& operator[](std::size_t i) const { return sites_[i]; }
  const GridBox& box() const { return box_; }

  // Index of the square in row-major order, or -1.
  int index_of(int x, int y) const {
    return box_.contains(x, y) ? index_[box_.linear(x, y)] : -1;
  }
  int index_of(const Site& s) const { return index_of(s.x, s.y); }
  bool contains(int x, int y) const { return index_of(x, y) >= 0; }
  bool contains(const Site& s) const { return index_of(s) >= 0; }

 private:
  std::vector<Site> sites_;
  GridBox box_;
  std::vector<int> index_;
};

// A closed boundary path traversed with the interior on the left. Vertices are
// listed once; the edge from the last vertex back to the first closes the loop.
struct BoundaryLoop {
  std::vector<Vertex> vertices;

  // Twice the signed area; positive for the outer loop, negative for holes.
  long long twice_area() const;
};

struct Corner {
  Vertex at;
  bool convex = true;
  Site square;  // corner lattice square (contains the interior angle bisector)
};

class Polyomino {
 public:
  Polyomino() = default;
  // Traces the boundary. Throws InvalidPolyomino when the squares are not
  // connected or the boundary is not a disjoint union of simple closed paths.
  explicit Polyomino(std::vector<Site> squares, double spacing = 1.0);

  const SquareSet& squares() const { return squares_; }
  const std::vector<BoundaryLoop>& loops() const { return loops_; }
  double spacing() const { return spacing_; }
  bool empty() const { return squares_.empty(); }

  std::vector<Corner> corners() const;
  // Loop index of the boundary edge from a to b (unit step), or -1.
  int loop_of_edge(const Vertex& a, const Vertex& b) const;

 private:
  SquareSet squares_;
  std::vector<BoundaryLoop> loops_;
  double spacing_ = 1.0;
};

// Even polyomino with d0 removed and exposed squares added.
class TemperleyanPolyomino {
 public:
  TemperleyanPolyomino() = default;

  const Polyomino& base() const { return base_; }
  // Squares actually tiled: base - d0 + exposed.
  const Polyomino& host() const { return host_; }
  const Site& d0() const { return d0_; }
  // exposed()[j] sits in the hole bounded by host().loops()[j + 1].
  const std::vector<Site>& exposed() const { return exposed_; }
  double delta() const { return delta_; }
  double spacing() const { return base_.spacing(); }
  std::size_t holes() const { return exposed_.size(); }

 private:
  friend TemperleyanPolyomino make_temperleyan(const Polyomino&, const Site&,
                                               const std::vector<Site>&, double);
  Polyomino base_;
  Polyomino host_;
  Site d0_;
  std::vector<Site> exposed_;
  double delta_ = 0.0;
};

using Point = std::complex<double>;

struct RegionSpec {
  // Closed polylines, outer component first; the outer one counterclockwise,
  // holes in either orientation (normalized on load).
  std::vector<std::vector<Point>> components;
  std::vector<Point> marked_points;  // one per component: d0', d1', ...
  std::vector<std::pair<std::string, Point>> probe_points;
  std::optional<double> eps;
  std::optional<double> delta;
};

// Vertex-and-edge graph on lattice squares.
struct SiteGraph {
  std::vector<Site> vertices;
  SquareSet lookup;
  std::vector<int> adj_offset;  // CSR
  std::vector<int> adj;
  std::vector<std::uint8_t> boundary;  // the set Y
  std::vector<std::uint8_t> exposed;   // the set V

  std::size_t size() const { return vertices.size(); }
  std::size_t edge_count() const { return adj.size() / 2; }
  int index_of(const Site& s) const { return lookup.index_of(s); }
  std::pair<const int*, const int*> neighbors(int v) const {
    return {adj.data() + adj_offset[v], adj.data() + adj_offset[v + 1]};
  }
  int degree(int v) const { return adj_offset[v + 1] - adj_offset[v]; }
};

bool validate_even(const Polyomino& p);

// Checks the Temperleyan preconditions and assembles the host.
TemperleyanPolyomino make_temperleyan(const Polyomino& p, const Site& d0,
                                      const std::vector<Site>& inner_sites,
                                      double delta = 0.0);

// Even polyomino made of the 3x3 blocks centered at the given B0 sites.
Polyomino block_polyomino(const std::vector<Site>& b0_centers, double spacing = 1.0);

// Default flat-neighborhood radius for a given spacing and feature size.
double default_delta(double eps, double feature_size);

// Union of the 3x3 blocks around B0 sites that fit inside the region, with
// the boundary straightened within delta of each marked point. Square {x, y}
// sits at eps * (x, y). Throws ResolutionTooCoarse when the topology or the
// Temperleyan conditions cannot be met at this spacing.
TemperleyanPolyomino discretize_region(const RegionSpec& spec, double eps,
                                       std::optional<double> delta = std::nullopt);

// Region documents (JSON). Arcs are sampled at a quarter of min(eps, resolution).
RegionSpec region_from_json(const std::string& text, double resolution = 1.0 / 256);
RegionSpec load_region(const std::string& path, double resolution = 1.0 / 256);
std::string region_to_json(const RegionSpec& spec);

// Common regions; the marked point of each component is the midpoint of its
// bottom side (the bottom of the disk).
RegionSpec rectangle_region(double x0, double y0, double x1, double y1);
RegionSpec disk_region(Point center, double radius, double resolution = 1.0 / 256);
RegionSpec square_annulus_region(double outer, double inner);

SiteGraph interior_dual(const TemperleyanPolyomino& tp);
SiteGraph interior_dual(const SquareSet& squares);
SiteGraph b0_prime_graph(const TemperleyanPolyomino& tp);
// Graph on B1 squares of the host plus d0, edges through host whites.
SiteGraph b1_dual_graph(const TemperleyanPolyomino& tp);

// Physical position of a square center / vertex.
inline Point position(const Site& s, double eps) { return {s.x * eps, s.y * eps}; }
inline Point position(const Vertex& v, double eps) {
  return {(v.x - 0.5) * eps, (v.y - 0.5) * eps};
}

// Run-length square list: one "y x_start x_end" triple per horizontal run.
std::string to_run_length(const SquareSet& squares);
std::vector<Site> from_run_length(const std::string& text);

// Convenience builders used by tests, experiments and the CLI.
// Even rectangle of squares [x0, x0+w) x [y0, y0+h); requires x0 even, y0 odd,
// w and h odd.
Polyomino even_rectangle(int x0, int y0, int w, int h, double spacing = 1.0);
// w x h rectangle with d0 on the bottom edge at column d0_x (or top if on_top).
TemperleyanPolyomino temperleyan_rectangle(int w, int h, int d0_x, bool on_top = false,
                                           double spacing = 1.0);
// Square ring with a centered square hole, d0 on the outer bottom edge and one
// exposed square on the hole's bottom edge. Sides are odd, hole_side >= 5 and
// (outer_side - hole_side) / 2 odd and at least 3.
TemperleyanPolyomino temperleyan_annulus(int outer_side, int hole_side,
                                         double spacing = 1.0);

}  // namespace dimer
