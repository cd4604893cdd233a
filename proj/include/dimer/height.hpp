#pragma once

#include <climits>
#include <memory>
#include <ostream>
#include <utility>
#include <vector>

#include "dimer/lattice.hpp"

namespace dimer {

// Perfect matching of a host square set. partner[i] is the index of the
// square matched with square i (indices into host->sites()).
struct Tiling {
  std::shared_ptr<const SquareSet> host;
  std::vector<int> partner;

  std::size_t size() const { return partner.size(); }
  // (white, black) pairs in row-major order of the white square.
  std::vector<std::pair<Site, Site>> dominoes() const;
  bool matched(const Site& a, const Site& b) const;
};

Tiling make_tiling(std::shared_ptr<const SquareSet> host,
                   const std::vector<std::pair<Site, Site>>& dominoes);
// Throws ForestHostMismatch if the pairs do not form a perfect matching of
// adjacent squares.
void validate_tiling(const Tiling& t);

// Dense integer field over the vertices touching the host.
struct HeightField {
  static constexpr int kMissing = INT_MIN;

  GridBox box;  // vertex coordinates
  std::vector<int> values;
  Vertex base;
  int base_value = 0;

  bool has(const Vertex& v) const {
    return box.contains(v.x, v.y) && values[box.linear(v.x, v.y)] != kMissing;
  }
  int at(const Vertex& v) const { return values[box.linear(v.x, v.y)]; }
};

// Height increment along the unit edge a->b given which squares are paired.
// The square on the left of the step decides the sign: black gives +1, white
// -1; a domino straddling the edge flips that to -3 / +3.
int edge_height_step(const Vertex& a, const Vertex& b, bool crossed);
// Squares to the left and right of the unit step a->b.
std::pair<Site, Site> edge_sides(const Vertex& a, const Vertex& b);

HeightField height_field(const Tiling& t, const Vertex& base, int base_value);

// Canonical gauge for a Temperleyan host: the d0-adjacent boundary vertex with
// the smallest coordinates, valued so that the alternating boundary pair just
// counterclockwise of d0 is {0, 1}.
std::pair<Vertex, int> canonical_gauge(const TemperleyanPolyomino& tp);
HeightField height_field(const Tiling& t, const TemperleyanPolyomino& tp);

// Boundary heights per host loop, aligned with loop vertices. The outer loop is
// fixed by (base, base_value); each hole is fixed up to a multiple of 4 and is
// reported with its first vertex in [0, 4).
std::vector<std::vector<int>> boundary_heights(const Polyomino& host, const Vertex& base,
                                               int base_value);
std::vector<std::vector<int>> boundary_heights(const TemperleyanPolyomino& tp,
                                               const Vertex& base, int base_value);

// h(end) - h(start) along a lattice path of unit steps inside the host.
int height_change_along_path(const HeightField& h, const SquareSet& host,
                             const std::vector<Vertex>& path);

// Heights on the interior faces of the dual graph (lattice vertices with all
// four squares in the host), built from the dual-edge rule alone. Gauge: the
// first face in row-major order is 0.
HeightField face_height_field(const Tiling& t);

// Tilability test from boundary heights. A directed distance with cost +1 for
// steps with black on the left and +3 with white on the left (boundary steps
// pinned to their fixed value) must not undercut any boundary height.
bool fournier_check(const Polyomino& host);
bool fournier_check(const TemperleyanPolyomino& tp);

void write_height_csv(std::ostream& out, const HeightField& h, double eps = 1.0);

}  // namespace dimer
