#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "dimer/height.hpp"
#include "dimer/lattice.hpp"

namespace dimer {

// Domino list: header "white_x,white_y,black_x,black_y", one row per domino in
// row-major order of the white square.
void write_tiling_csv(std::ostream& out, const Tiling& t);
// Reads a domino list. The host is the set of listed squares unless given.
// Throws ConfigParse on malformed rows and ForestHostMismatch if the pairs are
// not a perfect matching of adjacent squares.
Tiling read_tiling_csv(std::istream& in, std::shared_ptr<const SquareSet> host = nullptr);

struct SvgOptions {
  double scale = 12.0;  // pixels per lattice square
  // Arrows from each B0 square through its partner to the next B0 square
  // (the spanning forest) and likewise for B1 squares (the dual tree).
  bool forest = false;
  bool dual_tree = false;
  const Tiling* overlay = nullptr;            // second tiling: draw the double-dimer cycles
  const TemperleyanPolyomino* host = nullptr;  // marks d0 and the exposed squares
};

// Element classes: "domino horizontal" / "domino vertical" rectangles,
// "forest" and "dual-tree" arrow lines, "cycle-a" / "cycle-b" / "doubled"
// overlay segments, "d0" and "exposed" square outlines. Output is a pure
// function of the inputs.
std::string render_svg(const Tiling& t, const SvgOptions& options = {});

}  // namespace dimer
