#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dimer/error.hpp"
#include "dimer/lattice.hpp"

using namespace dimer;

namespace {

double segment_distance(Point p, Point a, Point b) {
  const Point d = b - a;
  const double t = std::clamp(((p - a) * std::conj(d)).real() / std::norm(d), 0.0, 1.0);
  return std::abs(p - (a + t * d));
}

double distance_to_polyline(Point p, const std::vector<Point>& c) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i) best = std::min(best, segment_distance(p, c[i], c[(i + 1) % c.size()]));
  return best;
}

double distance_to_loop(Point p, const BoundaryLoop& loop, double eps) {
  double best = std::numeric_limits<double>::infinity();
  const auto& vs = loop.vertices;
  for (std::size_t i = 0; i < vs.size(); ++i)
    best = std::min(best, segment_distance(p, position(vs[i], eps), position(vs[(i + 1) % vs.size()], eps)));
  return best;
}

// Symmetric Hausdorff distance between a region component and a host loop,
// sampling the polyline at spacing eps / 4.
double hausdorff(const std::vector<Point>& c, const BoundaryLoop& loop, double eps) {
  double worst = 0.0;
  for (const auto& v : loop.vertices) worst = std::max(worst, distance_to_polyline(position(v, eps), c));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point a = c[i], b = c[(i + 1) % c.size()];
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / (eps / 4))));
    for (int k = 0; k < n; ++k) worst = std::max(worst, distance_to_loop(a + (b - a) * (double(k) / n), loop, eps));
  }
  return worst;
}

double signed_area(const std::vector<Point>& c) {
  double a = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point p = c[i], q = c[(i + 1) % c.size()];
    a += p.real() * q.imag() - q.real() * p.imag();
  }
  return a / 2;
}

}  // namespace

TEST_CASE("unit square discretizes to an even polyomino with d0 on the bottom") {
  const double eps = 1.0 / 16;
  const auto tp = discretize_region(rectangle_region(0, 0, 1, 1), eps);
  CHECK(validate_even(tp.base()));
  CHECK(tp.holes() == 0);
  const auto& box = tp.base().squares().box();
  // Odd sides; the B0 block centres fix the horizontal parity, so 13 x 15.
  CHECK(box.width == 13);
  CHECK(box.height == 15);
  CHECK(tp.base().squares().size() == 195);
  CHECK(tp.host().squares().size() == 194);
  CHECK(classify_square({box.x0, box.y0}) == SquareClass::B1);
  CHECK(classify_square(tp.d0()) == SquareClass::B1);
  CHECK(tp.d0().y == box.y0);
  CHECK(std::abs(tp.d0().x * eps - 0.5) <= 2 * eps);
  for (const auto& s : tp.base().squares().sites()) {
    const Point p = position(s, eps);
    CHECK(p.real() > 0);
    CHECK(p.real() < 1);
    CHECK(p.imag() > 0);
    CHECK(p.imag() < 1);
  }
}

TEST_CASE("square annulus gets one exposed B0 square touching one host square") {
  const auto tp = discretize_region(square_annulus_region(1.0, 0.375), 1.0 / 32);
  REQUIRE(tp.holes() == 1);
  const Site v = tp.exposed()[0];
  CHECK(classify_square(v) == SquareClass::B0);
  CHECK_FALSE(tp.base().squares().contains(v));
  CHECK(tp.host().squares().contains(v));
  int touching = 0;
  for (const Site d : {Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}})
    touching += tp.base().squares().contains(v + d);
  CHECK(touching == 1);
  CHECK(std::abs(v.x / 32.0) <= 4.0 / 32);
  CHECK(v.y < 0);
  CHECK(tp.host().loops().size() == 2);
}

TEST_CASE("too coarse a spacing is reported") {
  try {
    discretize_region(disk_region({0, 0}, 1.0), 0.5);
    FAIL("expected ResolutionTooCoarse");
  } catch (const DimerError& e) {
    CHECK(e.kind() == ErrorKind::ResolutionTooCoarse);
  }
  try {
    discretize_region(square_annulus_region(1.0, 0.5), 1.0 / 4);
    FAIL("expected ResolutionTooCoarse");
  } catch (const DimerError& e) {
    CHECK(e.kind() == ErrorKind::ResolutionTooCoarse);
  }
}

TEST_CASE("host boundary stays within a few spacings of the region boundary") {
  const auto disk = disk_region({0, 0}, 1.0);
  const auto ann = square_annulus_region(1.0, 0.375);
  for (double eps : {1.0 / 32, 1.0 / 64}) {
    const auto td = discretize_region(disk, eps);
    CHECK(hausdorff(disk.components[0], td.base().loops()[0], eps) <= 4 * eps);
    const auto ta = discretize_region(ann, eps);
    REQUIRE(ta.base().loops().size() == 2);
    CHECK(hausdorff(ann.components[0], ta.base().loops()[0], eps) <= 4 * eps);
    CHECK(hausdorff(ann.components[1], ta.base().loops()[1], eps) <= 4 * eps);
  }
}

TEST_CASE("boundary is straight near the marked point") {
  const double eps = 1.0 / 64;
  const auto tp = discretize_region(disk_region({0, 0}, 1.0), eps);
  const double half = tp.delta() / 2;
  REQUIRE(half >= eps);
  const int row = tp.d0().y - 1;  // vertex row under the d0 square
  int on_row = 0;
  for (const auto& v : tp.base().loops()[0].vertices) {
    const Point p = position(v, eps);
    if (std::abs(p.real()) <= half && p.imag() < -0.5) {
      CHECK(v.y == row + 1);
      ++on_row;
    }
  }
  CHECK(on_row >= static_cast<int>(2 * half / eps) - 1);
}

TEST_CASE("region documents round-trip and accept arcs and circles") {
  const std::string text = R"({
    "components": [
      [{"points": [[-1, 0], [1, 0]]}, {"arc": {"center": [0, 0], "radius": 1, "start": 0, "end": 3.141592653589793}}],
      {"circle": {"center": [0, 0.4], "radius": 0.2}}
    ],
    "marked_points": [[0, 0], [0, 0.2]],
    "probes": {"a": [0.5, 0.3]},
    "eps": 0.03125
  })";
  const auto spec = region_from_json(text, 1.0 / 64);
  REQUIRE(spec.components.size() == 2);
  CHECK(signed_area(spec.components[0]) > 0);
  CHECK(signed_area(spec.components[1]) < 0);
  CHECK(std::abs(signed_area(spec.components[0]) - std::numbers::pi / 2) < 1e-3);
  CHECK(std::abs(signed_area(spec.components[1]) + std::numbers::pi * 0.04) < 1e-3);
  REQUIRE(spec.eps);
  CHECK(*spec.eps == 1.0 / 32);
  REQUIRE(spec.probe_points.size() == 1);
  CHECK(spec.probe_points[0].first == "a");

  const auto again = region_from_json(region_to_json(spec));
  REQUIRE(again.components.size() == spec.components.size());
  for (std::size_t c = 0; c < spec.components.size(); ++c) {
    REQUIRE(again.components[c].size() == spec.components[c].size());
    for (std::size_t i = 0; i < spec.components[c].size(); ++i)
      CHECK(std::abs(again.components[c][i] - spec.components[c][i]) < 1e-12);
  }
  CHECK(again.marked_points.size() == 2);
  CHECK(again.eps == spec.eps);

  const auto tp = discretize_region(spec, *spec.eps);
  CHECK(tp.holes() == 1);
  CHECK(validate_even(tp.base()));

  CHECK_THROWS_AS(region_from_json("{\"components\": []}"), DimerError);
  CHECK_THROWS_AS(region_from_json("not json"), DimerError);
  CHECK_THROWS_AS(region_from_json(R"({"components": [[[0,0],[1,0]]]})"), DimerError);
}
