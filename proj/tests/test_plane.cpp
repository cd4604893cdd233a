#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "dimer/plane.hpp"
#include "dimer/height.hpp"

using namespace dimer;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Site> blacks_within(double radius) {
  std::vector<Site> out;
  const int r = static_cast<int>(radius);
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x)
      if (is_black({x, y}) && std::hypot(x, y) <= radius) out.push_back({x, y});
  return out;
}

}  // namespace

TEST_CASE("potential kernel closed forms") {
  CHECK(potential_kernel(0, 0) == 0.0);
  CHECK(potential_kernel(1, 0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(potential_kernel(0, -1) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(potential_kernel(1, 1) == doctest::Approx(4 / kPi).epsilon(1e-13));
  CHECK(potential_kernel(2, 0) == doctest::Approx(4 - 8 / kPi).epsilon(1e-13));
  CHECK(potential_kernel(2, 2) == doctest::Approx(16 / (3 * kPi)).epsilon(1e-13));
  // Harmonic away from the origin: 4a(x) - sum of neighbours = 0.
  for (const Site x : {Site{3, 1}, Site{7, -4}, Site{0, 12}}) {
    const double lap = 4 * potential_kernel(x.x, x.y) - potential_kernel(x.x + 1, x.y) -
                       potential_kernel(x.x - 1, x.y) - potential_kernel(x.x, x.y + 1) -
                       potential_kernel(x.x, x.y - 1);
    CHECK(std::abs(lap) < 1e-12);
  }
}

TEST_CASE("C0 color structure, rotation and known values") {
  CHECK(c0_value({2, 0}) == cplx(0, 0));
  CHECK(c0_value({0, 0}) == cplx(0, 0));
  CHECK(std::abs(c0_value({1, 0}) - 0.25) < 1e-12);
  for (const auto& z : blacks_within(9)) {
    const cplx c = c0_value(z);
    if (classify_square(z) == SquareClass::B0)
      CHECK(c.imag() == 0.0);
    else
      CHECK(c.real() == 0.0);
    CHECK(std::abs(c0_value({-z.y, z.x}) - cplx(0, -1) * c) < 1e-14);
  }
}

TEST_CASE("Fourier and Green's function routes agree") {
  for (const auto& z : blacks_within(15)) CHECK(std::abs(c0_value(z) - c0_from_green(z)) < 1e-11);
  for (const Site z : {Site{101, 0}, Site{31, 40}, Site{-60, 77}})
    CHECK(std::abs(c0_value(z) - c0_from_green(z)) < 1e-11);
}

TEST_CASE("quadrature agrees with the finite-square extrapolation") {
  const auto pts = blacks_within(6);
  const auto ext = square_coupling_extrapolated(pts, {32, 64, 128});
  double worst = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, std::abs(ext[i] - c0_value(pts[i])));
  MESSAGE("max |quadrature - extrapolation| for |z| <= 6: " << worst);
  CHECK(worst < 1e-6);
}

TEST_CASE("finite squares converge monotonically") {
  const auto pts = blacks_within(6);
  double previous = 1e9;
  for (int n : {32, 64, 128}) {
    const auto sq = square_coupling(n, pts);
    double worst = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, std::abs(sq[i] - c0_value(pts[i])));
    CHECK(worst < previous);
    previous = worst;
  }
}

TEST_CASE("column sums along x = 1") {
  // Over all k the column sums to 1/2; the k >= 1 half is (1/2 - 1/4) / 2.
  double upper = 0;
  for (int k = 1; k <= 10000; ++k) upper += c0_value({1, 2 * k}).real();
  CHECK(c0_value({1, -4}) == c0_value({1, 4}));
  CHECK(std::abs(upper - 0.125) < 1e-4);
  CHECK(std::abs(c0_value({1, 0}).real() + 2 * upper - 0.5) < 1e-4);
}

TEST_CASE("asymptotic deficit") {
  for (const Site z : {Site{7, 4}, Site{21, -10}, Site{51, 0}})
    CHECK(c0_asymptotic_deficit(z) == doctest::Approx(c0_asymptotic_deficit({-z.y, z.x})).epsilon(1e-10));
  // Bounded by C / |z|^2.
  for (int r : {11, 21, 51, 101, 201}) CHECK(c0_asymptotic_deficit({r, 0}) * r * r < 0.1);
}

TEST_CASE("Green's function differences") {
  CHECK(g0_difference({3, 4}, {3, 4}) == 0.0);
  CHECK(g0_difference({3, 4}, {10, -1}) == doctest::Approx(-g0_difference({10, -1}, {3, 4})));
  CHECK(std::abs(g0_difference({10, 0}, {20, 0}) + std::log(0.5) / (2 * kPi)) < 2e-3);
  // Re C0(0, w) = G0((w-1)/2) - G0((w+1)/2) with the Fourier route on the left.
  for (const auto& w : blacks_within(12)) {
    if (classify_square(w) != SquareClass::B0) continue;
    const double g = g0_difference({(w.x - 1) / 2, w.y / 2}, {(w.x + 1) / 2, w.y / 2});
    CHECK(std::abs(c0_value(w).real() - g) < 1e-8);
  }
  const auto fit = c0_constant();
  const double exact = -(2 * std::numbers::egamma + std::log(8.0)) / (4 * kPi);
  CHECK(std::abs(fit.value - exact) < 1e-8);
  CHECK(fit.error < 1e-8);
}

TEST_CASE("half-plane coupling") {
  // Source on the reflection axis: the images cancel.
  CHECK(std::abs(half_plane_coupling({4, 0}, {5, 2})) == 0.0);
  // K C_H = delta in a window above the axis.
  for (const Site v1 : {Site{0, 2}, Site{1, 3}}) {
    for (int y = 1; y <= 8; ++y)
      for (int x = -6; x <= 6; ++x) {
        const Site w{x, y};
        if (!is_white(w)) continue;
        cplx s = 0;
        for (const Site d : {Site{1, 0}, Site{0, 1}, Site{-1, 0}, Site{0, -1}})
          s += kasteleyn_weight(w, w + d) * half_plane_coupling(v1, w + d);
        CHECK(std::abs(s - (w == v1 ? 1.0 : 0.0)) < 1e-11);
      }
  }
  // W0 source: O(d) decay matching the two-pole formula.
  const Site v1{0, 2};
  const cplx p1(v1.x, v1.y), q1(v1.x, -v1.y);
  for (int r : {20, 40, 80}) {
    const Site v2{r + 1, r};
    const cplx p2(v2.x, v2.y);
    const cplx f = (p1 - q1) / (kPi * (p2 - p1) * (p2 - q1));
    const cplx proj = classify_square(v2) == SquareClass::B0 ? cplx(f.real(), 0) : cplx(0, f.imag());
    const double d = std::abs(p2 - p1);
    CHECK(std::abs(half_plane_coupling(v1, v2) - proj) * d * d < 1.0);
  }
  // W1 source: no decay to zero near the axis.
  CHECK(std::abs(half_plane_coupling({1, 1}, {1, 2})) > 0.1);
}

TEST_CASE("coupling cache round trip") {
  PlaneCoupling pc;
  const cplx a = pc.value({1, 2});
  const cplx b = pc.value({2, 3});
  CHECK(pc.size() == 2);
  const std::string path = "test_plane_cache.json";
  pc.save(path);
  PlaneCoupling again;
  again.load(path);
  CHECK(again.size() == 2);
  CHECK(again.value({1, 2}) == a);
  CHECK(again.value({2, 3}) == b);
  std::remove(path.c_str());
}

TEST_CASE("half-plane coupling matches a wide finite rectangle near its bottom edge") {
  // 601 x 301 rectangle with d0 on the top edge; columns shifted so x = 300 is 0.
  const auto tp = temperleyan_rectangle(601, 301, 300, true);
  const auto ks = build_kasteleyn(interior_dual(tp));
  for (const Site v1 : {Site{300, 2}, Site{301, 1}}) {
    const auto c = solve_coupling(ks, v1);
    double worst = 0;
    for (int y = 1; y <= 12; ++y)
      for (int x = 290; x <= 310; ++x) {
        const Site b{x, y};
        if (!is_black(b)) continue;
        const cplx h = half_plane_coupling({v1.x - 300, v1.y}, {x - 300, y});
        worst = std::max(worst, std::abs(c.values[ks.graph().index_of(b)] - h));
      }
    CHECK(worst < 1e-3);
  }
}
