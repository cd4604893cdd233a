#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "dimer/moments.hpp"

using namespace dimer;

namespace {

constexpr double kPi = std::numbers::pi;

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DimerError& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Unsupported;
}

}  // namespace

TEST_CASE("two-point closed form") {
  CHECK(two_point_halfplane({0, 1}, {0, 2}) == doctest::Approx(8 / (kPi * kPi) * std::log(3.0)).epsilon(1e-14));
  CHECK(two_point_halfplane({0, 1}, {0, 2}) == doctest::Approx(0.8905).epsilon(1e-4));
  CHECK(two_point_halfplane({1, 1}, {-1, 1}) == doctest::Approx(0.2810).epsilon(1e-3));
  CHECK(two_point_halfplane({1, 1}, {-1, 1}) == doctest::Approx(8 / (kPi * kPi) * std::log(std::sqrt(2.0))));
  CHECK(two_point_halfplane({0.3, 0.7}, {-0.4, 1.3}) == doctest::Approx(two_point_halfplane({-0.4, 1.3}, {0.3, 0.7})));
  CHECK(kind_of([] { two_point_halfplane({0, 1}, {0, 1}); }) == ErrorKind::CoincidentPoints);
}

TEST_CASE("half-plane mean height closed form") {
  CHECK(halfplane_mean_height({0.3, 0.2}) == 0.5);
  CHECK(halfplane_mean_height(std::polar(1.0, kPi / 4), 0.0) == doctest::Approx(1.5));
  CHECK(halfplane_mean_height(std::polar(1.0, kPi / 2), 0.0) == doctest::Approx(2.5));
}

TEST_CASE("moment integral reproduces the two-point function") {
  const auto k = kernel_halfplane(KernelKind::FPlus);
  for (auto [p, q] : {std::pair<cplx, cplx>{{0, 1}, {0.5, 2}}, {{1, 1}, {-1, 1}}, {{0.2, 0.3}, {0.7, 0.5}}}) {
    const auto r = moment_integral(k, {segment_path(p.real(), p), segment_path(q.real(), q)});
    CHECK(std::abs(r.value.real() - two_point_halfplane(p, q)) < 1e-6);
    CHECK(std::abs(r.value.imag()) < 1e-6);
  }
  // One path: the zero-diagonal 1x1 determinant.
  CHECK(moment_integral(k, {segment_path(0.0, {0, 1})}).value == cplx(0, 0));
}

TEST_CASE("moment integral is unchanged by path deformation and Moebius transport") {
  const cplx p(0.1, 0.8), q(0.9, 0.5);
  const auto k = kernel_halfplane(KernelKind::FPlus);
  const auto straight = moment_integral(k, {segment_path(0.1, p), segment_path(0.9, q)}).value;
  const auto bent = moment_integral(k, {bezier_path(-0.3, {-0.4, 0.6}, p), polyline_path({1.4, {1.3, 0.4}, q})}).value;
  CHECK(std::abs(straight - bent) < 1e-6);
  // Disk picture: z -> i (1 + z) / (1 - z) maps the disk onto the half-plane.
  const Mobius to_half{cplx(0, 1), cplx(0, 1), -1, 1};
  const Mobius to_disk = to_half.inverse();
  const auto kd = mobius_transport(k, to_half, "disk");
  const auto on_disk =
      moment_integral(kd, {mobius_image(segment_path(0.1, p), to_disk), mobius_image(segment_path(0.9, q), to_disk)})
          .value;
  CHECK(std::abs(on_disk - straight) < 1e-6);
  const auto kd2 = kernel_disk(KernelKind::FPlus, 0.0);
  const auto on_disk2 =
      moment_integral(kd2, {mobius_image(segment_path(0.1, p), to_disk), mobius_image(segment_path(0.9, q), to_disk)})
          .value;
  CHECK(std::abs(on_disk2 - straight) < 1e-6);
}

TEST_CASE("moment integral rejects crossing paths") {
  const auto k = kernel_halfplane(KernelKind::FPlus);
  CHECK(kind_of([&] {
          moment_integral(k, {segment_path(-1.0, {1, 1}), segment_path(1.0, {-1, 1})});
        }) == ErrorKind::PathsIntersect);
  CHECK(kind_of([&] { moment_integral(k, {segment_path(0.0, {0, 1}), segment_path(0.0, {0, 2})}); }) ==
        ErrorKind::PathsIntersect);
}

TEST_CASE("mean height theory") {
  // Rectangle with d0' at the bottom centre: boundary values 1/2 + 2 theta / pi.
  const auto rect = rectangle_region(-1, 0, 1, 1);
  const MeanHeightTheory theory(rect, 200);
  CHECK(theory.boundary_value({0.5, 0}) == doctest::Approx(0.5));
  CHECK(theory.boundary_value({1, 0.5}) == doctest::Approx(1.5));
  CHECK(theory.boundary_value({0, 1}) == doctest::Approx(2.5));
  CHECK(theory.boundary_value({-1, 0.5}) == doctest::Approx(3.5));
  CHECK(theory.boundary_value({-0.5, 0}) == doctest::Approx(4.5));
  // Jump of 4 across d0'.
  CHECK(theory.boundary_value({-1e-6, 0}) - theory.boundary_value({1e-6, 0}) == doctest::Approx(4.0));
  // Mirror symmetry: u(x, y) + u(-x, y) = 5.
  for (const Point p : {Point(0.3, 0.2), Point(0.7, 0.6), Point(0.05, 0.9)})
    CHECK(theory(p) + theory({-p.real(), p.imag()}) == doctest::Approx(5.0).epsilon(2e-3));
  // Near d0' the half-plane form dominates.
  for (double a : {0.5, 1.0, 1.5, 2.5})
    CHECK(std::abs(theory(std::polar(0.05, a)) - halfplane_mean_height(std::polar(0.05, a), 0.0)) < 0.05);
  CHECK(kind_of([&] { theory({2, 0.5}); }) == ErrorKind::ProbeOutsideRegion);
  CHECK(kind_of([] { MeanHeightTheory(square_annulus_region(1, 0.4)); }) == ErrorKind::Unsupported);
  // Disk: harmonic extension is smooth; centre value by the mean value property
  // equals the boundary average 1/2 + 2.
  const auto disk = disk_region({0, 0}, 1.0, 1.0 / 64);
  CHECK(mean_height_theory(disk, {0, 0}, 200) == doctest::Approx(2.5).epsilon(5e-3));
}

TEST_CASE("mean height estimate matches theory on a small rectangle") {
  const double eps = 1.0 / 24;
  const auto spec = rectangle_region(-1, 0, 1, 1);
  const auto tp = discretize_region(spec, eps);
  const MeanHeightTheory theory(spec, 200);
  std::vector<Vertex> probes;
  for (Point p : {Point(0.3, 0.3), Point(-0.4, 0.5), Point(0.0, 0.6), Point(0.5, 0.7)})
    probes.push_back(nearest_vertex(p, eps));
  const auto est = mean_height_estimate(tp, probes, 2000, 11);
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const Point at((probes[k].x - 0.5) * eps, (probes[k].y - 0.5) * eps);
    CHECK(std::abs(est[k].estimate - theory(at)) < std::max(4 * est[k].std_error, 0.15));
  }
  // Thread count does not change results.
  const auto est2 = mean_height_estimate(tp, probes, 200, 5, 1);
  const auto est3 = mean_height_estimate(tp, probes, 200, 5, 3);
  for (std::size_t k = 0; k < probes.size(); ++k) CHECK(est2[k].estimate == est3[k].estimate);
}

TEST_CASE("boundary moments check mark parity and symmetry") {
  const auto tp = temperleyan_annulus(21, 7);
  const auto& hole = tp.host().loops()[1].vertices;
  Vertex mark{};
  bool found = false;
  for (const auto& v : hole)
    if (v.x % 2 == 0 && (v.y % 2 + 2) % 2 == 1) {
      mark = v;
      found = true;
      break;
    }
  REQUIRE(found);
  const auto var = boundary_moment_estimate(tp, {mark}, {2}, 2000, 3);
  CHECK(var.estimate > 0);
  const auto mean = boundary_moment_estimate(tp, {mark}, {1}, 2000, 3);
  CHECK(std::abs(mean.estimate) < 1e-9);
  CHECK(kind_of([&] { boundary_moment_estimate(tp, {{mark.x + 1, mark.y}}, {2}, 10, 1); }) ==
        ErrorKind::BadMarkParity);
}

TEST_CASE("odd boundary moments fade as the spacing shrinks") {
  // No Temperleyan annulus is exactly mirror-symmetric (d0 has even x, the
  // exposed square odd x), so the skewness vanishes only in the limit.
  auto skew = [](double eps) {
    const auto tp = discretize_region(square_annulus_region(1.0, 0.375), eps);
    for (const auto& v : tp.host().loops()[1].vertices)
      if (v.x % 2 == 0 && (v.y % 2 + 2) % 2 == 1) {
        const auto m2 = boundary_moment_estimate(tp, {v}, {2}, 2000, 4);
        const auto m3 = boundary_moment_estimate(tp, {v}, {3}, 2000, 4);
        return m3.estimate / std::pow(m2.estimate, 1.5);
      }
    FAIL("no mark");
    return 0.0;
  };
  const double coarse = skew(1.0 / 16), fine = skew(1.0 / 64);
  CHECK(std::abs(fine) < std::abs(coarse) - 0.1);
}

TEST_CASE("separating cycles") {
  const auto tp = temperleyan_annulus(21, 7);
  const TemperleyMap map(tp);
  const auto t = map.sample(1, 0);
  CHECK(separating_cycles(t, t, tp) == 0);
  for (int i = 0; i < 20; ++i) CHECK(separating_cycles(map.sample(2, 2 * i), map.sample(2, 2 * i + 1), tp) >= 0);
  CHECK(kind_of([] {
          const auto r = temperleyan_rectangle(5, 5, 2);
          cycle_statistics(r, 2, 1);
        }) == ErrorKind::NotAnnular);
  const auto rep = cycle_statistics(tp, 500, 9);
  CHECK(rep.cycles.estimate > 0);
  std::size_t total = 0;
  for (auto c : rep.histogram) total += c;
  CHECK(total == 500);
}

TEST_CASE("report serialization") {
  auto r = summarize({1, 2, 3, 4}, "x");
  CHECK(r.estimate == 2.5);
  CHECK(r.std_error == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
  r.theory = 2.0;
  std::ostringstream csv;
  write_reports_csv(csv, {r});
  CHECK(csv.str().find("x,2.5,") != std::string::npos);
  CHECK(to_json(r)["theory"] == 2.0);
}
