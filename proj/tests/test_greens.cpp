#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dimer/greens.hpp"
#include "dimer/plane.hpp"

using namespace dimer;

namespace {

constexpr double kPi = std::numbers::pi;

// Interior B0' graph of an n x n block of B0 sites ringed by Y.
SiteGraph b0_grid(int n) {
  std::vector<Site> centers;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) centers.push_back({2 * i + 1, 2 * j});
  const auto p = block_polyomino(centers);
  Site d0{0, -1};
  return b0_prime_graph(make_temperleyan(p, d0, {}));
}

double max_column_diff(const CouplingColumn& a, const CouplingColumn& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  return worst;
}

TemperleyanPolyomino three_by_three_minus_corner() {
  return make_temperleyan(block_polyomino({{1, 0}}), {0, -1}, {});
}

}  // namespace

TEST_CASE("single interior vertex with four boundary neighbours") {
  const auto g = b0_prime_graph(three_by_three_minus_corner());
  // The centre B0 square of a single block: 1 unknown, 4 Y neighbours.
  const auto f = dirichlet_green(g, {1, 0});
  CHECK(f.values[g.index_of({1, 0})] == doctest::Approx(0.25).epsilon(1e-14));
  for (std::size_t v = 0; v < g.size(); ++v)
    if (g.boundary[v]) CHECK(f.values[v] == 0.0);
}

TEST_CASE("Green's function: Laplacian, positivity and symmetry on a 20x20 grid") {
  const auto g = b0_grid(20);
  const GreenSolver solver(g);
  std::mt19937 rng(7);
  std::vector<int> interior;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!g.boundary[v] && !g.exposed[v]) interior.push_back(static_cast<int>(v));
  REQUIRE(interior.size() == 400);
  std::uniform_int_distribution<std::size_t> pick(0, interior.size() - 1);
  int negative = 0;
  double worst_lap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int s = interior[pick(rng)];
    const auto f = solver.green(g.vertices[s]);
    for (int v : interior) negative += !(f.values[v] > 0);
    if (trial < 20) {
      const auto lap = laplacian_apply(f.values, g);
      for (int v : interior) worst_lap = std::max(worst_lap, std::abs(lap[v] - (v == s ? 1.0 : 0.0)));
    }
  }
  CHECK(negative == 0);
  CHECK(worst_lap < 1e-10);
  double asym = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int a = interior[pick(rng)], b = interior[pick(rng)];
    asym = std::max(asym, std::abs(solver.green(g.vertices[a]).values[b] - solver.green(g.vertices[b]).values[a]));
  }
  CHECK(asym < 1e-10);
}

TEST_CASE("Green's function with the source on the exposed set") {
  const auto tp = temperleyan_annulus(21, 7);
  const GreenSolver solver(tp);
  const auto& g = solver.graph();
  const Site d = tp.exposed()[0];
  const auto f = solver.green(d);
  const auto lap = laplacian_apply(f.values, g);
  double worst = 0.0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.boundary[v]) {
      CHECK(f.values[v] == 0.0);
      continue;
    }
    worst = std::max(worst, std::abs(lap[v] - (g.vertices[v] == d ? 1.0 : 0.0)));
    CHECK(f.values[v] > 0);
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("disconnected B0' component throws") {
  SiteGraph g = b0_grid(3);
  for (auto& b : g.boundary) b = 0;
  CHECK_THROWS_AS(GreenSolver{g}, DimerError);
}

TEST_CASE("outflows conserve current") {
  SUBCASE("simply connected host, unit source") {
    const auto tp = temperleyan_rectangle(15, 11, 6);
    const GreenSolver solver(tp);
    REQUIRE(solver.components() == 1);
    const auto f = solver.green({5, 4});
    CHECK(flux_out_of_component(solver, f, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("annulus: a source next to the hole sends more current into it") {
    const auto tp = temperleyan_annulus(21, 7);
    const GreenSolver solver(tp);
    REQUIRE(solver.components() == 2);
    // The hole spans squares 7..13; B0 squares at x = 5 sit one white away.
    const auto f = solver.green({5, 12});
    const auto out = solver.outflows(f.values);
    CHECK(out[0] + out[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out[1] > out[0]);
    // Exposed source: everything injected leaves, so the net outflow is zero.
    const auto fd = solver.green(tp.exposed()[0]);
    const auto od = solver.outflows(fd.values);
    CHECK(std::abs(od[0] + od[1]) < 1e-12);
  }
  SUBCASE("dipole: total outflow zero") {
    const auto tp = temperleyan_annulus(21, 7);
    const GreenSolver solver(tp);
    const auto a = solver.green({3, 6}), b = solver.green({1, 6});
    std::vector<double> d(a.values.size());
    for (std::size_t v = 0; v < d.size(); ++v) d[v] = a.values[v] - b.values[v];
    const auto out = solver.outflows(d);
    CHECK(std::abs(out[0] + out[1]) < 1e-12);
  }
}

TEST_CASE("solve_alpha") {
  SUBCASE("simply connected: no currents") {
    const auto tp = temperleyan_rectangle(9, 7, 4);
    CHECK(solve_alpha(tp, {4, 4}).alpha.empty());
  }
  SUBCASE("flux matrix is diagonally dominant with the determinant bound") {
    for (auto tp : {temperleyan_annulus(11, 5), temperleyan_annulus(21, 7), temperleyan_annulus(31, 9)}) {
      const auto sol = solve_alpha(tp, {2, 6});
      REQUIRE(sol.alpha.size() == 1);
      CHECK(sol.system.matrix(0, 0) < 0);
      CHECK(sol.system.gap > 0);
      // One hole: det(-Phi) = |Phi_11| = gap, so the bound holds for every delta below it.
      CHECK(sol.system.determinant >= sol.system.gap * (1 - 1e-12));
    }
  }
  SUBCASE("mirror-image sources get opposite currents") {
    // The B0' graph of this annulus, with its exposed square at x = 11, is
    // symmetric under x -> 22 - x, which flips the sign of a W0 dipole.
    const auto tp = temperleyan_annulus(23, 9);
    REQUIRE(tp.exposed()[0].x == 11);
    const GreenSolver solver(tp);
    for (const Site v : {Site{4, 12}, Site{2, 2}, Site{6, 20}}) {
      const auto a = solve_alpha(solver, tp, v).alpha[0];
      const auto b = solve_alpha(solver, tp, {22 - v.x, v.y}).alpha[0];
      CHECK(std::abs(a) > 1e-6);
      CHECK(std::abs(a + b) < 1e-12);
    }
  }
}

TEST_CASE("coupling_from_green agrees with the Kasteleyn solve") {
  SUBCASE("3x3 minus corner") {
    const auto tp = three_by_three_minus_corner();
    const auto ks = build_kasteleyn(interior_dual(tp));
    for (const Site v : {Site{0, 0}, Site{2, 0}, Site{1, 1}, Site{1, -1}, Site{0, 2}, Site{2, 2}}) {
      if (!tp.host().squares().contains(v)) continue;
      CHECK(max_column_diff(coupling_from_green(tp, v), solve_coupling(ks, v)) < 1e-9);
    }
  }
  SUBCASE("rectangle") {
    const auto tp = temperleyan_rectangle(13, 9, 6);
    const auto ks = build_kasteleyn(interior_dual(tp));
    for (const Site v : {Site{4, 4}, Site{5, 5}, Site{0, 2}, Site{12, 8}})
      CHECK(max_column_diff(coupling_from_green(tp, v), solve_coupling(ks, v)) < 1e-9);
  }
  SUBCASE("square annulus about 20x20") {
    const auto tp = temperleyan_annulus(21, 7);
    const auto ks = build_kasteleyn(interior_dual(tp));
    const GreenSolver solver(tp);
    // Every white, including those whose dipole reaches into the hole or onto
    // the exposed square.
    for (const Site v : interior_dual(tp).vertices) {
      if (!is_white(v)) continue;
      const auto r = coupling_from_green_report(solver, tp, v);
      CHECK(max_column_diff(r.column, solve_coupling(ks, v)) < 1e-8);
      CHECK(r.conjugate_residual < 1e-9);
      CHECK(std::abs(r.hole_periods[0]) < 1e-9);
    }
  }
}

TEST_CASE("without the hole currents the conjugate is multivalued") {
  const auto tp = temperleyan_annulus(21, 7);
  const GreenSolver solver(tp);
  const auto r = coupling_from_green_report(solver, tp, {2, 6}, false);
  CHECK(r.conjugate_residual > 1e-3);
  CHECK(std::abs(r.hole_periods[0]) > 1e-3);
}

TEST_CASE("Re C vanishes next to Y for W0 sources") {
  // Lemma: C extends by zero to Y and stays harmonic, so Re C on B0 is the
  // Dirichlet potential; check the d-bar equation holds with Y values 0.
  const auto tp = temperleyan_rectangle(11, 9, 4);
  const auto col = coupling_from_green(tp, {4, 4});
  const auto m = interior_dual(tp);
  const auto g = b0_prime_graph(tp);
  std::vector<double> re(g.size(), 0.0);
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!g.boundary[v]) re[v] = col.values[m.index_of(g.vertices[v])].real();
  const auto lap = laplacian_apply(re, g);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.boundary[v]) continue;
    const Site s = g.vertices[v];
    const double expect = s == Site{5, 4} ? 1.0 : s == Site{3, 4} ? -1.0 : 0.0;
    CHECK(lap[v] == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("half-plane kernels") {
  const auto fp = kernel_halfplane(KernelKind::FPlus);
  const cplx v = fp({0, 1}, {0, 2});
  CHECK(std::abs(v - cplx(0, -2 / kPi)) < 1e-14);
  const auto f0 = kernel_halfplane(KernelKind::F0);
  const auto f1 = kernel_halfplane(KernelKind::F1);
  for (double x : {-3.0, -0.2, 0.7, 5.0}) {
    CHECK(std::abs(f0({0.3, 1.1}, {x, 0}).real()) < 1e-14);
    CHECK(std::abs(f1({0.3, 1.1}, {x, 0}).imag()) < 1e-14);
  }
  // d0 at 0.
  const auto fp0 = kernel_halfplane(KernelKind::FPlus, 0.0);
  const auto fs0 = kernel_halfplane(KernelKind::FPlusStar, 0.0);
  for (const cplx z1 : {cplx(0.2, 0.9), cplx(-1.3, 0.4)}) {
    const cplx z2(0.5, 1.7);
    CHECK(std::abs(fp0(z1, z2) - 2.0 * z2 / (kPi * z1 * (z2 - z1))) < 1e-12);
    CHECK(std::abs(fs0(z1, z1 + cplx(1e-5, 0)) - 2.0 / (kPi * z1)) < 1e-3);
    // Both vanish at d0 = 0 and have F0 real part zero on the axis.
    CHECK(std::abs(fp0.as(KernelKind::F0)(z1, {1e-9, 0})) < 1e-6);
    CHECK(std::abs(fp0.as(KernelKind::F0)(z1, {2.5, 0}).real()) < 1e-12);
    CHECK(std::abs(fp0.as(KernelKind::F1)(z1, {2.5, 0}).imag()) < 1e-12);
  }
}

TEST_CASE("Mobius transport") {
  const auto k = kernel_halfplane(KernelKind::FPlus, 0.3);
  const cplx z1(0.1, 0.8), z2(-0.6, 1.9);
  const auto same = mobius_transport(k, Mobius{});
  CHECK(std::abs(same(z1, z2) - k(z1, z2)) < 1e-14);
  // f(z) = 2z + 1 and its inverse preserve the half-plane.
  const Mobius f{2, 1, 0, 1};
  const auto there_and_back = mobius_transport(mobius_transport(k, f), f.inverse());
  for (auto kind : {KernelKind::F0, KernelKind::F1, KernelKind::FMinus})
    CHECK(std::abs(there_and_back.as(kind)(z1, z2) - k.as(kind)(z1, z2)) < 1e-12);
  CHECK(std::abs(f.compose(f.inverse())(z1) - z1) < 1e-14);
  // Disk kernels: boundary conditions and the pole.
  const auto d0 = kernel_disk(KernelKind::F0, 0.4);
  const auto d1 = d0.as(KernelKind::F1);
  for (double t : {1.0, 2.0, 4.0}) {
    const cplx b = std::polar(1.0, t), a(0.2, -0.3);
    CHECK(std::abs(d0(a, b).real()) < 1e-12);
    CHECK(std::abs(d1(a, b).imag()) < 1e-12);
  }
  CHECK(std::abs(d0({0.1, 0.1}, std::polar(1.0, 0.4) * (1 - 1e-9))) < 1e-6);
  const cplx a(0.2, -0.3);
  CHECK(std::abs(d0.as(KernelKind::F0Star)(a, a + 1e-4) - d0.as(KernelKind::F0Star)(a, a + 2e-4)) < 1e-3);
}

TEST_CASE("lattice Green's function derivatives converge to the continuum ones") {
  const ProbePair probe{{0.1, 0.4}, {0.5, 0.9}};
  const auto h = green_derivative_check_halfplane(1.0 / 128, probe);
  CHECK(h.relative_error_x() < 0.02);
  CHECK(h.relative_error_y() < 0.02);
  CHECK(h.relative_error_boundary() < 0.02);
  CHECK(h.form_mismatch < 1e-12);
  const auto d = green_derivative_check_disk(1.0 / 128, {{0.1, -0.2}, {-0.3, 0.4}});
  CHECK(d.relative_error_x() < 0.02);
  CHECK(d.relative_error_y() < 0.02);
  CHECK(d.form_mismatch < 1e-12);
  MESSAGE("half-plane dx " << h.relative_error_x() << " dy " << h.relative_error_y() << " boundary "
                           << h.relative_error_boundary() << "; disk dx " << d.relative_error_x() << " dy "
                           << d.relative_error_y());
}

namespace {

std::vector<KernelHost> disk_hosts(std::initializer_list<double> eps) {
  const auto spec = disk_region({0, 0}, 1.0, 1.0 / 256);
  std::vector<KernelHost> hosts;
  for (double e : eps) hosts.push_back({e, discretize_region(spec, e)});
  return hosts;
}

}  // namespace

TEST_CASE("numeric kernels on the disk converge to the transported closed form at first order") {
  const auto hosts = disk_hosts({1.0 / 32, 1.0 / 64, 1.0 / 128});
  const std::vector<ProbePair> probes{{{0.125, 0.25}, {-0.25, -0.125}}, {{0.0, 0.25}, {0.5, 0.25}}};
  for (auto kind : {KernelKind::F0Star, KernelKind::F1Star}) {
    const auto t = kernel_numeric(hosts, kind, probes);
    const auto exact = kernel_disk(kind, -kPi / 2);
    REQUIRE(t.values.size() == 3);
    for (std::size_t k = 0; k < probes.size(); ++k) {
      const cplx f = exact(probes[k].z1, probes[k].z2);
      const double e1 = std::abs(t.values[1][k] - f), e2 = std::abs(t.values[2][k] - f);
      CHECK(e2 / e1 > 0.3);
      CHECK(e2 / e1 < 0.7);
      CHECK(t.ratio[k] > 0.2);
      CHECK(t.ratio[k] < 0.8);
      CHECK(std::abs(t.extrapolated[k] - f) < 0.5 * e2);
    }
  }
}

TEST_CASE("numeric kernels reject probes near the boundary and unstarred-only kinds") {
  const auto hosts = disk_hosts({1.0 / 16});
  const std::vector<ProbePair> near{{{0.6, -0.6}, {0.0, 0.2}}};
  CHECK_THROWS_AS(kernel_numeric(hosts, KernelKind::F0Star, near), DimerError);
  try {
    kernel_numeric(hosts, KernelKind::F0Star, near);
  } catch (const DimerError& e) {
    CHECK(e.kind() == ErrorKind::ProbesTooCloseToBoundary);
  }
  CHECK_NOTHROW(kernel_numeric(hosts, KernelKind::F0Star, near, 0.05));
  CHECK_THROWS_AS(kernel_numeric(hosts, KernelKind::FPlus, {{{0, 0}, {0.2, 0.2}}}), DimerError);
}
