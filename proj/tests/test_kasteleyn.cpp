#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dimer/kasteleyn.hpp"
#include "oracles.hpp"

using namespace dimer;

namespace {

std::vector<Site> rect(int x0, int y0, int w, int h) {
  std::vector<Site> v;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) v.push_back({x, y});
  return v;
}

TemperleyanPolyomino three_minus_corner() {
  return make_temperleyan(block_polyomino({{1, 0}}), {0, -1}, {});
}

std::uint64_t count(const SquareSet& s) {
  return *count_tilings(build_kasteleyn(interior_dual(s))).exact;
}

}  // namespace

TEST_CASE("weights satisfy the product rule around every lattice vertex") {
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) {
      // Squares around vertex {i,j} in counterclockwise order.
      const Site s[4] = {{i - 1, j - 1}, {i, j - 1}, {i, j}, {i - 1, j}};
      cplx w[4];
      for (int k = 0; k < 4; ++k) {
        const Site a = s[k], b = s[(k + 1) % 4];
        w[k] = is_white(a) ? kasteleyn_weight(a, b) : kasteleyn_weight(b, a);
      }
      CHECK(std::abs(w[0] * w[2] + w[1] * w[3]) < 1e-15);
    }
}

TEST_CASE("count_tilings examples") {
  CHECK(count(SquareSet({{0, 0}, {1, 0}})) == 1);
  CHECK(count(SquareSet(rect(0, 0, 2, 2))) == 2);
  CHECK(count(SquareSet(rect(0, 0, 2, 3))) == 3);
  CHECK(count(three_minus_corner().host().squares()) == 4);
  const auto five = make_temperleyan(block_polyomino({{1, 0}, {3, 0}, {1, 2}, {3, 2}}), {0, -1}, {});
  CHECK(five.host().squares().size() == 24);
  CHECK(count(five.host().squares()) == 192);
  const auto ks = build_kasteleyn(interior_dual(SquareSet(rect(0, 0, 2, 2))));
  CHECK(std::exp(2 * ks.log_abs_det()) == doctest::Approx(4.0));
  // Ring of 12 squares around a 2x2 hole.
  std::vector<Site> ring;
  for (const auto& s : rect(0, 0, 4, 4))
    if (!(s.x >= 1 && s.x <= 2 && s.y >= 1 && s.y <= 2)) ring.push_back(s);
  CHECK(count(SquareSet(ring)) == 2);
  CHECK(count(SquareSet(ring)) == oracle::count_matchings(SquareSet(ring)));
  // Untilable but balanced.
  CHECK(count(SquareSet({{0, 1}, {1, 0}, {1, 1}, {2, 1}, {2, 2}, {3, 1}})) == 0);
  CHECK_THROWS_AS(build_kasteleyn(interior_dual(SquareSet({{0, 0}}))), DimerError);
}

TEST_CASE("|det A| equals the enumerated count on random simply connected hosts") {
  std::mt19937_64 rng(5);
  int tested = 0;
  for (int trial = 0; trial < 5000 && tested < 300; ++trial) {
    std::vector<Site> sites;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x)
        if (rng() % 10 < 8) sites.push_back({x, y});
    try {
      const Polyomino p(sites);
      if (p.loops().size() != 1) continue;
      int black = 0;
      for (const auto& s : p.squares().sites()) black += is_black(s);
      if (2 * black != static_cast<int>(p.squares().size())) continue;
      CHECK(count(p.squares()) == oracle::count_matchings(p.squares()));
      ++tested;
    } catch (const DimerError&) {
    }
  }
  CHECK(tested >= 100);
}

TEST_CASE("A^H A is the Laplacian on both black sublattices in the bulk") {
  const SquareSet s(rect(0, 0, 10, 10));
  const auto ks = build_kasteleyn(interior_dual(s));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<cplx> f(ks.blacks());
  for (auto& v : f) v = {u(rng), u(rng)};
  const auto lap = ks.apply_adjoint(ks.apply(f));
  const auto& g = ks.graph();
  for (std::size_t k = 0; k < ks.blacks(); ++k) {
    const Site b = g.vertices[ks.black_vertex(k)];
    if (b.x < 2 || b.y < 2 || b.x > 7 || b.y > 7) continue;
    auto val = [&](int dx, int dy) { return f[ks.black_slot(g.index_of({b.x + dx, b.y + dy}))]; };
    const cplx expect = 4.0 * f[k] - val(2, 0) - val(-2, 0) - val(0, 2) - val(0, -2);
    CHECK(std::abs(lap[k] - expect) < 1e-12);
  }
}

TEST_CASE("coupling columns") {
  const auto tp = three_minus_corner();
  const auto g = interior_dual(tp);
  const auto ks = build_kasteleyn(g);
  for (const auto& v1 : g.vertices) {
    const auto c = solve_coupling(ks, v1);
    // Defining identity K C = delta.
    std::vector<cplx> other(ks.blacks());
    for (std::size_t k = 0; k < ks.blacks(); ++k)
      other[k] = c.values[is_white(v1) ? ks.black_vertex(k) : ks.white_vertex(k)];
    std::vector<cplx> kc;
    if (is_white(v1)) {
      kc = ks.apply(other);
    } else {
      // K restricted to white functions is A^T.
      std::vector<cplx> conj(other.size());
      for (std::size_t k = 0; k < other.size(); ++k) conj[k] = std::conj(other[k]);
      kc = ks.apply_adjoint(conj);
      for (auto& v : kc) v = std::conj(v);
    }
    for (std::size_t k = 0; k < kc.size(); ++k) {
      const int vert = is_white(v1) ? ks.white_vertex(k) : ks.black_vertex(k);
      const cplx expect = g.vertices[vert] == v1 ? 1.0 : 0.0;
      CHECK(std::abs(kc[k] - expect) < 1e-10);
    }
    // Zero on the source's own color.
    for (std::size_t v = 0; v < g.size(); ++v)
      if (is_white(g.vertices[v]) == is_white(v1)) CHECK(std::abs(c.values[v]) == 0.0);
  }
  // Symmetry C(v1, v2) = C(v2, v1).
  for (const auto& a : g.vertices)
    for (const auto& b : g.vertices) {
      if (is_white(a) == is_white(b)) continue;
      const auto ca = solve_coupling(ks, a);
      const auto cb = solve_coupling(ks, b);
      CHECK(std::abs(ca.values[g.index_of(b)] - cb.values[g.index_of(a)]) < 1e-10);
    }
  // Parity: real on B0 and imaginary on B1 for a W0 source, swapped for W1.
  for (const auto& v1 : g.vertices) {
    if (!is_white(v1)) continue;
    const auto c = solve_coupling(ks, v1);
    const bool w0 = classify_square(v1) == SquareClass::W0;
    for (std::size_t v = 0; v < g.size(); ++v) {
      const auto cls = classify_square(g.vertices[v]);
      if (cls == SquareClass::B0) CHECK(std::abs(w0 ? c.values[v].imag() : c.values[v].real()) < 1e-12);
      if (cls == SquareClass::B1) CHECK(std::abs(w0 ? c.values[v].real() : c.values[v].imag()) < 1e-12);
    }
    const auto poles = check_discrete_analytic(c.values, g);
    REQUIRE(poles.size() == 1);
    CHECK(poles[0] == v1);
  }
  const auto untilable = build_kasteleyn(interior_dual(SquareSet({{0, 1}, {1, 0}, {1, 1}, {2, 1}, {2, 2}, {3, 1}})));
  CHECK_THROWS_AS(solve_coupling(untilable, {0, 0}), DimerError);
}

TEST_CASE("edge_set_probability against enumeration") {
  const auto block = build_kasteleyn(interior_dual(SquareSet(rect(0, 0, 2, 2))));
  CHECK(edge_set_probability(block, {}) == 1.0);
  CHECK(edge_set_probability(block, {{{0, 0}, {1, 0}}}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(edge_set_probability(block, {{{0, 0}, {1, 0}}, {{0, 0}, {0, 1}}}), DimerError);

  for (const auto& squares : {three_minus_corner().host().squares(), SquareSet(rect(0, 0, 4, 5))}) {
    const auto g = interior_dual(squares);
    const auto ks = build_kasteleyn(g);
    const auto all = oracle::enumerate_matchings(squares);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Site w = g.vertices[i];
      if (!is_white(w)) continue;
      double total = 0.0;
      auto [lo, hi] = g.neighbors(static_cast<int>(i));
      for (const int* p = lo; p != hi; ++p) {
        const double prob = edge_set_probability(ks, {{w, g.vertices[*p]}});
        int hits = 0;
        for (const auto& m : all) hits += m[i] == *p;
        CHECK(std::abs(prob - double(hits) / all.size()) < 1e-10);
        total += prob;
      }
      CHECK(std::abs(total - 1.0) < 1e-10);
    }
  }
  // Two-domino probabilities on the 4x5 rectangle.
  const SquareSet s(rect(0, 0, 4, 5));
  const auto g = interior_dual(s);
  const auto ks = build_kasteleyn(g);
  const auto all = oracle::enumerate_matchings(s);
  const std::vector<std::pair<Site, Site>> pair{{{0, 0}, {1, 0}}, {{2, 2}, {2, 3}}};
  int hits = 0;
  for (const auto& m : all)
    hits += m[s.index_of({0, 0})] == s.index_of({1, 0}) && m[s.index_of({2, 2})] == s.index_of({2, 3});
  CHECK(std::abs(edge_set_probability(ks, pair) - double(hits) / all.size()) < 1e-10);
}

TEST_CASE("check_discrete_analytic examples") {
  const SquareSet s(rect(0, 0, 12, 12));
  const auto g = interior_dual(s);
  std::vector<cplx> z(g.size()), one(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    const Site b = g.vertices[v];
    if (classify_square(b) == SquareClass::B0) {
      z[v] = b.x;
      one[v] = 1.0;
    } else if (classify_square(b) == SquareClass::B1) {
      z[v] = cplx(0, b.y);
    }
  }
  for (const auto& w : check_discrete_analytic(z, g))
    CHECK((w.x <= 0 || w.y <= 0 || w.x >= 11 || w.y >= 11));
  for (const auto& w : check_discrete_analytic(one, g))
    CHECK((w.x <= 0 || w.y <= 0 || w.x >= 11 || w.y >= 11));
  CHECK(!check_discrete_analytic(one, g).empty());
  std::vector<cplx> bad = z;
  bad[g.index_of({1, 2})] = cplx(1, 1);
  CHECK_THROWS_AS(check_discrete_analytic(bad, g), DimerError);
}

TEST_CASE("laplacian_apply stencil") {
  const auto tp = temperleyan_rectangle(13, 13, 6);
  const auto g = b0_prime_graph(tp);
  std::vector<double> sq(g.size()), c(g.size(), 3.0);
  for (std::size_t v = 0; v < g.size(); ++v) sq[v] = double(g.vertices[v].x) * g.vertices[v].x;
  const auto l1 = laplacian_apply(sq, g);
  const auto l2 = laplacian_apply(c, g);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.boundary[v] || g.degree(static_cast<int>(v)) != 4) continue;
    CHECK(l1[v] == doctest::Approx(-8.0));
    CHECK(l2[v] == doctest::Approx(0.0));
  }
}

TEST_CASE("Re C has Laplacian +1 and -1 next to a W0 source") {
  const auto tp = temperleyan_rectangle(13, 11, 6);
  const auto m = interior_dual(tp);
  const auto ks = build_kasteleyn(m);
  const Site v1{6, 6};
  REQUIRE(classify_square(v1) == SquareClass::W0);
  const auto c = solve_coupling(ks, v1);
  const auto g = b0_prime_graph(tp);
  std::vector<double> re(g.size(), 0.0);
  for (std::size_t v = 0; v < g.size(); ++v) {
    const int i = m.index_of(g.vertices[v]);
    if (i >= 0) re[v] = c.values[i].real();
  }
  const auto lap = laplacian_apply(re, g);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.boundary[v]) continue;
    const Site s = g.vertices[v];
    const double expect = s == Site{7, 6} ? 1.0 : s == Site{5, 6} ? -1.0 : 0.0;
    CHECK(lap[v] == doctest::Approx(expect).epsilon(1e-9));
  }
}
