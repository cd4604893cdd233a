#include "dimer/kasteleyn.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace dimer {

using SparseC = Eigen::SparseMatrix<cplx, Eigen::ColMajor, int>;
using VecC = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

struct KasteleynSystem::Impl {
  SiteGraph graph;
  std::vector<int> white_vertices, black_vertices;
  std::vector<int> slot;  // graph vertex -> slot within its color
  SparseC a;              // whites x blacks
  Eigen::SparseLU<SparseC, Eigen::COLAMDOrdering<int>> lu;
  bool singular = false;
  double log_abs_det = 0.0;

  VecC solve(const VecC& rhs, bool transpose) const {
    // transpose() only builds a view; it is non-const in Eigen but mutates nothing.
    auto& f = const_cast<Eigen::SparseLU<SparseC, Eigen::COLAMDOrdering<int>>&>(lu);
    VecC x = transpose ? VecC(f.transpose().solve(rhs)) : VecC(lu.solve(rhs));
    // One step of iterative refinement.
    const VecC r = rhs - (transpose ? VecC(a.transpose() * x) : VecC(a * x));
    x += transpose ? VecC(f.transpose().solve(r)) : VecC(lu.solve(r));
    return x;
  }
};

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw DimerError(kind, msg); }

int class_rank(const Site& s) { return static_cast<int>(classify_square(s)); }

}  // namespace

cplx kasteleyn_weight(const Site& w, const Site& b) {
  const int dx = b.x - w.x, dy = b.y - w.y;
  if (dx == 1 && dy == 0) return {1, 0};
  if (dx == 0 && dy == 1) return {0, 1};
  if (dx == -1 && dy == 0) return {-1, 0};
  if (dx == 0 && dy == -1) return {0, -1};
  return {0, 0};
}

const SiteGraph& KasteleynSystem::graph() const { return impl_->graph; }
std::size_t KasteleynSystem::whites() const { return impl_->white_vertices.size(); }
std::size_t KasteleynSystem::blacks() const { return impl_->black_vertices.size(); }
int KasteleynSystem::white_vertex(std::size_t k) const { return impl_->white_vertices[k]; }
int KasteleynSystem::black_vertex(std::size_t k) const { return impl_->black_vertices[k]; }
int KasteleynSystem::white_slot(int v) const {
  return is_white(impl_->graph.vertices[v]) ? impl_->slot[v] : -1;
}
int KasteleynSystem::black_slot(int v) const {
  return is_black(impl_->graph.vertices[v]) ? impl_->slot[v] : -1;
}
bool KasteleynSystem::singular() const { return impl_->singular; }
double KasteleynSystem::log_abs_det() const { return impl_->log_abs_det; }

std::vector<cplx> KasteleynSystem::apply(const std::vector<cplx>& f) const {
  const VecC x = Eigen::Map<const VecC>(f.data(), static_cast<Eigen::Index>(f.size()));
  const VecC y = impl_->a * x;
  return {y.data(), y.data() + y.size()};
}

std::vector<cplx> KasteleynSystem::apply_adjoint(const std::vector<cplx>& g) const {
  const VecC x = Eigen::Map<const VecC>(g.data(), static_cast<Eigen::Index>(g.size()));
  const VecC y = impl_->a.adjoint() * x;
  return {y.data(), y.data() + y.size()};
}

std::vector<cplx> KasteleynSystem::inverse_column(int source) const {
  if (impl_->singular) fail(ErrorKind::SingularSystem, "host has no tiling");
  const bool white = is_white(impl_->graph.vertices[source]);
  const Eigen::Index n = static_cast<Eigen::Index>(impl_->white_vertices.size());
  VecC rhs = VecC::Zero(n);
  rhs(impl_->slot[source]) = 1.0;
  // K^{-1}(b, w) = A^{-1}(b, w) and K^{-1}(w, b) = A^{-1}(b, w).
  const VecC x = impl_->solve(rhs, !white);
  return {x.data(), x.data() + x.size()};
}

KasteleynSystem build_kasteleyn(const SiteGraph& m) {
  auto impl = std::make_shared<KasteleynSystem::Impl>();
  impl->graph = m;
  const std::size_t n = m.size();
  for (std::size_t v = 0; v < n; ++v)
    (is_white(m.vertices[v]) ? impl->white_vertices : impl->black_vertices).push_back(static_cast<int>(v));
  if (impl->white_vertices.size() != impl->black_vertices.size())
    fail(ErrorKind::UnbalancedColors, std::to_string(impl->black_vertices.size()) + " black vs " +
                                          std::to_string(impl->white_vertices.size()) + " white");
  // Fixed order: by class, then row-major (vertices are already row-major).
  auto by_class = [&](int a, int b) {
    return class_rank(m.vertices[a]) < class_rank(m.vertices[b]);
  };
  std::stable_sort(impl->white_vertices.begin(), impl->white_vertices.end(), by_class);
  std::stable_sort(impl->black_vertices.begin(), impl->black_vertices.end(), by_class);
  impl->slot.assign(n, -1);
  for (std::size_t k = 0; k < impl->white_vertices.size(); ++k) {
    impl->slot[impl->white_vertices[k]] = static_cast<int>(k);
    impl->slot[impl->black_vertices[k]] = static_cast<int>(k);
  }

  const int size = static_cast<int>(impl->white_vertices.size());
  std::vector<Eigen::Triplet<cplx, int>> trip;
  trip.reserve(4 * static_cast<std::size_t>(size));
  for (int k = 0; k < size; ++k) {
    const int w = impl->white_vertices[k];
    auto [lo, hi] = m.neighbors(w);
    for (const int* p = lo; p != hi; ++p)
      trip.emplace_back(k, impl->slot[*p], kasteleyn_weight(m.vertices[w], m.vertices[*p]));
  }
  impl->a.resize(size, size);
  impl->a.setFromTriplets(trip.begin(), trip.end());
  impl->a.makeCompressed();

  if (size == 0) return KasteleynSystem(impl);
  impl->lu.analyzePattern(impl->a);
  impl->lu.factorize(impl->a);
  if (impl->lu.info() != Eigen::Success) {
    impl->singular = true;
    impl->log_abs_det = -std::numeric_limits<double>::infinity();
  } else {
    impl->log_abs_det = std::real(impl->lu.logAbsDeterminant());
    // det A is a Gaussian integer, so |det A| < 1 means it is zero.
    if (!std::isfinite(impl->log_abs_det) || impl->log_abs_det < -0.5) {
      impl->singular = true;
      impl->log_abs_det = -std::numeric_limits<double>::infinity();
    }
  }
  return KasteleynSystem(impl);
}

TilingCount count_tilings(const KasteleynSystem& ks) {
  TilingCount c;
  if (ks.whites() == 0) {
    c.exact = 1;
    c.log_count = 0.0;
    return c;
  }
  if (ks.singular()) {
    c.exact = 0;
    c.log_count = -std::numeric_limits<double>::infinity();
    return c;
  }
  c.log_count = ks.log_abs_det();
  if (c.log_count < std::log(1e15)) {
    const double v = std::round(std::exp(c.log_count));
    c.exact = static_cast<std::uint64_t>(v);
  }
  return c;
}

CouplingColumn solve_coupling(const KasteleynSystem& ks, const Site& v1) {
  const int v = ks.graph().index_of(v1);
  if (v < 0) fail(ErrorKind::PathLeavesHost, "source square is not in the host");
  const auto col = ks.inverse_column(v);
  CouplingColumn c;
  c.source = v1;
  c.values.assign(ks.graph().size(), cplx(0, 0));
  const bool white = is_white(v1);
  for (std::size_t k = 0; k < col.size(); ++k)
    c.values[white ? ks.black_vertex(k) : ks.white_vertex(k)] = col[k];
  return c;
}

std::vector<CouplingColumn> solve_couplings(const KasteleynSystem& ks,
                                            const std::vector<Site>& sources, int threads) {
  std::vector<CouplingColumn> out(sources.size());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(sources.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < sources.size(); ++i) out[i] = solve_coupling(ks, sources[i]);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < sources.size(); i += threads)
          out[i] = solve_coupling(ks, sources[i]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double edge_set_probability(const KasteleynSystem& ks,
                            const std::vector<std::pair<Site, Site>>& edges) {
  if (edges.empty()) return 1.0;
  const SiteGraph& g = ks.graph();
  std::vector<int> used;
  std::vector<int> wv, bv;
  for (auto [a, b] : edges) {
    const Site w = is_white(a) ? a : b;
    const Site k = is_white(a) ? b : a;
    const int iw = g.index_of(w), ib = g.index_of(k);
    if (iw < 0 || ib < 0 || !is_white(w) || is_white(k) || std::abs(w.x - k.x) + std::abs(w.y - k.y) != 1)
      fail(ErrorKind::PathLeavesHost, "domino is not an edge of the host");
    for (int u : {iw, ib}) {
      if (std::find(used.begin(), used.end(), u) != used.end())
        fail(ErrorKind::OverlappingEdges, "dominoes share a square");
      used.push_back(u);
    }
    wv.push_back(iw);
    bv.push_back(ib);
  }
  const int k = static_cast<int>(edges.size());
  Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic> m(k, k);
  cplx weight = 1.0;
  for (int j = 0; j < k; ++j) {
    const auto col = ks.inverse_column(wv[j]);  // A^{-1}(., w_j)
    for (int i = 0; i < k; ++i) m(i, j) = col[ks.black_slot(bv[i])];
    weight *= kasteleyn_weight(g.vertices[wv[j]], g.vertices[bv[j]]);
  }
  const cplx p = weight * m.determinant();
  return p.real();
}

std::vector<Site> check_discrete_analytic(const std::vector<cplx>& f, const SiteGraph& m,
                                          double tol) {
  if (f.size() != m.size()) fail(ErrorKind::WrongValueParity, "value vector does not match graph");
  double scale = 0.0;
  for (std::size_t v = 0; v < m.size(); ++v)
    if (is_black(m.vertices[v])) scale = std::max(scale, std::abs(f[v]));
  const double eps = tol * std::max(scale, 1.0);
  // Parity: real on one black class, imaginary on the other (either way round).
  bool direct = true, swapped = true;
  for (std::size_t v = 0; v < m.size(); ++v) {
    const Site s = m.vertices[v];
    if (is_white(s)) continue;
    const bool b0 = classify_square(s) == SquareClass::B0;
    const double re = std::abs(f[v].real()), im = std::abs(f[v].imag());
    if (b0 ? im > eps : re > eps) direct = false;
    if (b0 ? re > eps : im > eps) swapped = false;
  }
  if (!direct && !swapped) fail(ErrorKind::WrongValueParity, "values mix real and imaginary parts on a black class");

  auto value = [&](int x, int y) {
    const int i = m.index_of({x, y});
    return i < 0 ? cplx(0, 0) : f[i];
  };
  std::vector<Site> poles;
  for (std::size_t v = 0; v < m.size(); ++v) {
    const Site w = m.vertices[v];
    if (!is_white(w)) continue;
    const cplx d = value(w.x + 1, w.y) + cplx(0, 1) * value(w.x, w.y + 1) - value(w.x - 1, w.y) -
                   cplx(0, 1) * value(w.x, w.y - 1);
    if (std::abs(d) > eps) poles.push_back(w);
  }
  return poles;
}

std::vector<double> laplacian_apply(const std::vector<double>& f, const SiteGraph& g) {
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t v = 0; v < g.size(); ++v) {
    double s = 4.0 * f[v];
    auto [lo, hi] = g.neighbors(static_cast<int>(v));
    for (const int* p = lo; p != hi; ++p) s -= f[*p];
    out[v] = s;
  }
  return out;
}

void write_coupling_csv(std::ostream& out, const CouplingColumn& c, const SiteGraph& m, double eps) {
  out << "x,y,re,im\n";
  out.precision(17);
  for (std::size_t v = 0; v < m.size(); ++v) {
    if (is_white(m.vertices[v]) == is_white(c.source)) continue;
    const Point p = position(m.vertices[v], eps);
    out << p.real() << ',' << p.imag() << ',' << c.values[v].real() << ',' << c.values[v].imag()
        << '\n';
  }
}

}  // namespace dimer
