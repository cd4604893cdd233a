#include "dimer/greens.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <unordered_map>

#include "dimer/plane.hpp"

namespace dimer {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw DimerError(kind, msg); }

Site midpoint(const Site& a, const Site& b) { return {(a.x + b.x) / 2, (a.y + b.y) / 2}; }

std::uint64_t vertex_key(const Vertex& v) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.x)) << 32) |
         static_cast<std::uint32_t>(v.y);
}

// Lattice edge shared by adjacent squares s and t, as an order-free key.
std::pair<std::uint64_t, std::uint64_t> shared_edge(const Site& s, const Site& t) {
  Vertex a, b;
  if (t.x > s.x) { a = {s.x + 1, s.y}; b = {s.x + 1, s.y + 1}; }
  else if (t.x < s.x) { a = {s.x, s.y}; b = {s.x, s.y + 1}; }
  else if (t.y > s.y) { a = {s.x, s.y + 1}; b = {s.x + 1, s.y + 1}; }
  else { a = {s.x, s.y}; b = {s.x + 1, s.y}; }
  const auto ka = vertex_key(a), kb = vertex_key(b);
  return {std::min(ka, kb), std::max(ka, kb)};
}

struct EdgeHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& e) const {
    return std::hash<std::uint64_t>()(e.first * 0x9e3779b97f4a7c15ULL ^ e.second);
  }
};

}  // namespace

struct GreenSolver::Impl {
  SiteGraph g;
  std::vector<int> slot;  // unknown index, -1 on Y and V
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;

  // Boundary bookkeeping, present when built from a host.
  std::size_t loops = 0;
  SquareSet host;
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, int, EdgeHash> edge_loop;
  std::vector<int> exposed_loop;  // per graph vertex, -1 unless in V

  int loop_between(const Site& s, const Site& t) const {
    auto it = edge_loop.find(shared_edge(s, t));
    return it == edge_loop.end() ? -1 : it->second;
  }

  void factor() {
    const std::size_t n = g.size();
    std::vector<char> seen(n, 0);
    std::vector<int> queue;
    for (std::size_t v = 0; v < n; ++v)
      if (g.boundary[v] || g.exposed[v]) {
        seen[v] = 1;
        queue.push_back(static_cast<int>(v));
      }
    for (std::size_t q = 0; q < queue.size(); ++q) {
      auto [lo, hi] = g.neighbors(queue[q]);
      for (const int* p = lo; p != hi; ++p)
        if (!seen[*p]) {
          seen[*p] = 1;
          queue.push_back(*p);
        }
    }
    if (queue.size() != n)
      fail(ErrorKind::DisconnectedFromBoundary, "part of the B0' graph does not reach Y or V");

    slot.assign(n, -1);
    int unknowns = 0;
    for (std::size_t v = 0; v < n; ++v)
      if (!g.boundary[v] && !g.exposed[v]) slot[v] = unknowns++;
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t v = 0; v < n; ++v) {
      if (slot[v] < 0) continue;
      trips.emplace_back(slot[v], slot[v], 4.0);
      auto [lo, hi] = g.neighbors(static_cast<int>(v));
      for (const int* p = lo; p != hi; ++p)
        if (slot[*p] >= 0) trips.emplace_back(slot[v], slot[*p], -1.0);
    }
    Eigen::SparseMatrix<double> lap(unknowns, unknowns);
    lap.setFromTriplets(trips.begin(), trips.end());
    if (unknowns > 0) {
      ldlt.compute(lap);
      if (ldlt.info() != Eigen::Success)
        fail(ErrorKind::SingularSystem, "Dirichlet Laplacian factorization failed");
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (rhs.size() == 0) return rhs;
    return ldlt.solve(rhs);
  }
};

GreenSolver::GreenSolver(const SiteGraph& b0_prime) {
  auto impl = std::make_shared<Impl>();
  impl->g = b0_prime;
  impl->factor();
  impl_ = std::move(impl);
}

GreenSolver::GreenSolver(const TemperleyanPolyomino& tp) {
  auto impl = std::make_shared<Impl>();
  impl->g = b0_prime_graph(tp);
  impl->factor();
  const auto& loops = tp.host().loops();
  impl->loops = loops.size();
  impl->host = tp.host().squares();
  for (std::size_t l = 0; l < loops.size(); ++l) {
    const auto& vs = loops[l].vertices;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const auto ka = vertex_key(vs[i]), kb = vertex_key(vs[(i + 1) % vs.size()]);
      impl->edge_loop[{std::min(ka, kb), std::max(ka, kb)}] = static_cast<int>(l);
    }
  }
  impl->exposed_loop.assign(impl->g.size(), -1);
  for (std::size_t j = 0; j < tp.exposed().size(); ++j)
    impl->exposed_loop[impl->g.index_of(tp.exposed()[j])] = static_cast<int>(j + 1);
  impl_ = std::move(impl);
}

const SiteGraph& GreenSolver::graph() const { return impl_->g; }
std::size_t GreenSolver::components() const { return impl_->loops; }

GreensField GreenSolver::green(const Site& w1) const {
  const Impl& m = *impl_;
  const SiteGraph& g = m.g;
  const int s = g.index_of(w1);
  if (s < 0) fail(ErrorKind::ProbeOutsideRegion, "Green's source is not a B0' vertex");
  GreensField f{w1, std::vector<double>(g.size(), 0.0)};
  if (g.boundary[s]) return f;
  const Eigen::Index n = m.ldlt.rows();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  if (m.slot[s] >= 0) {
    rhs(m.slot[s]) = 1.0;
    const Eigen::VectorXd x = m.solve(rhs);
    for (std::size_t v = 0; v < g.size(); ++v)
      if (m.slot[v] >= 0) f.values[v] = x(m.slot[v]);
    return f;
  }
  // Source in V: unknown value t at s, interior part t L^{-1} b where b marks
  // the neighbours of s; the source row gives t (4 - b.L^{-1}b) = 1.
  auto [lo, hi] = g.neighbors(s);
  for (const int* p = lo; p != hi; ++p)
    if (m.slot[*p] >= 0) rhs(m.slot[*p]) += 1.0;
  const Eigen::VectorXd y = m.solve(rhs);
  const double t = 1.0 / (4.0 - rhs.dot(y));
  for (std::size_t v = 0; v < g.size(); ++v)
    if (m.slot[v] >= 0) f.values[v] = t * y(m.slot[v]);
  f.values[s] = t;
  return f;
}

std::vector<double> GreenSolver::outflows(const std::vector<double>& f) const {
  const Impl& m = *impl_;
  const SiteGraph& g = m.g;
  if (m.loops == 0) fail(ErrorKind::Unsupported, "outflows need a solver built from a host");
  std::vector<double> out(m.loops, 0.0);
  auto add = [&](int loop, double amount) {
    if (loop < 0) fail(ErrorKind::InvalidPolyomino, "boundary crossing not on any loop");
    out[loop] += amount;
  };
  for (std::size_t v = 0; v < g.size(); ++v) {
    const Site sv = g.vertices[v];
    auto [lo, hi] = g.neighbors(static_cast<int>(v));
    if (g.boundary[v]) {
      // Current arriving at a Y vertex leaves through the edge its white shares with it.
      for (const int* p = lo; p != hi; ++p)
        if (!g.boundary[*p]) add(m.loop_between(midpoint(sv, g.vertices[*p]), sv), f[*p]);
      continue;
    }
    if (m.exposed_loop[v] >= 0) {
      double lap = 4.0 * f[v];
      for (const int* p = lo; p != hi; ++p) lap -= f[*p];
      add(m.exposed_loop[v], -lap);
    }
    // Missing whites act as grounded neighbours across the boundary.
    for (int d = 0; d < 4; ++d) {
      const Site w{sv.x + kDx[d], sv.y + kDy[d]};
      if (!m.host.contains(w) && f[v] != 0.0) add(m.loop_between(sv, w), f[v]);
    }
  }
  return out;
}

GreensField dirichlet_green(const SiteGraph& g, const Site& w1) { return GreenSolver(g).green(w1); }

double flux_out_of_component(const GreenSolver& solver, const GreensField& f, int component) {
  const auto out = solver.outflows(f.values);
  if (component < 0 || static_cast<std::size_t>(component) >= out.size())
    fail(ErrorKind::Unsupported, "no such boundary component");
  return out[component];
}

namespace {

// Real dipole weights conj(K(v1, b)) / phase on the B0 neighbours of v1, with
// phase 1 for W0 sources and i for W1 sources.
struct Dipole {
  cplx phase;
  std::vector<std::pair<Site, double>> terms;
};

Dipole dipole_of(const Site& v1) {
  Dipole d;
  const auto c = classify_square(v1);
  if (c != SquareClass::W0 && c != SquareClass::W1) fail(ErrorKind::WrongValueParity, "source must be white");
  d.phase = c == SquareClass::W0 ? cplx(1, 0) : cplx(0, 1);
  const std::array<Site, 2> steps = c == SquareClass::W0 ? std::array<Site, 2>{Site{1, 0}, Site{-1, 0}}
                                                         : std::array<Site, 2>{Site{0, 1}, Site{0, -1}};
  for (const auto& s : steps) {
    const Site b = v1 + s;
    d.terms.emplace_back(b, (std::conj(kasteleyn_weight(v1, b)) / d.phase).real());
  }
  return d;
}

std::vector<double> dipole_field(const GreenSolver& solver, const Dipole& d) {
  std::vector<double> f(solver.graph().size(), 0.0);
  for (const auto& [b, k] : d.terms) {
    if (solver.graph().index_of(b) < 0) continue;
    const auto gb = solver.green(b);
    for (std::size_t v = 0; v < f.size(); ++v) f[v] += k * gb.values[v];
  }
  return f;
}

// Corrections to GreenSolver::outflows for the dipole's own poles. A pole
// outside the host lies across a boundary loop from the source, so its
// strength crosses that loop directly. A pole on an exposed square is counted
// by outflows as leaking into the hole, which it does not.
std::vector<double> pole_outflows(const TemperleyanPolyomino& tp, const Site& v1, const Dipole& d) {
  const Polyomino& host = tp.host();
  std::vector<double> out(host.loops().size(), 0.0);
  for (const auto& [b, k] : d.terms) {
    const auto ex = std::find(tp.exposed().begin(), tp.exposed().end(), b);
    if (ex != tp.exposed().end()) {
      out[ex - tp.exposed().begin() + 1] += k;
      continue;
    }
    if (host.squares().contains(b)) continue;
    // Shared edge of the two squares: the corners they have in common.
    std::vector<Vertex> shared;
    for (const Site& c : {Site{0, 0}, Site{1, 0}, Site{0, 1}, Site{1, 1}}) {
      const Vertex v{v1.x + c.x, v1.y + c.y};
      if (v.x - b.x >= 0 && v.x - b.x <= 1 && v.y - b.y >= 0 && v.y - b.y <= 1) shared.push_back(v);
    }
    int loop = host.loop_of_edge(shared[0], shared[1]);
    if (loop < 0) loop = host.loop_of_edge(shared[1], shared[0]);
    if (loop < 0) fail(ErrorKind::InvalidPolyomino, "pole edge is not on a boundary loop");
    out[loop] += k;
  }
  return out;
}

}  // namespace

AlphaSolution solve_alpha(const GreenSolver& solver, const TemperleyanPolyomino& tp, const Site& v1) {
  AlphaSolution sol;
  const std::size_t k = tp.holes();
  if (k == 0) return sol;
  if (solver.components() != k + 1) fail(ErrorKind::Unsupported, "solver was built for another host");
  const auto dip = dipole_field(solver, dipole_of(v1));
  const auto c = solver.outflows(dip);
  const auto direct = pole_outflows(tp, v1, dipole_of(v1));
  FluxSystem& fs = sol.system;
  fs.matrix.resize(k, k);
  fs.rhs.resize(k);
  for (std::size_t i = 0; i < k; ++i) fs.rhs(i) = c[i + 1] + direct[i + 1];
  for (std::size_t j = 0; j < k; ++j) {
    const auto col = solver.outflows(solver.green(tp.exposed()[j]).values);
    for (std::size_t i = 0; i < k; ++i) fs.matrix(i, j) = col[i + 1];
  }
  fs.gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    double others = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (i == j) continue;
      if (fs.matrix(i, j) < -1e-12)
        fail(ErrorKind::DominanceViolated, "off-diagonal outflow is negative in column " + std::to_string(j));
      others += std::abs(fs.matrix(i, j));
    }
    if (fs.matrix(j, j) >= 0)
      fail(ErrorKind::DominanceViolated, "diagonal outflow is not negative in column " + std::to_string(j));
    fs.gap = std::min(fs.gap, -fs.matrix(j, j) - others);
  }
  if (!(fs.gap > 0)) fail(ErrorKind::DominanceViolated, "flux matrix is not column diagonally dominant");
  fs.determinant = (-fs.matrix).determinant();
  // det Q > delta^k for every delta below the gap.
  if (!(fs.determinant > std::pow(fs.gap * (1 - 1e-9), static_cast<double>(k))))
    fail(ErrorKind::DominanceViolated, "determinant bound fails: det " + std::to_string(fs.determinant));
  const Eigen::VectorXd a = fs.matrix.partialPivLu().solve(-fs.rhs);
  sol.alpha.assign(a.data(), a.data() + a.size());
  return sol;
}

AlphaSolution solve_alpha(const TemperleyanPolyomino& tp, const Site& v1) {
  return solve_alpha(GreenSolver(tp), tp, v1);
}

GreenCoupling coupling_from_green_report(const GreenSolver& solver, const TemperleyanPolyomino& tp,
                                         const Site& v1, bool correct) {
  const SquareSet& host = tp.host().squares();
  if (!host.contains(v1) || !is_white(v1)) fail(ErrorKind::WrongValueParity, "source must be a host white");
  const Dipole dip = dipole_of(v1);
  GreenCoupling out;
  std::vector<double> field = dipole_field(solver, dip);
  if (correct) {
    out.alpha = solve_alpha(solver, tp, v1).alpha;
    for (std::size_t j = 0; j < out.alpha.size(); ++j) {
      const auto gd = solver.green(tp.exposed()[j]);
      for (std::size_t v = 0; v < field.size(); ++v) field[v] += out.alpha[j] * gd.values[v];
    }
  }
  if (tp.holes() > 0) {
    auto flows = solver.outflows(field);
    const auto direct = pole_outflows(tp, v1, dip);
    for (std::size_t i = 0; i < flows.size(); ++i) flows[i] += direct[i];
    out.hole_periods.assign(flows.begin() + 1, flows.end());
  }

  const SiteGraph m = interior_dual(tp);
  const SiteGraph& b0 = solver.graph();
  out.column.source = v1;
  out.column.values.assign(m.size(), cplx(0, 0));
  auto value_at = [&](const Site& s) -> cplx {
    const int i = m.index_of(s);
    return i < 0 ? cplx(0, 0) : out.column.values[i];
  };
  for (std::size_t v = 0; v < b0.size(); ++v) {
    if (b0.boundary[v]) continue;
    out.column.values[m.index_of(b0.vertices[v])] = dip.phase * field[v];
  }

  // d-bar equation at white w, with B0 terms moved to the right-hand side.
  auto rhs_at = [&](const Site& w) {
    cplx r = w == v1 ? cplx(1, 0) : cplx(0, 0);
    for (int d = 0; d < 4; ++d) {
      const Site b{w.x + kDx[d], w.y + kDy[d]};
      if (classify_square(b) == SquareClass::B0) r -= kasteleyn_weight(w, b) * value_at(b);
    }
    return r;
  };
  const SiteGraph b1 = b1_dual_graph(tp);
  std::vector<cplx> val(b1.size(), cplx(0, 0));
  std::vector<char> seen(b1.size(), 0);
  const int root = b1.index_of(tp.d0());
  seen[root] = 1;
  std::vector<int> queue{root};
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const int a = queue[q];
    auto [lo, hi] = b1.neighbors(a);
    for (const int* p = lo; p != hi; ++p) {
      if (seen[*p]) continue;
      seen[*p] = 1;
      queue.push_back(*p);
      const Site sa = b1.vertices[a], sb = b1.vertices[*p];
      const Site w = midpoint(sa, sb);
      val[*p] = (rhs_at(w) - kasteleyn_weight(w, sa) * val[a]) / kasteleyn_weight(w, sb);
    }
  }
  if (queue.size() != b1.size()) fail(ErrorKind::DisconnectedHost, "B1 dual graph is not connected");
  for (std::size_t v = 0; v < b1.size(); ++v) {
    const int i = m.index_of(b1.vertices[v]);
    if (i >= 0) out.column.values[i] = val[v];
  }
  // Every white is one B1 dual edge; tree edges hold exactly.
  for (std::size_t v = 0; v < b1.size(); ++v) {
    auto [lo, hi] = b1.neighbors(static_cast<int>(v));
    for (const int* p = lo; p != hi; ++p) {
      if (*p < static_cast<int>(v)) continue;
      const Site sa = b1.vertices[v], sb = b1.vertices[*p];
      const Site w = midpoint(sa, sb);
      const cplx r = kasteleyn_weight(w, sa) * val[v] + kasteleyn_weight(w, sb) * val[*p] - rhs_at(w);
      out.conjugate_residual = std::max(out.conjugate_residual, std::abs(r));
    }
  }
  return out;
}

CouplingColumn coupling_from_green(const TemperleyanPolyomino& tp, const Site& v1) {
  auto r = coupling_from_green_report(GreenSolver(tp), tp, v1, true);
  if (r.conjugate_residual > 1e-8)
    fail(ErrorKind::ConjugateNotSingleValued,
         "conjugate misfit " + std::to_string(r.conjugate_residual) + " after the current correction");
  return std::move(r.column);
}

}  // namespace dimer

namespace dimer {

const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::F0: return "F0";
    case KernelKind::F1: return "F1";
    case KernelKind::FPlus: return "F+";
    case KernelKind::FMinus: return "F-";
    case KernelKind::F0Star: return "F0*";
    case KernelKind::F1Star: return "F1*";
    case KernelKind::FPlusStar: return "F+*";
  }
  return "?";
}

KernelKind kernel_kind_from_string(const std::string& s) {
  for (auto k : {KernelKind::F0, KernelKind::F1, KernelKind::FPlus, KernelKind::FMinus, KernelKind::F0Star,
                 KernelKind::F1Star, KernelKind::FPlusStar})
    if (s == to_string(k)) return k;
  if (s == "Fplus") return KernelKind::FPlus;
  if (s == "Fminus") return KernelKind::FMinus;
  if (s == "F0star") return KernelKind::F0Star;
  if (s == "F1star") return KernelKind::F1Star;
  if (s == "Fplusstar") return KernelKind::FPlusStar;
  throw DimerError(ErrorKind::ConfigParse, "unknown kernel kind " + s);
}

cplx AnalyticKernel::operator()(cplx z1, cplx z2) const {
  const cplx pole = 1.0 / (std::numbers::pi * (z2 - z1));
  switch (kind) {
    case KernelKind::F0: return pair.f0(z1, z2);
    case KernelKind::F1: return pair.f1(z1, z2);
    case KernelKind::FPlus: return pair.f0(z1, z2) + pair.f1(z1, z2);
    case KernelKind::FMinus: return pair.f0(z1, z2) - pair.f1(z1, z2);
    case KernelKind::F0Star: return pair.f0(z1, z2) - pole;
    case KernelKind::F1Star: return pair.f1(z1, z2) - pole;
    case KernelKind::FPlusStar: return pair.f0(z1, z2) + pair.f1(z1, z2) - 2.0 * pole;
  }
  return {};
}

AnalyticKernel mobius_transport(const AnalyticKernel& on_image, const Mobius& f, const std::string& domain) {
  const KernelPair v = on_image.pair;
  auto plus_minus = [v, f](cplx z1, cplx z2) {
    const cplx w1 = f(z1), w2 = f(z2), d = f.derivative(z1);
    const cplx f0 = v.f0(w1, w2), f1 = v.f1(w1, w2);
    return std::pair<cplx, cplx>{d * (f0 + f1), std::conj(d) * (f0 - f1)};
  };
  KernelPair u;
  u.f0 = [plus_minus](cplx z1, cplx z2) {
    const auto [p, m] = plus_minus(z1, z2);
    return (p + m) / 2.0;
  };
  u.f1 = [plus_minus](cplx z1, cplx z2) {
    const auto [p, m] = plus_minus(z1, z2);
    return (p - m) / 2.0;
  };
  return {on_image.kind, domain, u};
}

AnalyticKernel kernel_halfplane(KernelKind kind, std::optional<double> d0) {
  KernelPair p;
  p.f0 = [](cplx z1, cplx z2) {
    return 1.0 / (kPi * (z2 - z1)) - 1.0 / (kPi * (z2 - std::conj(z1)));
  };
  p.f1 = [](cplx z1, cplx z2) {
    return 1.0 / (kPi * (z2 - z1)) + 1.0 / (kPi * (z2 - std::conj(z1)));
  };
  AnalyticKernel at_infinity{kind, "half-plane", p};
  if (!d0) return at_infinity;
  // z -> -1/(z - t) preserves the half-plane and sends t to infinity.
  const Mobius f{0, -1, 1, -*d0};
  return mobius_transport(at_infinity, f, "half-plane");
}

AnalyticKernel kernel_disk(KernelKind kind, double theta) {
  // z -> i (1 + r z) / (1 - r z) with r = e^{-i theta} maps the disk onto the
  // half-plane and e^{i theta} to infinity.
  const cplx r = std::polar(1.0, -theta);
  const Mobius f{cplx(0, 1) * r, cplx(0, 1), -r, 1};
  return mobius_transport(kernel_halfplane(kind), f, "disk");
}

namespace {

// Nearest lattice site to p (in lattice units) with the given parities.
Site nearest_of_class(Point p, int px, int py) {
  auto pick = [](double t, int parity) {
    return static_cast<int>(std::lround((t - parity) / 2)) * 2 + parity;
  };
  return {pick(p.real(), px), pick(p.imag(), py)};
}

double segment_distance(Point p, Point a, Point b) {
  const Point d = b - a;
  const double len2 = std::norm(d);
  const double t = len2 > 0 ? std::clamp(((p - a) * std::conj(d)).real() / len2, 0.0, 1.0) : 0.0;
  return std::abs(p - (a + t * d));
}

double boundary_distance(const Polyomino& host, double eps, Point p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& loop : host.loops()) {
    const auto& vs = loop.vertices;
    for (std::size_t i = 0; i < vs.size(); ++i)
      best = std::min(best, segment_distance(p, position(vs[i], eps), position(vs[(i + 1) % vs.size()], eps)));
  }
  return best;
}

double boundary_diameter(const Polyomino& host, double eps) {
  const auto& vs = host.loops().front().vertices;
  double best = 0.0;
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j)
      best = std::max(best, std::abs(position(vs[i], eps) - position(vs[j], eps)));
  return best;
}

}  // namespace

KernelTable kernel_numeric(const std::vector<KernelHost>& hosts, KernelKind kind,
                           const std::vector<ProbePair>& probes, std::optional<double> xi, int threads) {
  if (kind != KernelKind::F0Star && kind != KernelKind::F1Star && kind != KernelKind::F0 &&
      kind != KernelKind::F1)
    fail(ErrorKind::Unsupported, "numeric kernels are F0, F1, F0* or F1*");
  if (hosts.empty()) fail(ErrorKind::Unsupported, "no hosts given");
  const bool w0 = kind == KernelKind::F0Star || kind == KernelKind::F0;
  const bool starred = kind == KernelKind::F0Star || kind == KernelKind::F1Star;
  KernelTable t;
  t.kind = kind;
  t.probes = probes;
  const double cutoff = xi ? *xi : 0.1 * boundary_diameter(hosts.front().tp.host(), hosts.front().eps);
  for (const auto& h : hosts) {
    for (const auto& pr : probes)
      for (Point z : {pr.z1, pr.z2})
        if (boundary_distance(h.tp.host(), h.eps, z) < cutoff)
          fail(ErrorKind::ProbesTooCloseToBoundary,
               "probe (" + std::to_string(z.real()) + ", " + std::to_string(z.imag()) + ") is within " +
                   std::to_string(cutoff) + " of the boundary");
  }
  for (const auto& h : hosts) {
    const auto ks = build_kasteleyn(interior_dual(h.tp));
    const SiteGraph& g = ks.graph();
    std::vector<Site> sources;
    for (const auto& pr : probes) sources.push_back(nearest_of_class(pr.z1 / h.eps, w0 ? 0 : 1, w0 ? 0 : 1));
    const auto cols = solve_couplings(ks, sources, threads);
    std::vector<cplx> row;
    for (std::size_t k = 0; k < probes.size(); ++k) {
      const Site v1 = sources[k];
      const Site b0 = nearest_of_class(probes[k].z2 / h.eps, 1, 0);
      const Site b1 = nearest_of_class(probes[k].z2 / h.eps, 0, 1);
      auto scaled = [&](const Site& b) {
        const int i = g.index_of(b);
        if (i < 0) fail(ErrorKind::ProbeOutsideRegion, "probe lies outside the host");
        cplx v = cols[k].values[i];
        if (starred) v -= c0_value(b - v1);
        return v / h.eps;
      };
      const cplx on_b0 = scaled(b0), on_b1 = scaled(b1);
      row.push_back(w0 ? cplx(on_b0.real(), on_b1.imag()) : cplx(on_b1.real(), on_b0.imag()));
    }
    t.eps.push_back(h.eps);
    t.values.push_back(std::move(row));
  }
  const std::size_t n = t.eps.size();
  for (std::size_t k = 0; k < probes.size(); ++k) {
    if (n == 1) {
      t.extrapolated.push_back(t.values[0][k]);
      t.ratio.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double ea = t.eps[n - 2], eb = t.eps[n - 1];
    const cplx fa = t.values[n - 2][k], fb = t.values[n - 1][k];
    t.extrapolated.push_back((ea * fb - eb * fa) / (ea - eb));
    t.ratio.push_back(n >= 3 ? std::abs(fb - fa) / std::abs(fa - t.values[n - 3][k])
                             : std::numeric_limits<double>::quiet_NaN());
  }
  return t;
}

void write_kernel_csv(std::ostream& out, const KernelTable& t) {
  out << "z1_re,z1_im,z2_re,z2_im,re,im,eps\n";
  out.precision(12);
  for (std::size_t e = 0; e <= t.eps.size(); ++e)
    for (std::size_t k = 0; k < t.probes.size(); ++k) {
      const cplx v = e < t.eps.size() ? t.values[e][k] : t.extrapolated[k];
      const auto& p = t.probes[k];
      out << p.z1.real() << ',' << p.z1.imag() << ',' << p.z2.real() << ',' << p.z2.imag() << ','
          << v.real() << ',' << v.imag() << ',' << (e < t.eps.size() ? t.eps[e] : 0.0) << '\n';
    }
}

double halfplane_green(const Site& v1, const Site& v2) {
  // G0 = -a/4 on the B0 lattice, whose unit step is two squares.
  const Site d = v2 - v1;
  const Site r{v2.x - v1.x, v2.y + v1.y};
  return (potential_kernel(r.x / 2, r.y / 2) - potential_kernel(d.x / 2, d.y / 2)) / 4;
}

double green_halfplane(cplx z1, cplx z2) {
  return -std::log(std::abs((z2 - z1) / (z2 - std::conj(z1)))) / (2 * kPi);
}

double green_disk(cplx z1, cplx z2) {
  return -std::log(std::abs((z2 - z1) / (1.0 - std::conj(z1) * z2))) / (2 * kPi);
}

cplx green_gradient_halfplane(cplx z1, cplx z2) {
  // d/dz1 of the holomorphic-in-z1 part: g = -(1/2pi) Re[log(z2 - z1) - log(z2 - conj z1)].
  const cplx a = 1.0 / (z2 - z1), b = 1.0 / (z2 - std::conj(z1));
  return cplx((a - b).real(), -(a + b).imag()) / (2 * kPi);
}

cplx green_gradient_disk(cplx z1, cplx z2) {
  // g = -(1/2pi) Re[log(z2 - z1) - log(1 - conj(z1) z2)].
  const cplx a = 1.0 / (z2 - z1);
  const cplx b = z2 / (1.0 - std::conj(z1) * z2);
  // x1: d/dx1 log(z2 - z1) = -a, d/dx1 log(1 - conj z1 z2) = -b.
  // y1: d/dy1 log(z2 - z1) = -i a, d/dy1 log(1 - conj z1 z2) = i b.
  const double gx = -(-a + b).real() / (2 * kPi);
  const double gy = -(cplx(0, -1) * a - cplx(0, 1) * b).real() / (2 * kPi);
  return {gx, gy};
}

double DerivativeCheck::relative_error_x() const { return std::abs(dipole_x - expected_x) / std::abs(expected_x); }
double DerivativeCheck::relative_error_y() const { return std::abs(dipole_y - expected_y) / std::abs(expected_y); }
double DerivativeCheck::relative_error_boundary() const {
  return std::abs(boundary_green - boundary_expected) / std::abs(boundary_expected);
}

namespace {

double form_mismatch(const AnalyticKernel& k, cplx z1, cplx z2, cplx grad) {
  const cplx f0 = k.pair.f0(z1, z2), f1 = k.pair.f1(z1, z2);
  return std::max(std::abs(2 * grad.real() - f0.real()), std::abs(2 * grad.imag() - (cplx(0, 1) * f1).real()));
}

}  // namespace

DerivativeCheck green_derivative_check_halfplane(double eps, const ProbePair& probe) {
  DerivativeCheck r;
  r.domain = "half-plane";
  r.eps = eps;
  r.probe = probe;
  const Site v2 = nearest_of_class(probe.z2 / eps, 1, 0);
  const Point z2 = position(v2, eps);
  const Site wx = nearest_of_class(probe.z1 / eps, 0, 0);
  const Site wy = nearest_of_class(probe.z1 / eps, 1, 1);
  r.dipole_x = (halfplane_green(wx + Site{1, 0}, v2) - halfplane_green(wx - Site{1, 0}, v2)) / eps;
  r.expected_x = 2 * green_gradient_halfplane(position(wx, eps), z2).real();
  r.dipole_y = (halfplane_green(wy + Site{0, 1}, v2) - halfplane_green(wy - Site{0, 1}, v2)) / eps;
  r.expected_y = 2 * green_gradient_halfplane(position(wy, eps), z2).imag();
  r.form_mismatch = form_mismatch(kernel_halfplane(KernelKind::F0), probe.z1, probe.z2,
                                  green_gradient_halfplane(probe.z1, probe.z2));
  // Source in the first B0 row above the Y row at height zero.
  const Site vb{nearest_of_class(probe.z1 / eps, 1, 0).x, 2};
  r.boundary_green = halfplane_green(vb, v2) / eps;
  r.boundary_expected = green_halfplane(position(vb, eps), z2) / eps;
  return r;
}

DerivativeCheck green_derivative_check_disk(double eps, const ProbePair& probe) {
  DerivativeCheck r;
  r.domain = "disk";
  r.eps = eps;
  r.probe = probe;
  RegionSpec disk;
  std::vector<Point> circle;
  const int n = std::max(64, static_cast<int>(8 / eps));
  for (int k = 0; k < n; ++k) circle.push_back(std::polar(1.0, 2 * kPi * k / n));
  disk.components.push_back(circle);
  disk.marked_points.push_back({0, -1});
  const auto tp = discretize_region(disk, eps);
  const GreenSolver solver(b0_prime_graph(tp));
  const SiteGraph& g = solver.graph();
  const Site v2 = nearest_of_class(probe.z2 / eps, 1, 0);
  const Point z2 = position(v2, eps);
  const int i2 = g.index_of(v2);
  if (i2 < 0) fail(ErrorKind::ProbeOutsideRegion, "probe outside the disk");
  // By symmetry G(a, v2) = G(v2, a): one solve from v2 serves every source.
  const auto from_v2 = solver.green(v2);
  auto at = [&](const Site& s) {
    const int i = g.index_of(s);
    if (i < 0) fail(ErrorKind::ProbeOutsideRegion, "probe outside the disk");
    return from_v2.values[i];
  };
  const Site wx = nearest_of_class(probe.z1 / eps, 0, 0);
  const Site wy = nearest_of_class(probe.z1 / eps, 1, 1);
  r.dipole_x = (at(wx + Site{1, 0}) - at(wx - Site{1, 0})) / eps;
  r.expected_x = 2 * green_gradient_disk(position(wx, eps), z2).real();
  r.dipole_y = (at(wy + Site{0, 1}) - at(wy - Site{0, 1})) / eps;
  r.expected_y = 2 * green_gradient_disk(position(wy, eps), z2).imag();
  r.form_mismatch = form_mismatch(kernel_disk(KernelKind::F0), probe.z1, probe.z2,
                                  green_gradient_disk(probe.z1, probe.z2));
  r.boundary_green = r.boundary_expected = std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace dimer
