#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dimer/kasteleyn.hpp"
#include "dimer/lattice.hpp"

namespace dimer {

// Dirichlet Green's function on a B0' graph: Laplacian (4f minus the sum of
// neighbours) equal to the unit mass at the source, zero on Y and on the
// exposed set V except at the source itself.
struct GreensField {
  Site source;
  std::vector<double> values;  // indexed by graph vertex
};

// One Laplacian factorization per B0' graph, shared read-only by all solves.
// Built from a Temperleyan host it also knows which boundary loop each
// boundary crossing belongs to, so per-component outflows can be measured.
class GreenSolver {
 public:
  struct Impl;

  explicit GreenSolver(const SiteGraph& b0_prime);
  explicit GreenSolver(const TemperleyanPolyomino& tp);

  const SiteGraph& graph() const;
  // Number of boundary loops (0 when built from a bare graph).
  std::size_t components() const;

  // Sources in Y give the zero field.
  GreensField green(const Site& w1) const;
  // Net current leaving the network through each boundary loop.
  std::vector<double> outflows(const std::vector<double>& values) const;

 private:
  std::shared_ptr<const Impl> impl_;
};

GreensField dirichlet_green(const SiteGraph& g, const Site& w1);
double flux_out_of_component(const GreenSolver& solver, const GreensField& f, int component);

// Outflows through the hole loops: matrix(i, j) is the outflow through hole i
// of G(d_j, .), rhs(i) that of the source dipole.
struct FluxSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  double gap = 0.0;          // min over columns of |diagonal| - sum of other |entries|
  double determinant = 0.0;  // det(-matrix)
};

struct AlphaSolution {
  std::vector<double> alpha;
  FluxSystem system;
};

// Currents at the exposed squares cancelling the dipole's outflow through each
// hole. Throws DominanceViolated unless every column is diagonally dominant
// with a negative diagonal and det(-matrix) > gap^k.
AlphaSolution solve_alpha(const GreenSolver& solver, const TemperleyanPolyomino& tp, const Site& v1);
AlphaSolution solve_alpha(const TemperleyanPolyomino& tp, const Site& v1);

struct GreenCoupling {
  CouplingColumn column;  // indexed by interior_dual(tp) vertex
  std::vector<double> alpha;
  // Largest misfit of the d-bar equation on the whites the spanning tree of
  // the B1 dual did not use.
  double conjugate_residual = 0.0;
  // Outflow through each hole of the assembled real part; the conjugate's
  // period around that hole.
  std::vector<double> hole_periods;
};

// Coupling column built from Green's functions: the B0 part from the dipole
// and the exposed-square currents, the B1 part by propagating the d-bar
// equations along a spanning tree of the B1 dual rooted at d0 (value 0).
// With correct = false the currents are omitted and nothing is thrown, which
// exhibits the multivalued conjugate.
GreenCoupling coupling_from_green_report(const GreenSolver& solver, const TemperleyanPolyomino& tp,
                                         const Site& v1, bool correct = true);
// Throws ConjugateNotSingleValued if the residual exceeds 1e-8.
CouplingColumn coupling_from_green(const TemperleyanPolyomino& tp, const Site& v1);

// Continuum kernels.
enum class KernelKind { F0, F1, FPlus, FMinus, F0Star, F1Star, FPlusStar };
const char* to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& s);

using KernelFn = std::function<cplx(cplx, cplx)>;

// F0 and F1 of one domain; every kind is derived from this pair.
struct KernelPair {
  KernelFn f0;
  KernelFn f1;
};

struct AnalyticKernel {
  KernelKind kind = KernelKind::F0;
  std::string domain;
  KernelPair pair;

  cplx operator()(cplx z1, cplx z2) const;
  AnalyticKernel as(KernelKind k) const { return {k, domain, pair}; }
};

// z -> (a z + b) / (c z + d).
struct Mobius {
  cplx a{1}, b{0}, c{0}, d{1};

  cplx operator()(cplx z) const { return (a * z + b) / (c * z + d); }
  cplx derivative(cplx z) const {
    const cplx den = c * z + d;
    return (a * d - b * c) / (den * den);
  }
  Mobius inverse() const { return {d, -b, -c, a}; }
  // (this o g)(z) = this(g(z)).
  Mobius compose(const Mobius& g) const {
    return {a * g.a + b * g.c, a * g.b + b * g.d, c * g.a + d * g.c, c * g.b + d * g.d};
  }
};

// Upper half-plane kernels with d0 at infinity (nullopt) or at a real point.
AnalyticKernel kernel_halfplane(KernelKind kind, std::optional<double> d0 = std::nullopt);
// Unit disk kernels with d0 = e^{i theta}.
AnalyticKernel kernel_disk(KernelKind kind, double theta = 0.0);

// Kernel on U from the kernel on V = f(U): F+ picks up f'(z1), F- its conjugate.
AnalyticKernel mobius_transport(const AnalyticKernel& on_image, const Mobius& f,
                                const std::string& domain = "transported");

// Tabulated (1/eps)(C - C0) at probe pairs over a sequence of hosts.
struct ProbePair {
  Point z1;
  Point z2;
};

struct KernelTable {
  KernelKind kind = KernelKind::F0Star;
  std::vector<double> eps;                  // decreasing
  std::vector<ProbePair> probes;
  std::vector<std::vector<cplx>> values;    // [eps][probe]
  std::vector<cplx> extrapolated;           // two-point Richardson in eps
  std::vector<double> ratio;                // successive-difference ratio of the last three eps
};

struct KernelHost {
  double eps;
  TemperleyanPolyomino tp;  // square {x, y} sits at eps * (x, y)
};

// kind is F0Star (W0 sources) or F1Star (W1 sources). Probes closer than xi to
// the host boundary throw ProbesTooCloseToBoundary; xi defaults to a tenth of
// the boundary diameter of the coarsest host.
KernelTable kernel_numeric(const std::vector<KernelHost>& hosts, KernelKind kind,
                           const std::vector<ProbePair>& probes,
                           std::optional<double> xi = std::nullopt, int threads = 1);
void write_kernel_csv(std::ostream& out, const KernelTable& t);

// Lattice Green's function of the half-plane y > 0 on the B0 lattice (Y row
// at y = 0), by reflection of the whole-plane one. Unit lattice coordinates.
double halfplane_green(const Site& v1, const Site& v2);

// Continuum Green's functions, normalized as -(1/2pi) log|z2 - z1| + harmonic.
double green_halfplane(cplx z1, cplx z2);
double green_disk(cplx z1, cplx z2);
// Gradient in z1 as dx1 + i dy1.
cplx green_gradient_halfplane(cplx z1, cplx z2);
cplx green_gradient_disk(cplx z1, cplx z2);

struct DerivativeCheck {
  std::string domain;
  double eps = 0.0;
  ProbePair probe;
  double dipole_x = 0.0, expected_x = 0.0;  // (1/eps)(G(v1+eps) - G(v1-eps)) vs 2 dg/dx1
  double dipole_y = 0.0, expected_y = 0.0;  // same along y
  // max |2 dg - Re(F0 dx1 + i F1 dy1)| over both directions, from the kernels
  double form_mismatch = 0.0;
  double boundary_green = 0.0, boundary_expected = 0.0;  // Green's function with a source next to the boundary

  double relative_error_x() const;
  double relative_error_y() const;
  double relative_error_boundary() const;
};

// Half-plane: exact lattice half-plane Green's function. Disk: Dirichlet solve
// on the discretized unit disk at spacing eps.
DerivativeCheck green_derivative_check_halfplane(double eps, const ProbePair& probe);
DerivativeCheck green_derivative_check_disk(double eps, const ProbePair& probe);

}  // namespace dimer
