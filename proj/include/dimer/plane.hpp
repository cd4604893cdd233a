#pragma once

#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "dimer/kasteleyn.hpp"
#include "dimer/lattice.hpp"

namespace dimer {

// Potential kernel of simple random walk on Z^2, normalized so a(0) = 0 and
// a(1, 0) = 1. Grows like (2/pi) log|x|.
double potential_kernel(int m, int n);

// Whole-plane coupling C0(0, z), origin in W0. Zero on whites, real on B0,
// imaginary on B1. Evaluated by a one-dimensional reduction of the Fourier
// integral (the inner angle is done by residues).
cplx c0_value(const Site& z);
// Same quantity through the Green's function route, Re C0(0, w) =
// G0((w-1)/2) - G0((w+1)/2) on B0 and rotation for B1. Independent cross-check.
cplx c0_from_green(const Site& z);

// |C0(0, z) - proj(1 / (pi z))| with proj = Re on B0 and i Im on B1.
double c0_asymptotic_deficit(const Site& z);

// G0(0, a) - G0(0, b) for the Green's function of the B0 lattice in its own
// unit coordinates (Laplacian 4f - sum of neighbours).
double g0_difference(const Site& a, const Site& b);

// c0 in G0(0, v) = -(1/2pi) log|v| + c0 + O(|v|^-2), with the gauge G0(0, 0) = 0,
// fitted from the potential kernel along the axis.
struct ConstantFit {
  double value = 0.0;
  double error = 0.0;
};
ConstantFit c0_constant();

// Upper half-plane coupling by the image method; v1 white, v2 black.
cplx half_plane_coupling(const Site& v1, const Site& v2);

// Coupling from the W0 origin on the 2n x 2n square [-n, n-1]^2, made odd
// under z -> -z to cancel the off-centre term, at the requested points.
std::vector<cplx> square_coupling(int n, const std::vector<Site>& points);
// Richardson extrapolation of square_coupling in 1/n^2 over doubling sizes.
std::vector<cplx> square_coupling_extrapolated(const std::vector<Site>& points,
                                               const std::vector<int>& sizes = {64, 128, 256});

enum class C0Method { Quadrature, SquareExtrapolation };

// Memoized C0(0, .) with an on-disk JSON copy. Reads are concurrent; inserts
// take an exclusive lock.
class PlaneCoupling {
 public:
  explicit PlaneCoupling(C0Method method = C0Method::Quadrature) : method_(method) {}

  cplx value(const Site& z);
  C0Method method() const { return method_; }
  std::size_t size() const;

  void load(const std::string& path);
  void save(const std::string& path) const;

 private:
  C0Method method_;
  mutable std::shared_mutex mutex_;
  std::map<std::pair<int, int>, cplx> cache_;
};

}  // namespace dimer
