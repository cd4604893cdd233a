#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "dimer/lattice.hpp"

namespace dimer {

using cplx = std::complex<double>;

// Weight of the white->black edge at white w pointing in direction b - w:
// 1, i, -1, -i for east, north, west, south.
cplx kasteleyn_weight(const Site& white, const Site& black);

// Weighted adjacency of the interior dual graph, factored once. The operator
// is K = [[0, A], [A^T, 0]] with A indexed by (white, black).
class KasteleynSystem {
 public:
  struct Impl;

  KasteleynSystem() = default;
  explicit KasteleynSystem(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  const SiteGraph& graph() const;
  std::size_t whites() const;
  std::size_t blacks() const;
  // Graph vertex of the k-th white / black unknown.
  int white_vertex(std::size_t k) const;
  int black_vertex(std::size_t k) const;
  // Row / column of a graph vertex, or -1 if it has the other color.
  int white_slot(int vertex) const;
  int black_slot(int vertex) const;

  bool singular() const;
  double log_abs_det() const;  // log |det A|

  // (A f)(w) for f on blacks, i.e. the d-bar stencil at every white.
  std::vector<cplx> apply(const std::vector<cplx>& on_blacks) const;
  // (A^H g)(b) for g on whites.
  std::vector<cplx> apply_adjoint(const std::vector<cplx>& on_whites) const;
  // Column of K^{-1}: values at the opposite color of `source`, indexed by slot.
  std::vector<cplx> inverse_column(int source_vertex) const;

  const Impl& impl() const { return *impl_; }

 private:
  std::shared_ptr<const Impl> impl_;
};

KasteleynSystem build_kasteleyn(const SiteGraph& m);

struct TilingCount {
  std::optional<std::uint64_t> exact;  // set when the count is below 1e15
  double log_count = 0.0;              // natural log; -inf when untilable
};
TilingCount count_tilings(const KasteleynSystem& ks);

// C(v1, .) on every vertex of the graph; zero on the source's color.
struct CouplingColumn {
  Site source;
  std::vector<cplx> values;  // indexed by graph vertex
};

CouplingColumn solve_coupling(const KasteleynSystem& ks, const Site& v1);
// Several columns, solved in parallel over sources.
std::vector<CouplingColumn> solve_couplings(const KasteleynSystem& ks,
                                            const std::vector<Site>& sources, int threads = 1);

// Probability that all listed (white, black) dominoes appear in a uniform tiling.
double edge_set_probability(const KasteleynSystem& ks,
                            const std::vector<std::pair<Site, Site>>& edges);

// White vertices where the d-bar stencil of f (zero outside the graph) is
// nonzero. f must be real on one black class and imaginary on the other.
std::vector<Site> check_discrete_analytic(const std::vector<cplx>& f, const SiteGraph& m,
                                          double tol = 1e-9);

// 4 f(v) - sum of the neighbours' values (missing neighbours count as 0).
std::vector<double> laplacian_apply(const std::vector<double>& f, const SiteGraph& g);

void write_coupling_csv(std::ostream& out, const CouplingColumn& c, const SiteGraph& m,
                        double eps = 1.0);

}  // namespace dimer
