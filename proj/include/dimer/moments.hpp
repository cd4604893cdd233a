#pragma once

#include <cstdint>
#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dimer/greens.hpp"
#include "dimer/height.hpp"
#include "dimer/lattice.hpp"
#include "dimer/sampler.hpp"

namespace dimer {

// One Monte Carlo statistic with its standard error and, when a closed form
// exists, the predicted value.
struct MomentReport {
  std::string label;
  double estimate = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(n_samples)
  std::optional<double> theory;
  std::size_t n_samples = 0;
  nlohmann::json config = nlohmann::json::object();

  // |estimate - theory| in units of std_error (NaN without theory).
  double z_score() const;
};

nlohmann::json to_json(const MomentReport& r);
void write_reports_csv(std::ostream& out, const std::vector<MomentReport>& reports);

// Mean and standard error of per-sample values, summed in index order so the
// result does not depend on the thread count.
MomentReport summarize(const std::vector<double>& values, std::string label = {});

// Lattice vertex nearest to a physical point.
Vertex nearest_vertex(Point p, double eps);

// Monte Carlo mean height at each probe, in the canonical gauge.
std::vector<MomentReport> mean_height_estimate(const TemperleyanPolyomino& tp,
                                               const std::vector<Vertex>& probes, std::size_t n,
                                               std::uint64_t seed, int threads = 1);

// Harmonic extension of 1/2 + 2 theta / pi, where theta is the total turning
// of the outer boundary counterclockwise from the marked point d0'. Solved by
// a Shortley-Weller finite-difference scheme with `resolution` grid steps
// across the larger side of the bounding box. Simply connected regions only.
class MeanHeightTheory {
 public:
  explicit MeanHeightTheory(const RegionSpec& spec, int resolution = 400);
  // Throws ProbeOutsideRegion.
  double operator()(Point probe) const;
  // Boundary data at a point of the outer boundary.
  double boundary_value(Point on_boundary) const;
  double step() const { return h_; }

 private:
  std::vector<Point> loop_;
  std::vector<double> theta_;  // turning accumulated up to the start of each segment
  std::size_t marked_segment_ = 0;
  double marked_t_ = 0.0, total_turning_ = 0.0;
  double h_ = 0.0, x0_ = 0.0, y0_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<int> index_;  // grid node -> unknown, or -1 outside
  std::vector<double> values_;

  double value_on_segment(std::size_t k, double t) const;
};

double mean_height_theory(const RegionSpec& spec, Point probe, int resolution = 400);
// 1/2 + (4/pi) arg(z - d0) on the upper half-plane; 1/2 with d0 at infinity.
double halfplane_mean_height(Point z, std::optional<double> d0 = std::nullopt);

// (8/pi^2) Re log((conj(p) - q) / (p - q)). Throws CoincidentPoints.
double two_point_halfplane(cplx p, cplx q);

// Empirical E[(h(p) - mean h(p)) (h(q) - mean h(q))] per vertex pair.
std::vector<MomentReport> two_point_estimate(const TemperleyanPolyomino& tp,
                                             const std::vector<std::pair<Vertex, Vertex>>& pairs,
                                             std::size_t n, std::uint64_t seed, int threads = 1);

// Central moment E[prod_j (h_j - mean h_j)^{powers_j}] at one mark per
// boundary component. Marks must be lattice vertices on distinct host loops
// with even x and odd y (lower-left corners of B1 squares), else
// BadMarkParity.
MomentReport boundary_moment_estimate(const TemperleyanPolyomino& tp, const std::vector<Vertex>& marks,
                                      const std::vector<int>& powers, std::size_t n,
                                      std::uint64_t seed, int threads = 1);

// Smooth pieces joined at `breaks` (parameters in (0, 1) where the velocity
// may jump); the parameter runs over [0, 1].
struct Path {
  std::function<Point(double)> at;
  std::function<Point(double)> velocity;
  std::vector<double> breaks;

  Point start() const { return at(0.0); }
  Point end() const { return at(1.0); }
};

Path segment_path(Point a, Point b);
Path polyline_path(const std::vector<Point>& points);
// Quadratic Bezier from a to b with control point c.
Path bezier_path(Point a, Point c, Point b);
Path mobius_image(const Path& p, const Mobius& f);

struct MomentIntegral {
  cplx value;                // the imaginary part is a quadrature diagnostic
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
};

// (-i)^K times the sum over signs e in {+1,-1}^K of e_1...e_K times the K-fold
// path integral of det[F_{e_i,e_j}(z_i, z_j)] (zero diagonal) against
// dz_j or dzbar_j. Only the kernel's F0/F1 pair is used. Nested adaptive
// Gauss-Legendre panels. Throws PathsIntersect.
MomentIntegral moment_integral(const AnalyticKernel& kernel, const std::vector<Path>& paths,
                               double tolerance = 1e-10);

// Number of double-dimer cycles of two tilings of the same annular host that
// separate its hole from the outer boundary.
int separating_cycles(const Tiling& a, const Tiling& b, const TemperleyanPolyomino& tp);

struct CycleReport {
  MomentReport cycles;             // E[#separating cycles]
  MomentReport variance_over_16;   // Var(height difference) / 16
  double variance = 0.0, variance_std_error = 0.0;
  std::vector<std::size_t> histogram;  // pairs by cycle count
  double combined_z() const;  // (cycles - variance/16) over the combined error
};

// Independent tiling pairs (samples 2i and 2i+1); the height difference is
// read at the first vertex of the hole loop. Throws NotAnnular unless the
// host has exactly one hole.
CycleReport cycle_statistics(const TemperleyanPolyomino& tp, std::size_t pairs, std::uint64_t seed,
                             int threads = 1);

struct GrowthPoint {
  double eps = 0.0;
  Vertex probe;
  MomentReport variance;
};

struct GrowthFit {
  std::vector<GrowthPoint> points;
  double slope = 0.0, slope_std_error = 0.0;
  double intercept = 0.0, intercept_std_error = 0.0;
  // Quadratic term of a second fit in log(1/eps); a trend check.
  double curvature = 0.0, curvature_std_error = 0.0;
  double chi2 = 0.0;  // of the linear fit
};

// Var(h(center)) on the discretized region for each eps, fitted linearly
// against log(1/eps) with inverse-variance weights.
GrowthFit variance_growth(const RegionSpec& region, Point center, const std::vector<double>& eps,
                          std::size_t n, std::uint64_t seed, int threads = 1);

}  // namespace dimer
