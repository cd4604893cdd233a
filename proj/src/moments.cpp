#include "dimer/moments.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <ostream>
#include <thread>

namespace dimer {

namespace {

constexpr double kPi = std::numbers::pi;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw DimerError(kind, msg); }

// Runs body(i) for i in [0, n) on `threads` workers, round-robin.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  threads = std::max(1, threads);
  auto work = [&](int w) {
    for (std::size_t i = static_cast<std::size_t>(w); i < n; i += static_cast<std::size_t>(threads)) body(i);
  };
  if (threads == 1) {
    work(0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        work(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample variance and the standard error of that variance estimate.
std::pair<double, double> variance_with_error(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = mean_of(v);
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  const double var = m2 / (n - 1);
  m4 /= n;
  const double pop = m2 / n;
  return {var, std::sqrt(std::max(0.0, m4 - pop * pop) / n)};
}

int height_at(const HeightField& h, const Vertex& v) {
  if (!h.has(v)) fail(ErrorKind::ProbeOutsideRegion, "vertex (" + std::to_string(v.x) + ", " +
                                                         std::to_string(v.y) + ") is not on the host");
  return h.at(v);
}

// Per-sample heights at the given vertices, canonical gauge.
std::vector<std::vector<double>> sample_heights(const TemperleyanPolyomino& tp, const std::vector<Vertex>& at,
                                                std::size_t n, std::uint64_t seed, int threads) {
  const TemperleyMap map(tp);
  const auto [base, base_value] = canonical_gauge(tp);
  std::vector<std::vector<double>> out(at.size(), std::vector<double>(n));
  for_each_sample(map, n, seed, threads, [&](int, std::size_t i, const Tiling& t, const SpanningForest&) {
    const HeightField h = height_field(t, base, base_value);
    for (std::size_t k = 0; k < at.size(); ++k) out[k][i] = height_at(h, at[k]);
  });
  return out;
}

nlohmann::json vertex_json(const Vertex& v) { return nlohmann::json::array({v.x, v.y}); }

}  // namespace

double MomentReport::z_score() const {
  if (!theory) return std::numeric_limits<double>::quiet_NaN();
  return std::abs(estimate - *theory) / std_error;
}

nlohmann::json to_json(const MomentReport& r) {
  nlohmann::json j;
  j["label"] = r.label;
  j["estimate"] = r.estimate;
  j["stderr"] = r.std_error;
  j["theory"] = r.theory ? nlohmann::json(*r.theory) : nlohmann::json(nullptr);
  j["n_samples"] = r.n_samples;
  j["config"] = r.config;
  return j;
}

void write_reports_csv(std::ostream& out, const std::vector<MomentReport>& reports) {
  out << "label,estimate,stderr,theory,n_samples\n";
  out.precision(12);
  for (const auto& r : reports) {
    out << r.label << ',' << r.estimate << ',' << r.std_error << ',';
    if (r.theory) out << *r.theory;
    out << ',' << r.n_samples << '\n';
  }
}

MomentReport summarize(const std::vector<double>& values, std::string label) {
  MomentReport r;
  r.label = std::move(label);
  r.n_samples = values.size();
  r.estimate = mean_of(values);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double x : values) ss += (x - r.estimate) * (x - r.estimate);
    r.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
  return r;
}

Vertex nearest_vertex(Point p, double eps) {
  return {static_cast<int>(std::lround(p.real() / eps + 0.5)), static_cast<int>(std::lround(p.imag() / eps + 0.5))};
}

std::vector<MomentReport> mean_height_estimate(const TemperleyanPolyomino& tp,
                                               const std::vector<Vertex>& probes, std::size_t n,
                                               std::uint64_t seed, int threads) {
  const auto heights = sample_heights(tp, probes, n, seed, threads);
  std::vector<MomentReport> out;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    auto r = summarize(heights[k], "mean_height");
    r.config = {{"probe", vertex_json(probes[k])}, {"seed", seed}};
    out.push_back(std::move(r));
  }
  return out;
}

// ---- Mean height theory ----

namespace {

struct Crossing {
  double at;  // coordinate along the scan line
  std::size_t segment;
  double t;  // parameter on the segment
};

// Crossings of the closed polyline with the line {coordinate axis = c}.
std::vector<Crossing> scan(const std::vector<Point>& loop, double c, bool horizontal) {
  std::vector<Crossing> out;
  for (std::size_t k = 0; k < loop.size(); ++k) {
    const Point p = loop[k], q = loop[(k + 1) % loop.size()];
    const double pa = horizontal ? p.imag() : p.real(), qa = horizontal ? q.imag() : q.real();
    if ((pa > c) == (qa > c)) continue;
    const double t = (c - pa) / (qa - pa);
    const Point x = p + t * (q - p);
    out.push_back({horizontal ? x.real() : x.imag(), k, t});
  }
  std::sort(out.begin(), out.end(), [](const Crossing& a, const Crossing& b) { return a.at < b.at; });
  return out;
}

double polygon_area(const std::vector<Point>& c) {
  double a = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point p = c[i], q = c[(i + 1) % c.size()];
    a += p.real() * q.imag() - q.real() * p.imag();
  }
  return a / 2;
}

bool inside_polygon(const std::vector<Point>& c, Point p) {
  const auto xs = scan(c, p.imag(), true);
  std::size_t left = 0;
  for (const auto& x : xs) left += x.at < p.real();
  return left % 2 == 1;
}

}  // namespace

MeanHeightTheory::MeanHeightTheory(const RegionSpec& spec, int resolution) {
  if (spec.components.size() != 1)
    fail(ErrorKind::Unsupported, "mean height theory needs a simply connected region");
  if (spec.marked_points.empty()) fail(ErrorKind::Unsupported, "mean height theory needs the marked point d0'");
  if (resolution < 8) fail(ErrorKind::Unsupported, "resolution too small");
  loop_ = spec.components[0];
  if (polygon_area(loop_) < 0) std::reverse(loop_.begin(), loop_.end());
  const std::size_t m = loop_.size();

  // Segment holding the marked point.
  const Point mark = spec.marked_points[0];
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) {
    const Point a = loop_[k], d = loop_[(k + 1) % m] - a;
    const double t = std::clamp(((mark - a) * std::conj(d)).real() / std::norm(d), 0.0, 1.0);
    const double dist = std::abs(mark - (a + t * d));
    if (dist < best) {
      best = dist;
      marked_segment_ = k;
      marked_t_ = t;
    }
  }
  theta_.assign(m, 0.0);
  auto dir = [&](std::size_t k) { return loop_[(k + 1) % m] - loop_[k]; };
  double acc = 0.0;
  for (std::size_t s = 1; s <= m; ++s) {
    const std::size_t k = (marked_segment_ + s) % m;
    acc += std::arg(dir(k) / dir((k + m - 1) % m));
    if (s < m) theta_[k] = acc;
  }
  total_turning_ = acc;

  double x1 = -std::numeric_limits<double>::infinity(), y1 = x1;
  x0_ = y0_ = std::numeric_limits<double>::infinity();
  for (const auto& p : loop_) {
    x0_ = std::min(x0_, p.real());
    y0_ = std::min(y0_, p.imag());
    x1 = std::max(x1, p.real());
    y1 = std::max(y1, p.imag());
  }
  h_ = std::max(x1 - x0_, y1 - y0_) / resolution;
  // An irrational shift keeps grid lines off polyline vertices.
  const double shift = (0.5 + 1e-3 * kPi) * h_;
  x0_ -= h_ - shift;
  y0_ -= h_ - shift;
  nx_ = static_cast<int>(std::ceil((x1 - x0_) / h_)) + 2;
  ny_ = static_cast<int>(std::ceil((y1 - y0_) / h_)) + 2;

  std::vector<std::vector<Crossing>> rows(ny_), cols(nx_);
  for (int j = 0; j < ny_; ++j) rows[j] = scan(loop_, y0_ + j * h_, true);
  for (int i = 0; i < nx_; ++i) cols[i] = scan(loop_, x0_ + i * h_, false);

  index_.assign(static_cast<std::size_t>(nx_) * ny_, -1);
  int unknowns = 0;
  for (int j = 0; j < ny_; ++j) {
    std::size_t c = 0;
    for (int i = 0; i < nx_; ++i) {
      const double x = x0_ + i * h_;
      while (c < rows[j].size() && rows[j][c].at < x) ++c;
      if (c % 2 == 1) index_[static_cast<std::size_t>(j) * nx_ + i] = unknowns++;
    }
  }
  if (unknowns == 0) fail(ErrorKind::ResolutionTooCoarse, "no grid node inside the region");

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const int row = index_[static_cast<std::size_t>(j) * nx_ + i];
      if (row < 0) continue;
      const double x = x0_ + i * h_, y = y0_ + j * h_;
      double diag = 0.0;
      // One axis at a time: arms to the first crossing or the next node.
      for (int axis = 0; axis < 2; ++axis) {
        const auto& line = axis == 0 ? rows[j] : cols[i];
        const double here = axis == 0 ? x : y;
        double arm[2];
        double value[2];
        int node[2];
        for (int side = 0; side < 2; ++side) {
          const int s = side == 0 ? -1 : 1;
          const int ni = axis == 0 ? i + s : i, nj = axis == 0 ? j : j + s;
          const double next = here + s * h_;
          const Crossing* hit = nullptr;
          for (const auto& c : line)
            if ((s > 0 && c.at > here && c.at <= next) || (s < 0 && c.at < here && c.at >= next))
              if (!hit || std::abs(c.at - here) < std::abs(hit->at - here)) hit = &c;
          if (hit) {
            arm[side] = std::max(std::abs(hit->at - here), 1e-9 * h_);
            value[side] = value_on_segment(hit->segment, hit->t);
            node[side] = -1;
          } else {
            arm[side] = h_;
            node[side] = index_[static_cast<std::size_t>(nj) * nx_ + ni];
            value[side] = 0.0;
          }
        }
        const double a = arm[0], b = arm[1];
        const double ca = 2 / (a * (a + b)), cb = 2 / (b * (a + b));
        diag += 2 / (a * b);
        for (int side = 0; side < 2; ++side) {
          const double coef = side == 0 ? ca : cb;
          if (node[side] >= 0)
            trip.emplace_back(row, node[side], -coef);
          else
            rhs(row) += coef * value[side];
        }
      }
      trip.emplace_back(row, row, diag);
    }
  Eigen::SparseMatrix<double> A(unknowns, unknowns);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) fail(ErrorKind::SingularSystem, "mean height Dirichlet problem");
  const Eigen::VectorXd u = lu.solve(rhs);
  values_.assign(u.data(), u.data() + u.size());
}

double MeanHeightTheory::value_on_segment(std::size_t k, double t) const {
  const double theta = k == marked_segment_ ? (t >= marked_t_ ? 0.0 : total_turning_) : theta_[k];
  return 0.5 + 2 * theta / kPi;
}

double MeanHeightTheory::boundary_value(Point p) const {
  const std::size_t m = loop_.size();
  double best = std::numeric_limits<double>::infinity();
  std::size_t seg = 0;
  double par = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const Point a = loop_[k], d = loop_[(k + 1) % m] - a;
    const double t = std::clamp(((p - a) * std::conj(d)).real() / std::norm(d), 0.0, 1.0);
    const double dist = std::abs(p - (a + t * d));
    if (dist < best) {
      best = dist;
      seg = k;
      par = t;
    }
  }
  return value_on_segment(seg, par);
}

double MeanHeightTheory::operator()(Point p) const {
  if (!inside_polygon(loop_, p)) fail(ErrorKind::ProbeOutsideRegion, "probe outside the region");
  const double fx = (p.real() - x0_) / h_, fy = (p.imag() - y0_) / h_;
  const int i = static_cast<int>(std::floor(fx)), j = static_cast<int>(std::floor(fy));
  const double s = fx - i, t = fy - j;
  double acc = 0.0, wsum = 0.0;
  double nearest = std::numeric_limits<double>::quiet_NaN(), nearest_d = std::numeric_limits<double>::infinity();
  for (int dj = 0; dj < 2; ++dj)
    for (int di = 0; di < 2; ++di) {
      const int ii = i + di, jj = j + dj;
      if (ii < 0 || jj < 0 || ii >= nx_ || jj >= ny_) continue;
      const int k = index_[static_cast<std::size_t>(jj) * nx_ + ii];
      if (k < 0) continue;
      const double w = (di ? s : 1 - s) * (dj ? t : 1 - t);
      acc += w * values_[k];
      wsum += w;
      const double d = std::hypot(di - s, dj - t);
      if (d < nearest_d) {
        nearest_d = d;
        nearest = values_[k];
      }
    }
  if (wsum > 0.999999) return acc / wsum;
  // Next to the boundary: fall back to the nearest node or the boundary data.
  if (!std::isnan(nearest)) return nearest;
  return boundary_value(p);
}

double mean_height_theory(const RegionSpec& spec, Point probe, int resolution) {
  return MeanHeightTheory(spec, resolution)(probe);
}

double halfplane_mean_height(Point z, std::optional<double> d0) {
  if (z.imag() <= 0) fail(ErrorKind::ProbeOutsideRegion, "probe not in the upper half-plane");
  if (!d0) return 0.5;
  return 0.5 + 4 / kPi * std::arg(z - *d0);
}

double two_point_halfplane(cplx p, cplx q) {
  if (p == q) fail(ErrorKind::CoincidentPoints, "p and q coincide");
  if (p.imag() <= 0 || q.imag() <= 0) fail(ErrorKind::ProbeOutsideRegion, "points must lie in the upper half-plane");
  return 8 / (kPi * kPi) * std::log(std::abs((std::conj(p) - q) / (p - q)));
}

std::vector<MomentReport> two_point_estimate(const TemperleyanPolyomino& tp,
                                             const std::vector<std::pair<Vertex, Vertex>>& pairs,
                                             std::size_t n, std::uint64_t seed, int threads) {
  std::vector<Vertex> at;
  for (const auto& [p, q] : pairs) {
    at.push_back(p);
    at.push_back(q);
  }
  const auto heights = sample_heights(tp, at, n, seed, threads);
  std::vector<MomentReport> out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& hp = heights[2 * k];
    const auto& hq = heights[2 * k + 1];
    const double mp = mean_of(hp), mq = mean_of(hq);
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = (hp[i] - mp) * (hq[i] - mq);
    auto r = summarize(prod, "two_point");
    // Unbiased covariance.
    if (n > 1) r.estimate *= static_cast<double>(n) / static_cast<double>(n - 1);
    r.config = {{"p", vertex_json(pairs[k].first)}, {"q", vertex_json(pairs[k].second)}, {"seed", seed}};
    out.push_back(std::move(r));
  }
  return out;
}

MomentReport boundary_moment_estimate(const TemperleyanPolyomino& tp, const std::vector<Vertex>& marks,
                                      const std::vector<int>& powers, std::size_t n, std::uint64_t seed,
                                      int threads) {
  if (marks.size() != powers.size()) fail(ErrorKind::Unsupported, "one power per mark is required");
  std::vector<int> loop_of(marks.size(), -1);
  const auto& loops = tp.host().loops();
  for (std::size_t k = 0; k < marks.size(); ++k) {
    const Vertex v = marks[k];
    if (v.x % 2 != 0 || (v.y % 2 + 2) % 2 != 1)
      fail(ErrorKind::BadMarkParity, "mark (" + std::to_string(v.x) + ", " + std::to_string(v.y) +
                                         ") is not a lower-left corner of a B1 square");
    for (std::size_t l = 0; l < loops.size() && loop_of[k] < 0; ++l)
      for (const auto& u : loops[l].vertices)
        if (u.x == v.x && u.y == v.y) {
          loop_of[k] = static_cast<int>(l);
          break;
        }
    if (loop_of[k] < 0) fail(ErrorKind::BadMarkParity, "mark is not on the host boundary");
    for (std::size_t j = 0; j < k; ++j)
      if (loop_of[j] == loop_of[k]) fail(ErrorKind::BadMarkParity, "two marks on one boundary component");
    if (powers[k] < 0) fail(ErrorKind::Unsupported, "powers must be nonnegative");
  }
  const auto heights = sample_heights(tp, marks, n, seed, threads);
  std::vector<double> means;
  for (const auto& h : heights) means.push_back(mean_of(h));
  std::vector<double> prod(n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < marks.size(); ++k) prod[i] *= std::pow(heights[k][i] - means[k], powers[k]);
  auto r = summarize(prod, "boundary_moment");
  nlohmann::json jm = nlohmann::json::array();
  for (const auto& v : marks) jm.push_back(vertex_json(v));
  r.config = {{"marks", jm}, {"powers", powers}, {"seed", seed}};
  return r;
}

// ---- Contour integrals ----

Path segment_path(Point a, Point b) {
  return {[a, b](double t) { return a + t * (b - a); }, [a, b](double) { return b - a; }, {}};
}

Path polyline_path(const std::vector<Point>& pts) {
  if (pts.size() < 2) fail(ErrorKind::Unsupported, "a path needs two points");
  const double pieces = static_cast<double>(pts.size() - 1);
  auto locate = [pts, pieces](double t) {
    const double s = std::clamp(t, 0.0, 1.0) * pieces;
    const std::size_t k = std::min(static_cast<std::size_t>(s), pts.size() - 2);
    return std::pair<std::size_t, double>{k, s - static_cast<double>(k)};
  };
  Path p;
  p.at = [pts, locate](double t) {
    const auto [k, u] = locate(t);
    return pts[k] + u * (pts[k + 1] - pts[k]);
  };
  p.velocity = [pts, locate, pieces](double t) {
    const auto [k, u] = locate(t);
    return (pts[k + 1] - pts[k]) * pieces;
  };
  for (std::size_t k = 1; k + 1 < pts.size(); ++k) p.breaks.push_back(static_cast<double>(k) / pieces);
  return p;
}

Path bezier_path(Point a, Point c, Point b) {
  return {[a, b, c](double t) { return (1 - t) * (1 - t) * a + 2 * t * (1 - t) * c + t * t * b; },
          [a, b, c](double t) { return 2 * (1 - t) * (c - a) + 2 * t * (b - c); },
          {}};
}

Path mobius_image(const Path& p, const Mobius& f) {
  return {[p, f](double t) { return f(p.at(t)); },
          [p, f](double t) { return f.derivative(p.at(t)) * p.velocity(t); },
          p.breaks};
}

namespace {

using Gauss = boost::math::quadrature::gauss<double, 20>;

bool segments_meet(Point a, Point b, Point c, Point d) {
  auto cross = [](Point u, Point v) { return u.real() * v.imag() - u.imag() * v.real(); };
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  const double scale = 1e-14 * (std::norm(b - a) + std::norm(d - c));
  if (((d1 > scale && d2 < -scale) || (d1 < -scale && d2 > scale)) &&
      ((d3 > scale && d4 < -scale) || (d3 < -scale && d4 > scale)))
    return true;
  auto on = [&](Point p, Point q, Point r, double o) {
    return std::abs(o) <= scale && std::min(p.real(), q.real()) - 1e-12 <= r.real() &&
           r.real() <= std::max(p.real(), q.real()) + 1e-12 && std::min(p.imag(), q.imag()) - 1e-12 <= r.imag() &&
           r.imag() <= std::max(p.imag(), q.imag()) + 1e-12;
  };
  return on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4);
}

std::vector<Point> sample_path(const Path& p, int pieces) {
  std::vector<double> ts;
  for (int k = 0; k <= pieces; ++k) ts.push_back(static_cast<double>(k) / pieces);
  ts.insert(ts.end(), p.breaks.begin(), p.breaks.end());
  std::sort(ts.begin(), ts.end());
  std::vector<Point> out;
  for (double t : ts) out.push_back(p.at(t));
  return out;
}

struct Integrator {
  const std::vector<Path>& paths;
  std::size_t k;
  std::vector<std::vector<double>> knots;  // per path: 0, breaks..., 1
  const AnalyticKernel& kernel;
  double tolerance;
  std::size_t evaluations = 0;
  std::vector<Point> z, v;

  cplx integrand() {
    ++evaluations;
    const std::size_t n = k;
    Eigen::MatrixXcd fp(n, n), fm(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) {
          fp(i, j) = fm(i, j) = 0;
          continue;
        }
        const cplx f0 = kernel.pair.f0(z[i], z[j]), f1 = kernel.pair.f1(z[i], z[j]);
        fp(i, j) = f0 + f1;
        fm(i, j) = f0 - f1;
      }
    cplx total = 0;
    Eigen::MatrixXcd m(n, n);
    for (std::size_t signs = 0; signs < (std::size_t{1} << n); ++signs) {
      // Bit i set means e_i = -1.
      auto minus = [signs](std::size_t i) { return (signs >> i) & 1; };
      cplx weight = 1;
      for (std::size_t i = 0; i < n; ++i) weight *= minus(i) ? -std::conj(v[i]) : v[i];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) {
            m(i, j) = 0;
            continue;
          }
          const bool mi = minus(i), mj = minus(j);
          m(i, j) = !mi && !mj ? fp(i, j) : mi && !mj ? fm(i, j) : !mi && mj ? std::conj(fm(i, j)) : std::conj(fp(i, j));
        }
      total += weight * (n == 2 ? m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) : m.determinant());
    }
    return total;
  }

  cplx panel(std::size_t d, double a, double b) {
    return Gauss::integrate([&](double t) { return inner(d, t); }, a, b);
  }

  cplx adaptive(std::size_t d, double a, double b, cplx whole, double tol, int depth) {
    const double mid = (a + b) / 2;
    const cplx left = panel(d, a, mid), right = panel(d, mid, b);
    const cplx both = left + right;
    if (depth >= 40 || std::abs(both - whole) <= tol) return both;
    return adaptive(d, a, mid, left, tol / 2, depth + 1) + adaptive(d, mid, b, right, tol / 2, depth + 1);
  }

  // Value of the integrand with parameters 0..d-1 fixed and t_d = t,
  // integrated over the remaining parameters.
  cplx inner(std::size_t d, double t) {
    z[d] = paths[d].at(t);
    v[d] = paths[d].velocity(t);
    if (d + 1 == k) return integrand();
    return integrate(d + 1, tolerance * 1e-2);
  }

  cplx integrate(std::size_t d, double tol) {
    cplx sum = 0;
    const auto& kn = knots[d];
    for (std::size_t p = 0; p + 1 < kn.size(); ++p) {
      const double a = kn[p], b = kn[p + 1];
      sum += adaptive(d, a, b, panel(d, a, b), tol, 0);
    }
    return sum;
  }
};

}  // namespace

MomentIntegral moment_integral(const AnalyticKernel& kernel, const std::vector<Path>& paths, double tolerance) {
  const std::size_t k = paths.size();
  for (std::size_t i = 0; i < k; ++i) {
    const auto si = sample_path(paths[i], 512);
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto sj = sample_path(paths[j], 512);
      for (std::size_t a = 0; a + 1 < si.size(); ++a)
        for (std::size_t b = 0; b + 1 < sj.size(); ++b)
          if (segments_meet(si[a], si[a + 1], sj[b], sj[b + 1]))
            fail(ErrorKind::PathsIntersect, "paths " + std::to_string(i) + " and " + std::to_string(j) + " meet");
    }
  }
  MomentIntegral r{};
  if (k < 2) return r;  // the 1x1 determinant with zero diagonal vanishes
  Integrator in{paths, k, {}, kernel, tolerance, 0, std::vector<Point>(k), std::vector<Point>(k)};
  for (const auto& p : paths) {
    std::vector<double> kn{0.0};
    for (double b : p.breaks)
      if (b > 0 && b < 1) kn.push_back(b);
    kn.push_back(1.0);
    std::sort(kn.begin(), kn.end());
    in.knots.push_back(std::move(kn));
  }
  const cplx sum = in.integrate(0, tolerance);
  cplx phase = 1;
  for (std::size_t i = 0; i < k; ++i) phase *= cplx(0, -1);
  r.value = phase * sum;
  r.error_estimate = tolerance;
  r.evaluations = in.evaluations;
  return r;
}

// ---- Cycles ----

int separating_cycles(const Tiling& a, const Tiling& b, const TemperleyanPolyomino& tp) {
  if (tp.holes() != 1) fail(ErrorKind::NotAnnular, "host must have exactly one hole");
  if (a.host != b.host && a.host->sites() != b.host->sites())
    fail(ErrorKind::ForestHostMismatch, "tilings of different hosts");
  // A point inside a hole square: right of the first step of the hole loop.
  const auto& hole = tp.host().loops()[1].vertices;
  const Site inside_hole = edge_sides(hole[0], hole[1]).second;
  const double px = inside_hole.x + 0.25, py = inside_hole.y + 0.25;
  const auto& sites = a.host->sites();
  std::vector<char> seen(sites.size(), 0);
  int count = 0;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    if (seen[s] || a.partner[s] == b.partner[s]) continue;
    std::vector<Site> cyc;
    int cur = static_cast<int>(s);
    bool use_a = true;
    do {
      seen[cur] = 1;
      cyc.push_back(sites[cur]);
      cur = use_a ? a.partner[cur] : b.partner[cur];
      use_a = !use_a;
    } while (cur != static_cast<int>(s));
    bool in = false;
    for (std::size_t i = 0; i < cyc.size(); ++i) {
      const Site p = cyc[i], q = cyc[(i + 1) % cyc.size()];
      if ((p.y > py) != (q.y > py)) {
        const double x = p.x + (py - p.y) * (q.x - p.x) / static_cast<double>(q.y - p.y);
        if (x > px) in = !in;
      }
    }
    count += in;
  }
  return count;
}

double CycleReport::combined_z() const {
  return std::abs(cycles.estimate - variance_over_16.estimate) /
         std::hypot(cycles.std_error, variance_over_16.std_error);
}

CycleReport cycle_statistics(const TemperleyanPolyomino& tp, std::size_t pairs, std::uint64_t seed, int threads) {
  if (tp.holes() != 1) fail(ErrorKind::NotAnnular, "cycle statistics need a host with exactly one hole");
  const TemperleyMap map(tp);
  const auto [base, base_value] = canonical_gauge(tp);
  const Vertex mark = tp.host().loops()[1].vertices.front();
  std::vector<double> cycles(pairs), diffs(2 * pairs);
  parallel_for(pairs, threads, [&](std::size_t i) {
    const Tiling t1 = map.sample(seed, 2 * i), t2 = map.sample(seed, 2 * i + 1);
    cycles[i] = separating_cycles(t1, t2, tp);
    diffs[2 * i] = height_at(height_field(t1, base, base_value), mark);
    diffs[2 * i + 1] = height_at(height_field(t2, base, base_value), mark);
  });
  CycleReport r;
  r.cycles = summarize(cycles, "cycles");
  const auto [var, se] = variance_with_error(diffs);
  r.variance = var;
  r.variance_std_error = se;
  r.variance_over_16.label = "variance_over_16";
  r.variance_over_16.estimate = var / 16;
  r.variance_over_16.std_error = se / 16;
  r.variance_over_16.n_samples = diffs.size();
  r.cycles.theory = var / 16;
  for (double c : cycles) {
    const auto k = static_cast<std::size_t>(c);
    if (r.histogram.size() <= k) r.histogram.resize(k + 1, 0);
    ++r.histogram[k];
  }
  r.cycles.config = {{"pairs", pairs}, {"seed", seed}, {"mark", vertex_json(mark)}};
  return r;
}

// ---- Variance growth ----

GrowthFit variance_growth(const RegionSpec& region, Point center, const std::vector<double>& eps,
                          std::size_t n, std::uint64_t seed, int threads) {
  if (eps.size() < 2) fail(ErrorKind::Unsupported, "need at least two spacings");
  GrowthFit fit;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const auto tp = discretize_region(region, eps[k]);
    const Vertex probe = nearest_vertex(center, eps[k]);
    const auto h = sample_heights(tp, {probe}, n, splitmix64(seed + k), threads);
    const auto [var, se] = variance_with_error(h[0]);
    GrowthPoint g;
    g.eps = eps[k];
    g.probe = probe;
    g.variance.label = "variance";
    g.variance.estimate = var;
    g.variance.std_error = se;
    g.variance.n_samples = n;
    g.variance.config = {{"eps", eps[k]}, {"probe", vertex_json(probe)}};
    fit.points.push_back(g);
  }
  auto weighted_fit = [&](int degree) {
    const std::size_t m = fit.points.size();
    Eigen::MatrixXd X(m, degree + 1);
    Eigen::VectorXd y(m), w(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double x = std::log(1 / fit.points[i].eps);
      for (int d = 0; d <= degree; ++d) X(i, d) = std::pow(x, d);
      y(i) = fit.points[i].variance.estimate;
      const double se = std::max(fit.points[i].variance.std_error, 1e-12);
      w(i) = 1 / (se * se);
    }
    const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
    const Eigen::MatrixXd cov = (XtW * X).inverse();
    const Eigen::VectorXd coef = cov * XtW * y;
    const Eigen::VectorXd res = y - X * coef;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) chi2 += w(i) * res(i) * res(i);
    return std::tuple<Eigen::VectorXd, Eigen::MatrixXd, double>{coef, cov, chi2};
  };
  const auto [c1, cov1, chi1] = weighted_fit(1);
  fit.intercept = c1(0);
  fit.slope = c1(1);
  fit.intercept_std_error = std::sqrt(cov1(0, 0));
  fit.slope_std_error = std::sqrt(cov1(1, 1));
  fit.chi2 = chi1;
  if (fit.points.size() >= 3) {
    const auto [c2, cov2, chi2] = weighted_fit(2);
    fit.curvature = c2(2);
    fit.curvature_std_error = std::sqrt(cov2(2, 2));
  }
  return fit;
}

}  // namespace dimer
