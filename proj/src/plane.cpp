#include "dimer/plane.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <numbers>

namespace dimer {

namespace {

using Quadrature = boost::math::quadrature::gauss<double, 30>;
constexpr double kPi = std::numbers::pi;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw DimerError(kind, msg); }

// Integral of f over [0, end] with fixed-order Gauss rules on pieces that
// double in length from `scale` (capped at 1/4), so structure of width ~scale
// at the origin is resolved. The integrands here are analytic on each piece.
template <class F>
double graded_integral(F f, double scale, double end) {
  double total = 0.0, lo = 0.0, hi = std::min({end, scale, 0.25});
  while (lo < end) {
    total += Quadrature::integrate(f, lo, hi);
    const double step = std::min(0.25, 2.0 * (hi - lo));
    lo = hi;
    hi = std::min(end, lo + step);
  }
  return total;
}

}  // namespace

double potential_kernel(int m, int n) {
  // Inner angle by residues: a(m, n) = (2/pi) int_0^pi (1 - e^{-M t} cos(N phi)) / sinh t,
  // cosh t = 2 - cos phi, with M >= N so the integrand does not oscillate.
  const int big = std::max(std::abs(m), std::abs(n));
  const int small = std::min(std::abs(m), std::abs(n));
  if (big == 0) return 0.0;
  auto f = [big, small](double phi) {
    const double s = std::sin(phi / 2);
    const double t = 2 * std::asinh(s);
    const double sinh_t = 2 * s * std::sqrt(1 + s * s);
    const double half = std::sin(small * phi / 2);
    const double num = -std::expm1(-big * t) + std::exp(-big * t) * 2 * half * half;
    return num / sinh_t;
  };
  return 2 / kPi * graded_integral(f, 1.0 / big, kPi);
}

cplx c0_value(const Site& z) {
  if (is_white(z)) return {0, 0};
  // C0(0, iz) = -i C0(0, z) and C0(0, -z) = -C0(0, z) reduce to x >= |y|.
  if (std::abs(z.y) > std::abs(z.x)) return cplx(0, 1) * c0_value({-z.y, z.x});
  if (z.x < 0) return -c0_value({-z.x, -z.y});
  // C0(0, x+iy) = (1/pi) int_0^{pi/2} e^{-x asinh(sin phi)} / sqrt(1 + sin^2 phi)
  //               * (cos(y phi) for even y, -i sin(y phi) for odd y).
  const int x = z.x, y = z.y;
  const bool even_y = y % 2 == 0;
  auto f = [x, y, even_y](double phi) {
    const double s = std::sin(phi);
    const double weight = std::exp(-x * std::asinh(s)) / std::sqrt(1 + s * s);
    return weight * (even_y ? std::cos(y * phi) : std::sin(y * phi));
  };
  const double v = graded_integral(f, 1.0 / x, kPi / 2) / kPi;
  return even_y ? cplx(v, 0) : cplx(0, -v);
}

cplx c0_from_green(const Site& z) {
  switch (classify_square(z)) {
    case SquareClass::W0:
    case SquareClass::W1:
      return {0, 0};
    case SquareClass::B0: {
      const int m = (z.x - 1) / 2;  // exact: x is odd on B0
      const int n = z.y / 2;
      return {(potential_kernel(m + 1, n) - potential_kernel(m, n)) / 4, 0};
    }
    case SquareClass::B1:
      return cplx(0, -1) * c0_from_green({z.y, -z.x});
  }
  return {0, 0};
}

double c0_asymptotic_deficit(const Site& z) {
  const cplx inv = 1.0 / (kPi * cplx(z.x, z.y));
  const cplx c = c0_value(z);
  const cplx proj = classify_square(z) == SquareClass::B0 ? cplx(inv.real(), 0) : cplx(0, inv.imag());
  return std::abs(c - proj);
}

double g0_difference(const Site& a, const Site& b) {
  // G0 = -a/4 up to a constant, since 4a - sum of neighbours = -4 delta.
  return -(potential_kernel(a.x, a.y) - potential_kernel(b.x, b.y)) / 4;
}

ConstantFit c0_constant() {
  // Least squares of G0(0, k) + log(k)/(2pi) against 1, k^-2 and k^-4.
  std::vector<int> ks;
  for (int k = 16; k <= 512; k += 16) ks.push_back(k);
  Eigen::MatrixXd basis(ks.size(), 3);
  Eigen::VectorXd y(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double k = ks[i];
    basis(i, 0) = 1;
    basis(i, 1) = 1 / (k * k);
    basis(i, 2) = 1 / (k * k * k * k);
    y(i) = -potential_kernel(ks[i], 0) / 4 + std::log(k) / (2 * kPi);
  }
  const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(y);
  const double rss = (basis * coef - y).squaredNorm();
  const double sigma2 = rss / static_cast<double>(ks.size() - 3);
  const Eigen::MatrixXd cov = (basis.transpose() * basis).inverse() * sigma2;
  return {coef(0), std::sqrt(cov(0, 0))};
}

cplx half_plane_coupling(const Site& v1, const Site& v2) {
  const Site image{v1.x, -v1.y};
  const cplx direct = c0_value(v2 - v1);
  const cplx reflected = c0_value(v2 - image);
  return classify_square(v1) == SquareClass::W0 ? direct - reflected : direct + reflected;
}

std::vector<cplx> square_coupling(int n, const std::vector<Site>& points) {
  std::vector<Site> squares;
  squares.reserve(static_cast<std::size_t>(4) * n * n);
  for (int y = -n; y < n; ++y)
    for (int x = -n; x < n; ++x) squares.push_back({x, y});
  const auto ks = build_kasteleyn(interior_dual(SquareSet(squares)));
  const auto col = solve_coupling(ks, {0, 0});
  const SiteGraph& g = ks.graph();
  std::vector<cplx> out;
  out.reserve(points.size());
  for (const auto& z : points) {
    const int i = g.index_of(z), j = g.index_of({-z.x, -z.y});
    if (i < 0 || j < 0) fail(ErrorKind::ProbeOutsideRegion, "point too far from the origin for this square");
    out.push_back((col.values[i] - col.values[j]) / 2.0);
  }
  return out;
}

std::vector<cplx> square_coupling_extrapolated(const std::vector<Site>& points,
                                               const std::vector<int>& sizes) {
  if (sizes.empty()) fail(ErrorKind::Unsupported, "no sizes given");
  std::vector<std::vector<cplx>> table;
  for (int n : sizes) table.push_back(square_coupling(n, points));
  // Neville-style elimination of 1/n^2, 1/n^4, ... for any increasing sizes.
  const std::size_t k = sizes.size();
  for (std::size_t level = 1; level < k; ++level)
    for (std::size_t i = k - 1; i >= level; --i) {
      const double a = 1.0 / (static_cast<double>(sizes[i - level]) * sizes[i - level]);
      const double b = 1.0 / (static_cast<double>(sizes[i]) * sizes[i]);
      for (std::size_t p = 0; p < points.size(); ++p)
        table[i][p] = (a * table[i][p] - b * table[i - 1][p]) / (a - b);
    }
  return table.back();
}

cplx PlaneCoupling::value(const Site& z) {
  const std::pair<int, int> key{z.x, z.y};
  {
    std::shared_lock lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const cplx v = method_ == C0Method::Quadrature ? c0_value(z)
                                                 : square_coupling_extrapolated({z}).front();
  std::unique_lock lock(mutex_);
  return cache_.emplace(key, v).first->second;
}

std::size_t PlaneCoupling::size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

void PlaneCoupling::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return;
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("version").get<int>() != 1) fail(ErrorKind::ConfigParse, "unknown cache version");
    const std::string method = j.at("method").get<std::string>();
    const std::string mine = method_ == C0Method::Quadrature ? "quadrature" : "square-extrapolation";
    if (method != mine) return;
    std::unique_lock lock(mutex_);
    for (const auto& e : j.at("entries"))
      cache_.emplace(std::pair<int, int>{e.at(0).get<int>(), e.at(1).get<int>()},
                     cplx(e.at(2).get<double>(), e.at(3).get<double>()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigParse, std::string("bad coupling cache: ") + e.what());
  }
}

void PlaneCoupling::save(const std::string& path) const {
  nlohmann::json j;
  j["version"] = 1;
  j["method"] = method_ == C0Method::Quadrature ? "quadrature" : "square-extrapolation";
  auto& entries = j["entries"] = nlohmann::json::array();
  {
    std::shared_lock lock(mutex_);
    for (const auto& [k, v] : cache_) entries.push_back({k.first, k.second, v.real(), v.imag()});
  }
  std::ofstream out(path);
  if (!out) fail(ErrorKind::ConfigParse, "cannot write coupling cache " + path);
  out << j.dump() << '\n';
}

}  // namespace dimer
