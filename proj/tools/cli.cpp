#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "dimer/greens.hpp"
#include "dimer/height.hpp"
#include "dimer/kasteleyn.hpp"
#include "dimer/lattice.hpp"
#include "dimer/moments.hpp"
#include "dimer/plane.hpp"
#include "dimer/render.hpp"
#include "dimer/sampler.hpp"

namespace dimer::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigParse: return kConfigParse;
    case ErrorKind::RegionParse: return kRegionParse;
    case ErrorKind::Untilable: return kUntilable;
    default: return kFirstLibraryExit + static_cast<int>(kind);
  }
}

namespace {

// Numeric defaults; every one can be overridden by the config document or a flag.
struct Defaults {
  static constexpr double eps = 1.0 / 32;
  static constexpr std::size_t samples = 1000;
  static constexpr std::uint64_t seed = 1;
  static constexpr int threads = 1;
  static constexpr int theory_resolution = 400;
  static constexpr double svg_scale = 12.0;
  static constexpr int table_radius = 5;
};

struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void config_error(const std::string& msg) { throw DimerError(ErrorKind::ConfigParse, msg); }

double parse_number(const std::string& text) {
  try {
    std::size_t used = 0;
    if (auto slash = text.find('/'); slash != std::string::npos) {
      const double num = std::stod(text.substr(0, slash), &used);
      if (used != slash) throw std::invalid_argument(text);
      const std::string rest = text.substr(slash + 1);
      const double den = std::stod(rest, &used);
      if (used != rest.size() || den == 0) throw std::invalid_argument(text);
      return num / den;
    }
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    config_error("not a number: '" + text + "'");
  }
}

std::vector<double> parse_numbers(const std::string& text, std::size_t expected = 0) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) v.push_back(parse_number(item));
  if (expected && v.size() != expected)
    config_error("expected " + std::to_string(expected) + " comma-separated numbers in '" + text + "'");
  return v;
}

Point parse_point(const std::string& text) {
  const auto v = parse_numbers(text, 2);
  return {v[0], v[1]};
}

double json_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_number(j.get<std::string>());
  config_error("expected a number, got " + j.dump());
}

Point json_point(const json& j) {
  if (!j.is_array() || j.size() != 2) config_error("expected [x, y], got " + j.dump());
  return {json_number(j[0]), json_number(j[1])};
}

// Merged view of flags over the config document over the defaults.
class Settings {
 public:
  json doc = json::object();
  fs::path base_dir = ".";

  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open config file " + path);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      config_error(std::string("config file: ") + e.what());
    }
    if (!doc.is_object()) config_error("config document must be a JSON object");
    base_dir = fs::path(path).parent_path();
  }

  bool has(const char* key) const { return doc.contains(key) && !doc.at(key).is_null(); }
  const json& at(const char* key) const { return doc.at(key); }

  double number(const std::optional<double>& flag, const char* key, double fallback) const {
    if (flag) return *flag;
    return has(key) ? json_number(at(key)) : fallback;
  }
  std::optional<double> number(const std::optional<double>& flag, const char* key) const {
    if (flag) return flag;
    if (has(key)) return json_number(at(key));
    return std::nullopt;
  }
  template <class Int>
  Int integer(const std::optional<Int>& flag, const char* key, Int fallback) const {
    if (flag) return *flag;
    if (!has(key)) return fallback;
    const double v = json_number(at(key));
    if (v < 0 || v != std::floor(v)) config_error(std::string(key) + " must be a non-negative integer");
    return static_cast<Int>(v);
  }
  std::string text(const std::optional<std::string>& flag, const char* key, const std::string& fallback) const {
    if (flag) return *flag;
    if (!has(key)) return fallback;
    if (!at(key).is_string()) config_error(std::string(key) + " must be a string");
    return at(key).get<std::string>();
  }
  // Paths from the config document are relative to its directory.
  std::optional<std::string> path(const std::optional<std::string>& flag, const char* key) const {
    if (flag) return flag;
    if (!has(key)) return std::nullopt;
    if (!at(key).is_string()) config_error(std::string(key) + " must be a path string");
    fs::path p = at(key).get<std::string>();
    return (p.is_absolute() ? p : base_dir / p).string();
  }
};

// Flags shared by every subcommand.
struct Common {
  std::optional<std::string> config, region, output_dir;
  std::optional<double> eps, delta;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct Run {
  Settings settings;
  Common common;
  std::ostream& out;

  std::uint64_t seed() const { return settings.integer(common.seed, "seed", Defaults::seed); }
  int threads() const {
    const int t = settings.integer(common.threads, "threads", Defaults::threads);
    if (t < 1) config_error("threads must be at least 1");
    return t;
  }
  std::size_t samples() const { return settings.integer(common.samples, "samples", Defaults::samples); }

  fs::path output_dir() const {
    const fs::path dir = settings.path(common.output_dir, "output_dir").value_or(".");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
  }
  fs::path write(const std::string& name, const std::string& content) const {
    const fs::path p = output_dir() / name;
    std::ofstream f(p, std::ios::binary);
    if (!f || !(f << content) || !f.flush()) throw OutputError("cannot write " + p.string());
    return p;
  }
};

// A host read from a region document: either geometry (discretized at eps) or
// an explicit square list with optional Temperleyan data.
struct Host {
  std::shared_ptr<const SquareSet> squares;
  std::optional<TemperleyanPolyomino> tp;
  std::optional<RegionSpec> spec;
  double eps = 1.0;

  const TemperleyanPolyomino& temperleyan() const {
    if (!tp) throw DimerError(ErrorKind::Unsupported, "host document has no d0; a Temperleyan host is required");
    return *tp;
  }
  SiteGraph graph() const { return tp ? interior_dual(*tp) : interior_dual(*squares); }
};

std::vector<Site> json_sites(const json& j, const char* what) {
  std::vector<Site> sites;
  if (!j.is_array()) throw DimerError(ErrorKind::RegionParse, std::string(what) + " must be an array");
  for (const auto& s : j) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() || !s[1].is_number_integer())
      throw DimerError(ErrorKind::RegionParse, std::string(what) + " entries must be [x, y] integer pairs");
    sites.push_back({s[0].get<int>(), s[1].get<int>()});
  }
  return sites;
}

Host load_host(const Run& run) {
  const auto path = run.settings.path(run.common.region, "region");
  if (!path) config_error("no region given (--region or \"region\" in the config)");
  std::ifstream in(*path);
  if (!in) throw DimerError(ErrorKind::RegionParse, "cannot open region file " + *path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw DimerError(ErrorKind::RegionParse, std::string("region file: ") + e.what());
  }
  Host h;
  const auto eps_flag = run.settings.number(run.common.eps, "eps");
  const auto delta_flag = run.settings.number(run.common.delta, "delta");
  if (j.is_object() && (j.contains("squares") || j.contains("run_length"))) {
    std::vector<Site> squares;
    try {
      squares = j.contains("squares") ? json_sites(j.at("squares"), "squares")
                                      : from_run_length(j.at("run_length").get<std::string>());
      h.eps = eps_flag.value_or(j.value("eps", 1.0));
    } catch (const json::exception& e) {
      throw DimerError(ErrorKind::RegionParse, std::string("region file: ") + e.what());
    }
    if (j.contains("d0")) {
      const auto d0 = json_sites(json::array({j.at("d0")}), "d0");
      const auto exposed = j.contains("exposed") ? json_sites(j.at("exposed"), "exposed") : std::vector<Site>{};
      h.tp = make_temperleyan(Polyomino(squares, h.eps), d0[0], exposed,
                              delta_flag.value_or(j.value("delta", 0.0)));
      h.squares = std::make_shared<const SquareSet>(h.tp->host().squares());
    } else {
      h.squares = std::make_shared<const SquareSet>(std::move(squares));
    }
    return h;
  }
  RegionSpec spec = region_from_json(ss.str(), eps_flag.value_or(Defaults::eps));
  h.eps = eps_flag ? *eps_flag : spec.eps.value_or(Defaults::eps);
  if (!(h.eps > 0)) config_error("eps must be positive");
  h.tp = discretize_region(spec, h.eps, delta_flag ? delta_flag : spec.delta);
  h.squares = std::make_shared<const SquareSet>(h.tp->host().squares());
  h.spec = std::move(spec);
  return h;
}

json site_json(const Site& s) { return json::array({s.x, s.y}); }
json point_json(Point p) { return json::array({p.real(), p.imag()}); }

json envelope(const Run& run, const std::string& command) {
  json j;
  j["schema"] = "dimer-report";
  j["schema_version"] = kReportSchemaVersion;
  j["command"] = command;
  j["seed"] = run.seed();
  j["threads"] = run.threads();
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Fractions with denominators up to 64 when exact to 1e-9, else decimals.
std::string format_real(double v) {
  if (std::abs(v) < 1e-12) return "0";
  for (int q = 1; q <= 64; ++q) {
    const double p = std::round(v * q);
    if (std::abs(v * q - p) < 1e-9) {
      char buf[48];
      if (q == 1)
        std::snprintf(buf, sizeof buf, "%.0f", p);
      else
        std::snprintf(buf, sizeof buf, "%.0f/%d", p, q);
      return buf;
    }
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_value(cplx v) {
  const bool re = std::abs(v.real()) >= 1e-12, im = std::abs(v.imag()) >= 1e-12;
  if (!re && !im) return "0";
  if (!im) return format_real(v.real());
  if (!re) return format_real(v.imag()) + "i";
  return format_real(v.real()) + (v.imag() < 0 ? "-" : "+") + format_real(std::abs(v.imag())) + "i";
}

struct Window {
  int x0, y0, x1, y1;
};

Window parse_window(const std::string& text) {
  const auto v = parse_numbers(text, 4);
  Window w{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3])};
  if (w.x1 < w.x0 || w.y1 < w.y0) config_error("window must be x0,y0,x1,y1 with x0<=x1 and y0<=y1");
  return w;
}

// Top row first, as the lattice is drawn.
template <class Cell>
std::string value_table(const Window& w, Cell cell) {
  std::vector<std::vector<std::string>> rows;
  std::size_t width = 1;
  for (int y = w.y1; y >= w.y0; --y) {
    auto& row = rows.emplace_back();
    for (int x = w.x0; x <= w.x1; ++x) {
      row.push_back(cell(Site{x, y}));
      width = std::max(width, row.back().size());
    }
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ' ';
      out += std::string(width - row[k].size(), ' ') + row[k];
    }
    out += '\n';
  }
  return out;
}

// ---- subcommands ----

int cmd_build(Run& run) {
  const Host h = load_host(run);
  const auto& tp = h.temperleyan();
  json j = envelope(run, "build");
  j["eps"] = h.eps;
  j["delta"] = tp.delta();
  j["squares"] = tp.host().squares().size();
  const auto& box = tp.host().squares().box();
  j["box"] = {{"x0", box.x0}, {"y0", box.y0}, {"width", box.width}, {"height", box.height}};
  j["d0"] = site_json(tp.d0());
  j["exposed"] = json::array();
  for (const auto& e : tp.exposed()) j["exposed"].push_back(site_json(e));
  j["boundary_loops"] = tp.host().loops().size();
  j["run_length"] = to_run_length(tp.host().squares());
  std::size_t by_class[4] = {};
  for (const auto& s : tp.host().squares().sites()) ++by_class[static_cast<int>(classify_square(s))];
  j["classes"] = {{"W0", by_class[0]}, {"W1", by_class[1]}, {"B0", by_class[2]}, {"B1", by_class[3]}};
  const auto path = run.write("host.json", dump(j));
  run.out << dump({{"artifacts", {path.string()}}, {"squares", j["squares"]}});
  return kOk;
}

int cmd_count(Run& run, bool as_json) {
  const Host h = load_host(run);
  TilingCount c;
  try {
    c = count_tilings(build_kasteleyn(h.graph()));
  } catch (const DimerError& e) {
    if (e.kind() != ErrorKind::UnbalancedColors) throw;
    c.exact = 0;
    c.log_count = -std::numeric_limits<double>::infinity();
  }
  if (as_json) {
    json j = envelope(run, "count");
    j["exact"] = c.exact ? json(*c.exact) : json(nullptr);
    j["log_count"] = std::isfinite(c.log_count) ? json(c.log_count) : json(nullptr);
    run.out << dump(j);
  } else if (c.exact) {
    run.out << *c.exact << '\n';
  } else {
    char buf[64];
    std::snprintf(buf, sizeof buf, "exp(%.12g)", c.log_count);
    run.out << buf << '\n';
  }
  return kOk;
}

struct SampleFlags {
  std::uint64_t index = 0;
  bool forest = false, dual_tree = false, heights = false;
  std::optional<double> scale;
};

int cmd_sample(Run& run, const SampleFlags& f) {
  const Host h = load_host(run);
  const auto& tp = h.temperleyan();
  const TemperleyMap map(tp);
  const Tiling t = map.sample(run.seed(), f.index);
  std::ostringstream csv;
  write_tiling_csv(csv, t);
  SvgOptions o;
  o.scale = run.settings.number(f.scale, "svg_scale", Defaults::svg_scale);
  o.forest = f.forest;
  o.dual_tree = f.dual_tree;
  o.host = &tp;
  json artifacts = {run.write("tiling.csv", csv.str()).string(), run.write("tiling.svg", render_svg(t, o)).string()};
  if (f.heights) {
    std::ostringstream hc;
    write_height_csv(hc, height_field(t, tp), h.eps);
    artifacts.push_back(run.write("heights.csv", hc.str()).string());
  }
  run.out << dump({{"artifacts", artifacts}, {"dominoes", t.dominoes().size()}, {"seed", run.seed()},
                   {"index", f.index}});
  return kOk;
}

struct CouplingFlags {
  std::optional<std::string> source, window;
  bool plane = false;
  bool csv_stdout = false;
};

int cmd_coupling(Run& run, const CouplingFlags& f) {
  if (f.plane) {
    const Window w = parse_window(f.window.value_or("-3,-3,3,3"));
    PlaneCoupling c0;
    std::ostringstream csv;
    csv << "x,y,re,im\n";
    csv.precision(17);
    for (int y = w.y0; y <= w.y1; ++y)
      for (int x = w.x0; x <= w.x1; ++x) {
        const cplx v = c0.value({x, y});
        csv << x << ',' << y << ',' << v.real() << ',' << v.imag() << '\n';
      }
    const auto path = run.write("c0.csv", csv.str());
    if (f.csv_stdout)
      run.out << csv.str();
    else
      run.out << value_table(w, [&](Site s) { return format_value(c0.value(s)); }) << "# " << path.string()
              << '\n';
    return kOk;
  }
  const Host h = load_host(run);
  const SiteGraph g = h.graph();
  if (!f.source) config_error("coupling needs --source x,y (lattice coordinates of a host square)");
  const Point sp = parse_point(*f.source);
  const Site src{static_cast<int>(sp.real()), static_cast<int>(sp.imag())};
  if (g.index_of(src) < 0) throw DimerError(ErrorKind::ProbeOutsideRegion, "source square is not in the host");
  const auto col = solve_coupling(build_kasteleyn(g), src);
  std::ostringstream csv;
  write_coupling_csv(csv, col, g, h.eps);
  const auto path = run.write("coupling.csv", csv.str());
  const auto& box = h.squares->box();
  Window w{box.x0, box.y0, box.x0 + box.width - 1, box.y0 + box.height - 1};
  if (f.window)
    w = parse_window(*f.window);
  else if (box.width > 15 || box.height > 15)
    w = {src.x - Defaults::table_radius, src.y - Defaults::table_radius, src.x + Defaults::table_radius,
         src.y + Defaults::table_radius};
  if (f.csv_stdout) {
    run.out << csv.str();
  } else {
    run.out << value_table(w, [&](Site s) -> std::string {
      const int v = g.index_of(s);
      if (v < 0) return ".";
      if (s == src) return "*";
      return format_value(col.values[v]);
    }) << "# "
            << path.string() << '\n';
  }
  return kOk;
}

struct KernelFlags {
  std::string kind = "F0";
  std::string domain = "halfplane";
  std::optional<std::string> z1, z2;
  std::optional<double> d0, theta, xi;
  std::vector<std::string> probes;
  std::optional<std::string> eps_list;
};

AnalyticKernel analytic_kernel(const KernelFlags& f, KernelKind kind) {
  if (f.domain == "halfplane") return kernel_halfplane(kind, f.d0);
  if (f.domain == "disk") return kernel_disk(kind, f.theta.value_or(0.0));
  config_error("unknown kernel domain " + f.domain + " (halfplane or disk)");
}

int cmd_kernels(Run& run, const KernelFlags& f) {
  const KernelKind kind = kernel_kind_from_string(f.kind);
  if (f.z1 || f.z2) {
    if (!f.z1 || !f.z2) config_error("analytic evaluation needs both --z1 and --z2");
    const Point z1 = parse_point(*f.z1), z2 = parse_point(*f.z2);
    const cplx v = analytic_kernel(f, kind)(z1, z2);
    json j = envelope(run, "kernels");
    j["domain"] = f.domain;
    j["kind"] = to_string(kind);
    j["z1"] = point_json(z1);
    j["z2"] = point_json(z2);
    j["value"] = point_json(v);
    run.out << dump(j);
    return kOk;
  }
  // Numeric tables on the region at several spacings.
  const auto path = run.settings.path(run.common.region, "region");
  if (!path) config_error("numeric kernels need a region (or --z1/--z2 for the closed form)");
  const RegionSpec spec = load_region(*path);
  std::vector<double> eps;
  if (f.eps_list)
    eps = parse_numbers(*f.eps_list);
  else if (run.settings.has("eps_list"))
    for (const auto& e : run.settings.at("eps_list")) eps.push_back(json_number(e));
  else
    eps = {1.0 / 16, 1.0 / 32, 1.0 / 64};
  std::sort(eps.begin(), eps.end(), std::greater<>());
  std::vector<ProbePair> probes;
  for (const auto& p : f.probes) {
    const auto v = parse_numbers(p, 4);
    probes.push_back({{v[0], v[1]}, {v[2], v[3]}});
  }
  if (probes.empty() && run.settings.has("probe_pairs"))
    for (const auto& p : run.settings.at("probe_pairs")) probes.push_back({json_point(p.at(0)), json_point(p.at(1))});
  if (probes.empty()) config_error("numeric kernels need at least one --probe x1,y1,x2,y2");
  std::vector<KernelHost> hosts;
  for (double e : eps) hosts.push_back({e, discretize_region(spec, e, run.settings.number(run.common.delta, "delta"))});
  const KernelTable t = kernel_numeric(hosts, kind, probes, run.settings.number(f.xi, "xi"), run.threads());
  std::ostringstream csv;
  write_kernel_csv(csv, t);
  json j = envelope(run, "kernels");
  j["kind"] = to_string(kind);
  j["eps"] = t.eps;
  j["probes"] = json::array();
  const bool compare = f.domain == "halfplane" || f.domain == "disk";
  for (std::size_t k = 0; k < probes.size(); ++k) {
    json p = {{"z1", point_json(probes[k].z1)},
              {"z2", point_json(probes[k].z2)},
              {"extrapolated", point_json(t.extrapolated[k])},
              {"ratio", t.ratio.empty() ? json(nullptr) : json(t.ratio[k])}};
    if (compare && (f.d0 || f.theta))
      p["theory"] = point_json(analytic_kernel(f, kind)(probes[k].z1, probes[k].z2));
    j["probes"].push_back(p);
  }
  json artifacts = {run.write("kernels.csv", csv.str()).string()};
  artifacts.push_back(run.write("kernels.json", dump(j)).string());
  run.out << dump({{"artifacts", artifacts}});
  return kOk;
}

// ---- experiments ----

struct ExperimentFlags {
  std::vector<std::string> probes, pairs, marks;
  std::vector<int> powers;
  std::optional<std::string> center, eps_list, theory;
  std::optional<int> resolution;
  std::optional<double> baseline;
};

std::vector<Point> points_from(const std::vector<std::string>& flags, const Settings& s, const char* key) {
  std::vector<Point> pts;
  for (const auto& p : flags) pts.push_back(parse_point(p));
  if (pts.empty() && s.has(key))
    for (const auto& p : s.at(key)) pts.push_back(json_point(p));
  return pts;
}

int write_reports(Run& run, const std::string& name, json j, const std::vector<MomentReport>& reports) {
  j["reports"] = json::array();
  for (const auto& r : reports) j["reports"].push_back(to_json(r));
  std::ostringstream csv;
  write_reports_csv(csv, reports);
  json artifacts = {run.write(name + ".csv", csv.str()).string()};
  artifacts.push_back(run.write(name + ".json", dump(j)).string());
  run.out << dump({{"artifacts", artifacts}, {"reports", j["reports"]}});
  return kOk;
}

int exp_mean_height(Run& run, const ExperimentFlags& f) {
  const Host h = load_host(run);
  const auto& tp = h.temperleyan();
  std::vector<std::pair<std::string, Point>> probes;
  for (Point p : points_from(f.probes, run.settings, "probes")) probes.emplace_back("", p);
  if (probes.empty() && h.spec) probes = h.spec->probe_points;
  if (probes.empty()) config_error("mean-height needs probes (--probe x,y or \"probes\" in the region)");
  std::vector<Vertex> vertices;
  for (const auto& [name, p] : probes) vertices.push_back(nearest_vertex(p, h.eps));
  auto reports = mean_height_estimate(tp, vertices, run.samples(), run.seed(), run.threads());
  std::optional<MeanHeightTheory> theory;
  if (h.spec && run.settings.text(f.theory, "theory", "harmonic") != "none") {
    try {
      theory.emplace(*h.spec, run.settings.integer(f.resolution, "theory_resolution", Defaults::theory_resolution));
    } catch (const DimerError& e) {
      if (e.kind() != ErrorKind::Unsupported) throw;
    }
  }
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const Point at = position(vertices[k], h.eps);
    auto& r = reports[k];
    r.label = probes[k].first.empty() ? "probe" + std::to_string(k) : probes[k].first;
    r.config["vertex"] = {vertices[k].x, vertices[k].y};
    r.config["position"] = point_json(at);
    if (theory) r.theory = (*theory)(at);
  }
  json j = envelope(run, "experiment mean-height");
  j["eps"] = h.eps;
  return write_reports(run, "mean-height", j, reports);
}

int exp_two_point(Run& run, const ExperimentFlags& f) {
  const Host h = load_host(run);
  const auto& tp = h.temperleyan();
  std::vector<std::pair<Point, Point>> pairs;
  for (const auto& p : f.pairs) {
    const auto v = parse_numbers(p, 4);
    pairs.push_back({{v[0], v[1]}, {v[2], v[3]}});
  }
  if (pairs.empty() && run.settings.has("pairs"))
    for (const auto& p : run.settings.at("pairs")) pairs.push_back({json_point(p.at(0)), json_point(p.at(1))});
  if (pairs.empty()) config_error("two-point needs --pair x1,y1,x2,y2");
  std::vector<std::pair<Vertex, Vertex>> vpairs;
  for (const auto& [p, q] : pairs) vpairs.push_back({nearest_vertex(p, h.eps), nearest_vertex(q, h.eps)});
  auto reports = two_point_estimate(tp, vpairs, run.samples(), run.seed(), run.threads());
  // Closed form of the half-plane above the horizontal line y = baseline
  // (default: the lowest point of the region).
  const bool with_theory = run.settings.text(f.theory, "theory", "halfplane") == "halfplane";
  double baseline = 0.0;
  if (h.spec) {
    baseline = std::numeric_limits<double>::infinity();
    for (Point p : h.spec->components.front()) baseline = std::min(baseline, p.imag());
  }
  baseline = run.settings.number(f.baseline, "baseline", baseline);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const Point p = position(vpairs[k].first, h.eps), q = position(vpairs[k].second, h.eps);
    auto& r = reports[k];
    r.label = "pair" + std::to_string(k);
    r.config["p"] = point_json(p);
    r.config["q"] = point_json(q);
    if (with_theory) r.theory = two_point_halfplane(p - cplx(0, baseline), q - cplx(0, baseline));
  }
  json j = envelope(run, "experiment two-point");
  j["eps"] = h.eps;
  j["baseline"] = baseline;
  return write_reports(run, "two-point", j, reports);
}

int exp_boundary_moments(Run& run, const ExperimentFlags& f) {
  const Host h = load_host(run);
  const auto& tp = h.temperleyan();
  std::vector<Vertex> marks;
  for (const auto& m : f.marks) {
    const auto v = parse_numbers(m, 2);
    marks.push_back({static_cast<int>(v[0]), static_cast<int>(v[1])});
  }
  if (marks.empty() && run.settings.has("marks"))
    for (const auto& m : run.settings.at("marks")) {
      const Point p = json_point(m);
      marks.push_back({static_cast<int>(p.real()), static_cast<int>(p.imag())});
    }
  // Default: the first vertex of each loop with even x and odd y.
  if (marks.empty())
    for (const auto& loop : tp.host().loops())
      for (const auto& v : loop.vertices)
        if (v.x % 2 == 0 && (v.y % 2 + 2) % 2 == 1) {
          marks.push_back(v);
          break;
        }
  std::vector<int> powers = f.powers;
  if (powers.empty() && run.settings.has("powers")) powers = run.settings.at("powers").get<std::vector<int>>();
  if (powers.empty()) powers.assign(marks.size(), 2);
  if (powers.size() != marks.size()) config_error("one power per mark is required");
  auto r = boundary_moment_estimate(tp, marks, powers, run.samples(), run.seed(), run.threads());
  r.label = "moment";
  for (std::size_t k = 0; k < marks.size(); ++k) r.config["marks"].push_back({marks[k].x, marks[k].y});
  r.config["powers"] = powers;
  json j = envelope(run, "experiment boundary-moments");
  j["eps"] = h.eps;
  return write_reports(run, "boundary-moments", j, {r});
}

int exp_cycles(Run& run) {
  const Host h = load_host(run);
  const auto rep = cycle_statistics(h.temperleyan(), run.samples(), run.seed(), run.threads());
  json j = envelope(run, "experiment cycles");
  j["eps"] = h.eps;
  j["variance"] = rep.variance;
  j["variance_stderr"] = rep.variance_std_error;
  j["histogram"] = rep.histogram;
  j["combined_z"] = rep.combined_z();
  return write_reports(run, "cycles", j, {rep.cycles, rep.variance_over_16});
}

int exp_variance_growth(Run& run, const ExperimentFlags& f) {
  const auto path = run.settings.path(run.common.region, "region");
  if (!path) config_error("variance-growth needs a region");
  const RegionSpec spec = load_region(*path);
  std::vector<double> eps;
  if (f.eps_list)
    eps = parse_numbers(*f.eps_list);
  else if (run.settings.has("eps_list"))
    for (const auto& e : run.settings.at("eps_list")) eps.push_back(json_number(e));
  else
    eps = {1.0 / 16, 1.0 / 32, 1.0 / 64};
  Point center = 0;
  if (f.center)
    center = parse_point(*f.center);
  else if (run.settings.has("center"))
    center = json_point(run.settings.at("center"));
  else if (!spec.probe_points.empty())
    center = spec.probe_points.front().second;
  const auto fit = variance_growth(spec, center, eps, run.samples(), run.seed(), run.threads());
  std::vector<MomentReport> reports;
  for (const auto& p : fit.points) {
    auto r = p.variance;
    r.label = "eps=" + format_real(p.eps);
    r.config["eps"] = p.eps;
    r.config["vertex"] = {p.probe.x, p.probe.y};
    reports.push_back(r);
  }
  MomentReport slope;
  slope.label = "slope";
  slope.estimate = fit.slope;
  slope.std_error = fit.slope_std_error;
  slope.theory = 8 / (std::numbers::pi * std::numbers::pi);
  slope.n_samples = run.samples();
  reports.push_back(slope);
  json j = envelope(run, "experiment variance-growth");
  j["intercept"] = fit.intercept;
  j["intercept_stderr"] = fit.intercept_std_error;
  j["curvature"] = fit.curvature;
  j["curvature_stderr"] = fit.curvature_std_error;
  j["chi2"] = fit.chi2;
  return write_reports(run, "variance-growth", j, reports);
}

struct RenderFlags {
  std::string tiling;
  std::optional<std::string> overlay, output;
  bool forest = false, dual_tree = false;
  std::optional<double> scale;
};

Tiling read_tiling_file(const std::string& path, std::shared_ptr<const SquareSet> host) {
  std::ifstream in(path);
  if (!in) config_error("cannot open tiling file " + path);
  return read_tiling_csv(in, std::move(host));
}

int cmd_render(Run& run, const RenderFlags& f) {
  std::optional<Host> h;
  if (run.settings.path(run.common.region, "region")) h = load_host(run);
  const Tiling t = read_tiling_file(f.tiling, h ? h->squares : nullptr);
  std::optional<Tiling> overlay;
  if (f.overlay) overlay = read_tiling_file(*f.overlay, t.host);
  SvgOptions o;
  o.scale = run.settings.number(f.scale, "svg_scale", Defaults::svg_scale);
  o.forest = f.forest;
  o.dual_tree = f.dual_tree;
  if (overlay) o.overlay = &*overlay;
  if (h && h->tp) o.host = &*h->tp;
  const auto path = run.write(f.output.value_or("render.svg"), render_svg(t, o));
  run.out << dump({{"artifacts", {path.string()}}});
  return kOk;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config document (flags override it)");
  app->add_option("--region", c.region, "region document (geometry or square list)");
  app->add_option("-o,--output-dir", c.output_dir, "directory for artifacts (default .)");
  app->add_option_function<std::string>(
      "--eps", [&c](const std::string& s) { c.eps = parse_number(s); }, "lattice spacing, e.g. 1/64");
  app->add_option_function<std::string>(
      "--delta", [&c](const std::string& s) { c.delta = parse_number(s); }, "flat neighbourhood radius");
  app->add_option("-n,--samples", c.samples, "number of samples (pairs for cycles)");
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--threads", c.threads, "worker threads (results do not depend on it)");
}

void report_error(std::ostream& err, const std::string& tag, int code, const std::string& message) {
  std::string flat = message;
  for (char& ch : flat)
    if (ch == '\n') ch = ' ';
  err << "error: tag=" << tag << " exit=" << code << " message=\"" << flat << "\"\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temperleyan domino tilings: counting, sampling, couplings and height statistics", "dimer"};
  app.require_subcommand(1);
  Run run{{}, {}, out};
  add_common(&app, run.common);

  auto* build = app.add_subcommand("build", "discretize a region and write host.json");
  auto* count = app.add_subcommand("count", "print the number of domino tilings");
  bool count_json = false;
  count->add_flag("--json", count_json, "print a JSON object instead of the bare count");

  auto* sample = app.add_subcommand("sample", "draw one uniform tiling (tiling.csv, tiling.svg)");
  SampleFlags sf;
  sample->add_option("--index", sf.index, "sample index within the seeded stream");
  sample->add_flag("--forest", sf.forest, "draw the spanning forest arrows");
  sample->add_flag("--dual-tree", sf.dual_tree, "draw the dual tree arrows");
  sample->add_flag("--heights", sf.heights, "also write heights.csv");
  sample->add_option("--scale", sf.scale, "SVG pixels per square");

  auto* coupling = app.add_subcommand("coupling", "coupling function table (coupling.csv or c0.csv)");
  CouplingFlags cf;
  coupling->add_option("--source", cf.source, "source square x,y in lattice coordinates");
  coupling->add_option("--window", cf.window, "table window x0,y0,x1,y1");
  coupling->add_flag("--plane", cf.plane, "whole-plane coupling from the origin instead of a region");
  coupling->add_flag("--csv", cf.csv_stdout, "print CSV instead of the value table");

  auto* kernels = app.add_subcommand("kernels", "analytic or numerically extracted kernels");
  KernelFlags kf;
  kernels->add_option("--kind", kf.kind, "F0, F1, F+, F-, F0*, F1* or F+*");
  kernels->add_option("--domain", kf.domain, "halfplane or disk");
  kernels->add_option("--z1", kf.z1, "first point x,y");
  kernels->add_option("--z2", kf.z2, "second point x,y");
  kernels->add_option("--d0", kf.d0, "half-plane marked point on the real axis");
  kernels->add_option("--theta", kf.theta, "disk marked point angle");
  kernels->add_option("--probe", kf.probes, "numeric probe pair x1,y1,x2,y2 (repeatable)");
  kernels->add_option("--eps-list", kf.eps_list, "spacings for the numeric table, e.g. 1/16,1/32,1/64");
  kernels->add_option("--xi", kf.xi, "minimum probe distance from the boundary");

  auto* experiment = app.add_subcommand("experiment", "Monte Carlo height statistics");
  experiment->require_subcommand(1);
  ExperimentFlags ef;
  auto* mean_height = experiment->add_subcommand("mean-height", "mean height at probes vs harmonic theory");
  mean_height->add_option("--probe", ef.probes, "probe x,y (repeatable)");
  mean_height->add_option("--theory-resolution", ef.resolution, "grid steps of the harmonic solve");
  mean_height->add_option("--theory", ef.theory, "harmonic or none");
  auto* two_point = experiment->add_subcommand("two-point", "height covariance vs the half-plane closed form");
  two_point->add_option("--pair", ef.pairs, "probe pair x1,y1,x2,y2 (repeatable)");
  two_point->add_option("--baseline", ef.baseline, "y of the half-plane boundary line");
  two_point->add_option("--theory", ef.theory, "halfplane or none");
  auto* boundary = experiment->add_subcommand("boundary-moments", "joint central moments at boundary marks");
  boundary->add_option("--mark", ef.marks, "lattice vertex x,y with even x and odd y (repeatable)");
  boundary->add_option("--power", ef.powers, "power per mark (repeatable)");
  auto* cycles = experiment->add_subcommand("cycles", "separating double-dimer cycles vs Var/16");
  auto* growth = experiment->add_subcommand("variance-growth", "Var h(center) against log(1/eps)");
  growth->add_option("--center", ef.center, "probe x,y");
  growth->add_option("--eps-list", ef.eps_list, "spacings, e.g. 1/32,1/64,1/128");

  auto* render = app.add_subcommand("render", "render a tiling CSV as SVG");
  RenderFlags rf;
  render->add_option("--tiling", rf.tiling, "domino list CSV")->required();
  render->add_option("--overlay", rf.overlay, "second tiling for double-dimer cycles");
  render->add_option("--output", rf.output, "SVG file name inside the output directory");
  render->add_flag("--forest", rf.forest, "draw the spanning forest arrows");
  render->add_flag("--dual-tree", rf.dual_tree, "draw the dual tree arrows");
  render->add_option("--scale", rf.scale, "SVG pixels per square");

  for (auto* sub : {build, count, sample, coupling, kernels, experiment, render, mean_height, two_point, boundary,
                    cycles, growth})
    sub->fallthrough();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      report_error(err, "Usage", kUsage, e.what());
      return kUsage;
    }
    if (run.common.config) run.settings.load(*run.common.config);
    if (*build) return cmd_build(run);
    if (*count) return cmd_count(run, count_json);
    if (*sample) return cmd_sample(run, sf);
    if (*coupling) return cmd_coupling(run, cf);
    if (*kernels) return cmd_kernels(run, kf);
    if (*render) return cmd_render(run, rf);
    if (*mean_height) return exp_mean_height(run, ef);
    if (*two_point) return exp_two_point(run, ef);
    if (*boundary) return exp_boundary_moments(run, ef);
    if (*cycles) return exp_cycles(run);
    if (*growth) return exp_variance_growth(run, ef);
  } catch (const DimerError& e) {
    report_error(err, std::string(error_tag(e.kind())), exit_code(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const OutputError& e) {
    report_error(err, "Output", kOutput, e.what());
    return kOutput;
  } catch (const json::exception& e) {
    report_error(err, "ConfigParse", kConfigParse, e.what());
    return kConfigParse;
  } catch (const std::exception& e) {
    report_error(err, "Internal", kInternal, e.what());
    return kInternal;
  }
  return kUsage;
}

}  // namespace dimer::cli
