#include "dimer/render.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace dimer {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw DimerError(kind, msg); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void write_tiling_csv(std::ostream& out, const Tiling& t) {
  out << "white_x,white_y,black_x,black_y\n";
  for (const auto& [w, b] : t.dominoes()) out << w.x << ',' << w.y << ',' << b.x << ',' << b.y << '\n';
}

Tiling read_tiling_csv(std::istream& in, std::shared_ptr<const SquareSet> host) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("white_x,white_y,black_x,black_y", 0) != 0)
    fail(ErrorKind::ConfigParse, "missing domino list header");
  std::vector<std::pair<Site, Site>> dominoes;
  std::vector<Site> squares;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    int v[4];
    char comma;
    if (!(ss >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3]))
      fail(ErrorKind::ConfigParse, "bad domino row " + std::to_string(row));
    dominoes.push_back({{v[0], v[1]}, {v[2], v[3]}});
    squares.push_back({v[0], v[1]});
    squares.push_back({v[2], v[3]});
  }
  if (!host) host = std::make_shared<const SquareSet>(std::move(squares));
  return make_tiling(std::move(host), dominoes);
}

std::string render_svg(const Tiling& t, const SvgOptions& o) {
  const GridBox& box = t.host->box();
  const double s = o.scale, margin = 1.0;
  const double width = (box.width + 2 * margin) * s, height = (box.height + 2 * margin) * s;
  // Lattice point (x, y) to pixels; y grows upward on the lattice.
  auto px = [&](double x) { return num((x - box.x0 + 0.5 + margin) * s); };
  auto py = [&](double y) { return num((box.y0 + box.height - 0.5 - y + margin) * s); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
  out << "<style>.domino{stroke:#333;stroke-width:1}.horizontal{fill:#f2c14e}.vertical{fill:#5b8fb9}"
         ".forest{stroke:#b22;stroke-width:1.5}.dual-tree{stroke:#282;stroke-width:1.5}"
         ".cycle-a{stroke:#c33;stroke-width:2.5}.cycle-b{stroke:#33c;stroke-width:2.5}"
         ".doubled{stroke:#999;stroke-width:1.5}.d0,.exposed{fill:none;stroke:#000;stroke-width:2}"
         ".exposed{stroke-dasharray:3,2}</style>\n";
  out << "<g class=\"tiling\">\n";
  for (const auto& [w, b] : t.dominoes()) {
    const double x0 = std::min(w.x, b.x) - 0.5, x1 = std::max(w.x, b.x) + 0.5;
    const double y0 = std::min(w.y, b.y) - 0.5, y1 = std::max(w.y, b.y) + 0.5;
    const bool horizontal = w.y == b.y;
    out << "<rect class=\"domino " << (horizontal ? "horizontal" : "vertical") << "\" x=\"" << px(x0) << "\" y=\""
        << py(y1) << "\" width=\"" << num((x1 - x0) * s) << "\" height=\"" << num((y1 - y0) * s) << "\"/>\n";
  }
  out << "</g>\n";
  auto line = [&](const char* cls, double ax, double ay, double bx, double by) {
    out << "<line class=\"" << cls << "\" x1=\"" << px(ax) << "\" y1=\"" << py(ay) << "\" x2=\"" << px(bx)
        << "\" y2=\"" << py(by) << "\"/>\n";
  };
  if (o.forest || o.dual_tree) {
    out << "<g class=\"arrows\">\n";
    for (const auto& [w, b] : t.dominoes()) {
      const bool b0 = classify_square(b) == SquareClass::B0;
      if ((b0 && !o.forest) || (!b0 && !o.dual_tree)) continue;
      // From the black square through its partner to the next same-class square.
      const Site next{2 * w.x - b.x, 2 * w.y - b.y};
      line(b0 ? "forest" : "dual-tree", b.x, b.y, next.x, next.y);
    }
    out << "</g>\n";
  }
  if (o.overlay) {
    const Tiling& u = *o.overlay;
    if (u.partner.size() != t.partner.size() || u.host->sites() != t.host->sites())
      fail(ErrorKind::ForestHostMismatch, "overlay tiling has a different host");
    out << "<g class=\"cycles\">\n";
    const auto& sites = t.host->sites();
    for (std::size_t i = 0; i < sites.size(); ++i) {
      if (!is_white(sites[i])) continue;
      const Site w = sites[i], a = sites[t.partner[i]], b = sites[u.partner[i]];
      if (a == b) {
        line("doubled", w.x, w.y, a.x, a.y);
      } else {
        line("cycle-a", w.x, w.y, a.x, a.y);
        line("cycle-b", w.x, w.y, b.x, b.y);
      }
    }
    out << "</g>\n";
  }
  if (o.host) {
    auto outline = [&](const char* cls, const Site& q) {
      out << "<rect class=\"" << cls << "\" x=\"" << px(q.x - 0.5) << "\" y=\"" << py(q.y + 0.5) << "\" width=\""
          << num(s) << "\" height=\"" << num(s) << "\"/>\n";
    };
    outline("d0", o.host->d0());
    for (const auto& e : o.host->exposed()) outline("exposed", e);
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace dimer
