#include <cstdio>
#include <sstream>

#include "diffplace/io.hpp"
#include "diffplace/metrics.hpp"

namespace diffplace {

namespace {

constexpr const char* kMacroFill = "#f2c14e";
constexpr const char* kClusterFill = "#4a7fd0";
constexpr const char* kFixedFill = "#9a9a9a";
constexpr const char* kOverlapStroke = "#d62828";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Draws one panel into `os`, with the canvas occupying [ox, ox + size] x [oy, oy + size].
void panel(std::ostringstream& os, const Placement& pl, const Netlist& nl, const RenderOptions& opt, double ox,
           double oy) {
  const double size = opt.size_px;
  const double k = size / (2 * kCanvasHalf);
  auto px = [&](double x) { return ox + (x + kCanvasHalf) * k; };
  auto py = [&](double y) { return oy + (kCanvasHalf - y) * k; };

  os << "<rect class=\"canvas\" x=\"" << num(ox) << "\" y=\"" << num(oy) << "\" width=\"" << num(size)
     << "\" height=\"" << num(size) << "\" fill=\"#ffffff\" stroke=\"#000000\" stroke-width=\"1\"/>\n";

  std::vector<bool> in_overlap(nl.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (opt.highlight_overlaps) {
    for (std::size_t i = 0; i < nl.size(); ++i) {
      for (std::size_t j = i + 1; j < nl.size(); ++j) {
        if (overlaps(pl.coords[i], nl.objects[i], pl.coords[j], nl.objects[j])) {
          pairs.emplace_back(i, j);
          in_overlap[i] = in_overlap[j] = true;
        }
      }
    }
  }

  for (std::size_t i = 0; i < nl.size(); ++i) {
    const auto& g = nl.objects[i];
    const Vec2 c = pl.coords[i];
    const char* fill = nl.is_fixed(i) ? kFixedFill : nl.is_macro(i) ? kMacroFill : kClusterFill;
    os << "<rect class=\"obj\" x=\"" << num(px(c.x - g.width / 2)) << "\" y=\"" << num(py(c.y + g.height / 2))
       << "\" width=\"" << num(g.width * k) << "\" height=\"" << num(g.height * k) << "\" fill=\"" << fill
       << "\" fill-opacity=\"0.8\" stroke=\"" << (in_overlap[i] ? kOverlapStroke : "#333333") << "\" stroke-width=\""
       << (in_overlap[i] ? "1.5" : "0.5") << "\"/>\n";
  }

  if (opt.draw_edges) {
    for (const auto& e : nl.edges) {
      const Vec2 a = pl.coords[e.src] + e.attr.src_offset, b = pl.coords[e.dst] + e.attr.dst_offset;
      os << "<line class=\"edge\" x1=\"" << num(px(a.x)) << "\" y1=\"" << num(py(a.y)) << "\" x2=\"" << num(px(b.x))
         << "\" y2=\"" << num(py(b.y)) << "\" stroke=\"#555555\" stroke-opacity=\"0.4\" stroke-width=\"0.5\"/>\n";
    }
  }

  for (auto [i, j] : pairs) {
    const auto &gi = nl.objects[i], &gj = nl.objects[j];
    const Vec2 ci = pl.coords[i], cj = pl.coords[j];
    const double x0 = std::max(ci.x - gi.width / 2, cj.x - gj.width / 2);
    const double x1 = std::min(ci.x + gi.width / 2, cj.x + gj.width / 2);
    const double y0 = std::max(ci.y - gi.height / 2, cj.y - gj.height / 2);
    const double y1 = std::min(ci.y + gi.height / 2, cj.y + gj.height / 2);
    os << "<rect class=\"overlap\" data-pair=\"" << i << "," << j << "\" x=\"" << num(px(x0)) << "\" y=\""
       << num(py(y1)) << "\" width=\"" << num((x1 - x0) * k) << "\" height=\"" << num((y1 - y0) * k)
       << "\" fill=\"" << kOverlapStroke << "\" fill-opacity=\"0.35\" stroke=\"" << kOverlapStroke
       << "\" stroke-width=\"1\" stroke-dasharray=\"2,1\"/>\n";
  }
}

void check(const Placement& pl, const Netlist& nl) {
  if (pl.size() != nl.size()) throw std::invalid_argument("render: placement length does not match the netlist");
}

}  // namespace

std::string render_svg(const Placement& placement, const Netlist& netlist, const RenderOptions& options) {
  check(placement, netlist);
  const double title_h = options.title.empty() ? 0.0 : 20.0;
  const double w = options.size_px, h = options.size_px + title_h;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\" viewBox=\"0 0 " << num(w) << " " << num(h) << "\">\n";
  if (!options.title.empty()) {
    os << "<text x=\"4\" y=\"15\" font-family=\"sans-serif\" font-size=\"13\">" << escape(options.title) << "</text>\n";
  }
  panel(os, placement, netlist, options, 0.0, title_h);
  os << "</svg>\n";
  return os.str();
}

std::string render_filmstrip(const std::vector<Placement>& frames, const std::vector<std::string>& labels,
                             const Netlist& netlist, const RenderOptions& options) {
  for (const auto& f : frames) check(f, netlist);
  if (!labels.empty() && labels.size() != frames.size()) {
    throw std::invalid_argument("render_filmstrip: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(frames.size()) + " frames");
  }
  const double gap = 8.0, label_h = 18.0, s = options.size_px;
  const double title_h = options.title.empty() ? 0.0 : 20.0;
  const double w = frames.empty() ? s : static_cast<double>(frames.size()) * (s + gap) - gap;
  const double h = title_h + label_h + s;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\" viewBox=\"0 0 " << num(w) << " " << num(h) << "\">\n";
  if (!options.title.empty()) {
    os << "<text x=\"4\" y=\"15\" font-family=\"sans-serif\" font-size=\"13\">" << escape(options.title) << "</text>\n";
  }
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const double ox = static_cast<double>(f) * (s + gap);
    os << "<g class=\"panel\">\n";
    if (f < labels.size()) {
      os << "<text x=\"" << num(ox + 2) << "\" y=\"" << num(title_h + 13) << "\" font-family=\"sans-serif\" font-size=\"12\">"
         << escape(labels[f]) << "</text>\n";
    }
    panel(os, frames[f], netlist, options, ox, title_h + label_h);
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace diffplace
