#include "diffplace/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "diffplace/metrics.hpp"

namespace diffplace {

namespace {

std::string fmt(double v, const char* format = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double parse_number(const std::string& s, StudyAxis axis) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("study axis '" + std::string(to_string(axis)) + "' expects numeric grid values, got '" +
                                s + "'");
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Mean object count of the base distribution.
double reference_count(const SynthParams& base) {
  if (base.min_objects > 0 && base.max_objects > 0) return 0.5 * (base.min_objects + base.max_objects);
  double sum = 0.0;
  const int n = 16;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(generate_circuit(base, derive_seed(0, "study-ref", i)).netlist.size());
  return sum / n;
}

}  // namespace

std::string_view to_string(StudyAxis axis) {
  switch (axis) {
    case StudyAxis::kEdges: return "edges";
    case StudyAxis::kVertices: return "vertices";
    case StudyAxis::kScale: return "scale";
    case StudyAxis::kEdgeDist: return "edge-dist";
  }
  return "?";
}

StudyAxis study_axis_from_string(std::string_view name) {
  if (name == "edges") return StudyAxis::kEdges;
  if (name == "vertices") return StudyAxis::kVertices;
  if (name == "scale") return StudyAxis::kScale;
  if (name == "edge-dist") return StudyAxis::kEdgeDist;
  throw std::invalid_argument("unknown study axis '" + std::string(name) +
                              "' (expected edges, vertices, scale or edge-dist)");
}

std::vector<StudyPoint> study_grid(StudyAxis axis, const SynthParams& base, const std::vector<std::string>& values) {
  if (values.empty()) throw std::invalid_argument("study grid is empty");
  std::vector<StudyPoint> grid;
  double ref = 0.0;
  if (axis == StudyAxis::kVertices) ref = reference_count(base);
  for (std::size_t k = 0; k < values.size(); ++k) {
    StudyPoint pt{values[k], 0.0, base};
    SynthParams& p = pt.params;
    switch (axis) {
      case StudyAxis::kEdges:
        pt.value = parse_number(values[k], axis);
        p.gamma_coeff = pt.value;
        break;
      case StudyAxis::kScale:
        pt.value = parse_number(values[k], axis);
        p.scale_s = {pt.value, pt.value};
        break;
      case StudyAxis::kVertices: {
        pt.value = parse_number(values[k], axis);
        if (pt.value < 2) throw std::invalid_argument("vertex grid values must be >= 2");
        const double f = std::sqrt(ref / pt.value);
        p.size.scale *= f;
        p.size.min *= f;
        p.size.max = std::min(p.size.max, std::max(p.size.min, p.size.max * f));
        p.min_objects = static_cast<int>(std::floor(0.75 * pt.value));
        p.max_objects = static_cast<int>(std::ceil(1.25 * pt.value));
        break;
      }
      case StudyAxis::kEdgeDist:
        pt.value = static_cast<double>(k);
        p.edge_dist = edge_dist_from_string(values[k]);
        break;
    }
    p.check();
    grid.push_back(std::move(pt));
  }
  return grid;
}

std::vector<StudyRow> run_study(const Denoiser& model, const NoiseSchedule& schedule, StudyAxis axis,
                                const std::vector<StudyPoint>& grid, const StudyOptions& options) {
  if (options.count == 0 || options.seeds == 0) throw std::invalid_argument("study needs count and seeds >= 1");
  std::vector<StudyRow> rows;
  for (const auto& pt : grid) {
    for (std::size_t k = 0; k < options.seeds; ++k) {
      const std::uint64_t sk = derive_seed(options.seed, "study", k);
      std::vector<Circuit> circuits;
      std::vector<const Netlist*> nls;
      for (std::size_t i = 0; i < options.count; ++i) circuits.push_back(generate_circuit(pt.params, derive_seed(sk, "circuit", i)));
      for (const auto& c : circuits) nls.push_back(&c.netlist);
      SampleOptions so;
      so.seed = derive_seed(sk, "sample");
      so.guidance = options.guidance;
      const auto res = sample_batch(model, schedule, nls, {}, so);

      StudyRow row{std::string(to_string(axis)), pt.label, pt.value, k, circuits.size()};
      std::vector<double> leg;
      double h = 0.0, href = 0.0;
      for (std::size_t i = 0; i < circuits.size(); ++i) {
        leg.push_back(legality_score(res[i].placement, circuits[i].netlist));
        h += hpwl(res[i].placement, circuits[i].netlist);
        href += hpwl(circuits[i].placement, circuits[i].netlist);
        row.mean_objects += static_cast<double>(circuits[i].netlist.size());
        row.mean_edges += static_cast<double>(circuits[i].netlist.edges.size());
      }
      const double n = static_cast<double>(circuits.size());
      row.mean_objects /= n;
      row.mean_edges /= n;
      row.median_legality = median(leg);
      for (double l : leg) row.mean_legality += l / n;
      row.hpwl_ratio = href > 0 ? h / href : std::nan("");
      rows.push_back(row);
    }
  }
  return rows;
}

std::string study_csv(const std::vector<StudyRow>& rows) {
  std::ostringstream os;
  os << "axis,label,value,seed,circuits,mean_objects,mean_edges,median_legality,mean_legality,hpwl_ratio\n";
  for (const auto& r : rows) {
    os << r.axis << ',' << r.label << ',' << fmt(r.value) << ',' << r.seed_index << ',' << r.circuits << ','
       << fmt(r.mean_objects) << ',' << fmt(r.mean_edges) << ',' << fmt(r.median_legality) << ','
       << fmt(r.mean_legality) << ',' << fmt(r.hpwl_ratio) << '\n';
  }
  return os.str();
}

std::string study_svg(const std::vector<StudyRow>& rows) {
  // Average over seeds, keeping grid order.
  std::vector<std::string> labels;
  std::map<std::string, std::vector<const StudyRow*>> by_label;
  for (const auto& r : rows) {
    if (!by_label.count(r.label)) labels.push_back(r.label);
    by_label[r.label].push_back(&r);
  }
  std::vector<double> xs, leg, ratio;
  for (const auto& l : labels) {
    double a = 0, b = 0;
    for (const StudyRow* r : by_label[l]) {
      a += r->median_legality;
      b += r->hpwl_ratio;
    }
    const double n = static_cast<double>(by_label[l].size());
    xs.push_back(by_label[l].front()->value);
    leg.push_back(a / n);
    ratio.push_back(b / n);
  }
  const std::string axis = rows.empty() ? "" : rows.front().axis;

  const double pw = 320, ph = 220, ml = 48, mt = 28, mb = 40, gap = 40;
  const double W = 2 * (ml + pw) + gap + 16, H = mt + ph + mb;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W, "%.0f") << "\" height=\"" << fmt(H, "%.0f")
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  auto chart = [&](double ox, const std::vector<double>& ys, const std::string& title, double ymin, double ymax) {
    for (double y : ys) {
      if (std::isfinite(y)) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
    if (ymax <= ymin) ymax = ymin + 1;
    double xmin = xs.empty() ? 0 : *std::min_element(xs.begin(), xs.end());
    double xmax = xs.empty() ? 1 : *std::max_element(xs.begin(), xs.end());
    if (xmax <= xmin) {
      xmin -= 0.5;
      xmax += 0.5;
    }
    auto px = [&](double x) { return ox + ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };
    os << "<g class=\"chart\">\n<text x=\"" << fmt(ox + ml) << "\" y=\"16\" font-size=\"13\">" << title << "</text>\n";
    os << "<rect x=\"" << fmt(ox + ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
       << "\" fill=\"none\" stroke=\"#000000\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double y = ymin + (ymax - ymin) * k / 4.0;
      os << "<text x=\"" << fmt(ox + ml - 4) << "\" y=\"" << fmt(py(y) + 4) << "\" text-anchor=\"end\">"
         << fmt(y, "%.3g") << "</text>\n";
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
      os << "<text x=\"" << fmt(px(xs[i])) << "\" y=\"" << fmt(mt + ph + 14) << "\" text-anchor=\"middle\">"
         << labels[i] << "</text>\n";
    }
    os << "<text x=\"" << fmt(ox + ml + pw / 2) << "\" y=\"" << fmt(H - 6) << "\" text-anchor=\"middle\">" << axis
       << "</text>\n<polyline class=\"series\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (std::isfinite(ys[i])) os << (i ? " " : "") << fmt(px(xs[i])) << "," << fmt(py(ys[i]));
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!std::isfinite(ys[i])) continue;
      os << "<circle cx=\"" << fmt(px(xs[i])) << "\" cy=\"" << fmt(py(ys[i])) << "\" r=\"3\" fill=\"#1f5fa8\"/>\n";
    }
    os << "</g>\n";
  };
  chart(0, leg, "median legality", 0.0, 1.0);
  chart(ml + pw + gap, ratio, "HPWL ratio", 1.0, 1.0);
  os << "</svg>\n";
  return os.str();
}

}  // namespace diffplace
