#include "diffplace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace diffplace {

WireNets wire_nets(const Netlist& nl) {
  WireNets out;
  out.net_begin.push_back(0);
  if (nl.has_nets()) {
    for (const auto& net : nl.nets) {
      out.pins.insert(out.pins.end(), net.pins.begin(), net.pins.end());
      out.net_begin.push_back(out.pins.size());
    }
  } else {
    for (const auto& e : nl.edges) {
      out.pins.push_back({e.src, e.attr.src_offset});
      out.pins.push_back({e.dst, e.attr.dst_offset});
      out.net_begin.push_back(out.pins.size());
    }
  }
  return out;
}

namespace {

// Broad-phase margin so rounding in left/right never prunes a pair that the
// exact gap test would report as overlapping.
constexpr double kSweepSlack = 1e-9;

struct NetBox {
  double xmin, xmax, ymin, ymax;
  std::size_t arg_xmin, arg_xmax, arg_ymin, arg_ymax;  // pin indices
};

// Gather pin positions (message), then reduce per net (aggregate). Strict
// comparisons keep the lowest-index pin on ties.
std::vector<NetBox> net_boxes(const Placement& pl, const WireNets& nets) {
  std::vector<Vec2> pos(nets.pins.size());
  std::transform(nets.pins.begin(), nets.pins.end(), pos.begin(),
                 [&](const Pin& p) { return pin_position(pl, p); });

  std::vector<NetBox> boxes(nets.num_nets());
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const std::size_t b = nets.net_begin[k];
    const std::size_t e = nets.net_begin[k + 1];
    NetBox box{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
               b, b, b, b};
    for (std::size_t p = b; p < e; ++p) {
      if (pos[p].x < box.xmin) box.xmin = pos[p].x, box.arg_xmin = p;
      if (pos[p].x > box.xmax) box.xmax = pos[p].x, box.arg_xmax = p;
      if (pos[p].y < box.ymin) box.ymin = pos[p].y, box.arg_ymin = p;
      if (pos[p].y > box.ymax) box.ymax = pos[p].y, box.arg_ymax = p;
    }
    boxes[k] = box;
  }
  return boxes;
}

}  // namespace

double hpwl(const Placement& pl, const WireNets& nets) {
  const auto boxes = net_boxes(pl, nets);
  return std::transform_reduce(boxes.begin(), boxes.end(), 0.0, std::plus<>(), [](const NetBox& b) {
    return b.xmax >= b.xmin ? (b.xmax - b.xmin) + (b.ymax - b.ymin) : 0.0;
  });
}

double hpwl(const Placement& pl, const Netlist& nl) { return hpwl(pl, wire_nets(nl)); }

std::vector<Vec2> hpwl_subgradient(const Placement& pl, const WireNets& nets) {
  std::vector<Vec2> grad(pl.size());
  const auto boxes = net_boxes(pl, nets);
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    if (nets.net_begin[k] == nets.net_begin[k + 1]) continue;
    const auto& b = boxes[k];
    grad[nets.pins[b.arg_xmax].owner].x += 1.0;
    grad[nets.pins[b.arg_xmin].owner].x -= 1.0;
    grad[nets.pins[b.arg_ymax].owner].y += 1.0;
    grad[nets.pins[b.arg_ymin].owner].y -= 1.0;
  }
  return grad;
}

std::vector<Vec2> hpwl_subgradient(const Placement& pl, const Netlist& nl) {
  return hpwl_subgradient(pl, wire_nets(nl));
}

double signed_distance(std::size_t i, std::size_t j, const Placement& pl, const Netlist& nl) {
  const auto& a = nl.objects[i];
  const auto& b = nl.objects[j];
  const double gx = std::abs(pl.coords[i].x - pl.coords[j].x) - (a.width + b.width) / 2;
  const double gy = std::abs(pl.coords[i].y - pl.coords[j].y) - (a.height + b.height) / 2;
  return std::max(gx, gy);
}

bool overlaps(const Vec2& ci, const ObjectGeom& gi, const Vec2& cj, const ObjectGeom& gj) {
  const double gx = std::abs(ci.x - cj.x) - (gi.width + gj.width) / 2;
  const double gy = std::abs(ci.y - cj.y) - (gi.height + gj.height) / 2;
  return gx < 0 && gy < 0;
}

bool inside_canvas(const Vec2& c, const ObjectGeom& g) {
  return c.x - g.width / 2 >= -kCanvasHalf && c.x + g.width / 2 <= kCanvasHalf &&
         c.y - g.height / 2 >= -kCanvasHalf && c.y + g.height / 2 <= kCanvasHalf;
}

namespace {

// Accumulates min(0, d)^2 for one pair into value and gradient. Coincident
// centers push i toward +axis and j toward -axis.
void accumulate_pair(std::size_t i, std::size_t j, const Placement& pl, const Netlist& nl,
                     PotentialResult& res) {
  const auto& a = nl.objects[i];
  const auto& b = nl.objects[j];
  const double dx = pl.coords[i].x - pl.coords[j].x;
  const double dy = pl.coords[i].y - pl.coords[j].y;
  const double gx = std::abs(dx) - (a.width + b.width) / 2;
  const double gy = std::abs(dy) - (a.height + b.height) / 2;
  const double d = std::max(gx, gy);
  if (!(d < 0)) return;
  res.value += d * d;
  // gx == gy resolves to the x axis.
  if (gx >= gy) {
    const double s = dx >= 0 ? 1.0 : -1.0;
    res.gradient[i].x += 2 * d * s;
    res.gradient[j].x -= 2 * d * s;
  } else {
    const double s = dy >= 0 ? 1.0 : -1.0;
    res.gradient[i].y += 2 * d * s;
    res.gradient[j].y -= 2 * d * s;
  }
}

void accumulate_walls(std::size_t i, const Placement& pl, const Netlist& nl, const Boundary& bd,
                      PotentialResult& res) {
  const auto& g = nl.objects[i];
  const auto& c = pl.coords[i];
  auto wall = [&](double clearance, double sign, double& grad_axis) {
    if (clearance < 0) {
      res.value += clearance * clearance;
      grad_axis += 2 * clearance * sign;
    }
  };
  wall(c.x - g.width / 2 - bd.xmin, 1.0, res.gradient[i].x);
  wall(bd.xmax - c.x - g.width / 2, -1.0, res.gradient[i].x);
  wall(c.y - g.height / 2 - bd.ymin, 1.0, res.gradient[i].y);
  wall(bd.ymax - c.y - g.height / 2, -1.0, res.gradient[i].y);
}

}  // namespace

PotentialResult legality_potential(const Placement& pl, const Netlist& nl, const Boundary& bd,
                                   PairSearch search) {
  const std::size_t n = nl.size();
  PotentialResult res;
  res.gradient.assign(n, Vec2{});

  if (search == PairSearch::kAllPairs) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) accumulate_pair(i, j, pl, nl, res);
    }
  } else {
    // Broad phase over x-intervals, then replay candidates in (i, j) order so
    // the floating-point accumulation matches the all-pairs loop exactly.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto left = [&](std::size_t k) { return pl.coords[k].x - nl.objects[k].width / 2; };
    auto right = [&](std::size_t k) { return pl.coords[k].x + nl.objects[k].width / 2; };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return left(a) < left(b); });
    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t a = 0; a < n; ++a) {
      const double r = right(order[a]);
      for (std::size_t b = a + 1; b < n && left(order[b]) <= r + kSweepSlack; ++b) {
        candidates.emplace_back(std::min(order[a], order[b]), std::max(order[a], order[b]));
      }
    }
    std::sort(candidates.begin(), candidates.end());
    for (const auto& [i, j] : candidates) accumulate_pair(i, j, pl, nl, res);
  }
  for (std::size_t i = 0; i < n; ++i) accumulate_walls(i, pl, nl, bd, res);
  return res;
}

double union_area(const Placement& pl, const Netlist& nl) {
  struct Rect {
    double x0, x1, y0, y1;
  };
  std::vector<Rect> rects;
  rects.reserve(nl.size());
  for (std::size_t i = 0; i < nl.size(); ++i) {
    const auto& g = nl.objects[i];
    const auto& c = pl.coords[i];
    Rect r{std::max(c.x - g.width / 2, -kCanvasHalf), std::min(c.x + g.width / 2, kCanvasHalf),
           std::max(c.y - g.height / 2, -kCanvasHalf), std::min(c.y + g.height / 2, kCanvasHalf)};
    if (r.x0 < r.x1 && r.y0 < r.y1) rects.push_back(r);
  }
  if (rects.empty()) return 0.0;

  std::vector<double> ys;
  ys.reserve(2 * rects.size());
  for (const auto& r : rects) {
    ys.push_back(r.y0);
    ys.push_back(r.y1);
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  auto y_index = [&](double y) {
    return static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), y) - ys.begin());
  };

  struct Event {
    double x;
    int delta;
    std::size_t lo, hi;
  };
  std::vector<Event> events;
  events.reserve(2 * rects.size());
  for (const auto& r : rects) {
    events.push_back({r.x0, +1, y_index(r.y0), y_index(r.y1)});
    events.push_back({r.x1, -1, y_index(r.y0), y_index(r.y1)});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.x < b.x; });

  std::vector<int> cover(ys.size() - 1, 0);
  double covered = 0.0;  // covered y length of the current slab
  double area = 0.0;
  double prev_x = events.front().x;
  for (std::size_t k = 0; k < events.size();) {
    const double x = events[k].x;
    area += covered * (x - prev_x);
    for (; k < events.size() && events[k].x == x; ++k) {
      for (std::size_t s = events[k].lo; s < events[k].hi; ++s) cover[s] += events[k].delta;
    }
    covered = 0.0;
    for (std::size_t s = 0; s < cover.size(); ++s) {
      if (cover[s] > 0) covered += ys[s + 1] - ys[s];
    }
    prev_x = x;
  }
  return area;
}

double legality_score(const Placement& pl, const Netlist& nl) {
  double total = 0.0;
  for (const auto& g : nl.objects) total += g.area();
  if (!(total > 0)) throw std::invalid_argument("legality_score: netlist has zero total object area");

  // Exact answer in the legal case avoids rounding noise from the sweep.
  bool legal = true;
  for (std::size_t i = 0; i < nl.size() && legal; ++i) {
    legal = inside_canvas(pl.coords[i], nl.objects[i]);
  }
  if (legal) {
    // x-sorted sweep; only pairs whose x-intervals intersect can overlap.
    std::vector<std::size_t> order(nl.size());
    std::iota(order.begin(), order.end(), 0);
    auto left = [&](std::size_t k) { return pl.coords[k].x - nl.objects[k].width / 2; };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return left(a) < left(b); });
    for (std::size_t a = 0; a < order.size() && legal; ++a) {
      const std::size_t i = order[a];
      const double r = pl.coords[i].x + nl.objects[i].width / 2;
      for (std::size_t b = a + 1; b < order.size() && left(order[b]) <= r + kSweepSlack && legal; ++b) {
        const std::size_t j = order[b];
        legal = !overlaps(pl.coords[i], nl.objects[i], pl.coords[j], nl.objects[j]);
      }
    }
  }
  if (legal) return 1.0;
  return std::min(union_area(pl, nl) / total, std::nextafter(1.0, 0.0));
}

RudyResult rudy(const Placement& pl, const Netlist& nl, std::size_t grid_n) {
  if (grid_n == 0) throw std::invalid_argument("rudy: grid_n must be >= 1");
  RudyResult res;
  res.grid_n = grid_n;
  res.map.assign(grid_n * grid_n, 0.0);
  const double pitch = 2 * kCanvasHalf / static_cast<double>(grid_n);
  const double cell_area = pitch * pitch;

  const WireNets nets = wire_nets(nl);
  for (std::size_t k = 0; k < nets.num_nets(); ++k) {
    const std::size_t b = nets.net_begin[k];
    const std::size_t e = nets.net_begin[k + 1];
    if (b == e) continue;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (std::size_t p = b; p < e; ++p) {
      const Vec2 q = pin_position(pl, nets.pins[p]);
      x0 = std::min(x0, q.x), x1 = std::max(x1, q.x);
      y0 = std::min(y0, q.y), y1 = std::max(y1, q.y);
    }
    // Degenerate extents are widened symmetrically to one cell pitch.
    if (x1 - x0 < pitch) {
      const double cx = (x0 + x1) / 2;
      x0 = cx - pitch / 2, x1 = cx + pitch / 2;
    }
    if (y1 - y0 < pitch) {
      const double cy = (y0 + y1) / 2;
      y0 = cy - pitch / 2, y1 = cy + pitch / 2;
    }
    const double dx = x1 - x0;
    const double dy = y1 - y0;
    const double density = (dx + dy) / (dx * dy);

    auto cell_range = [&](double lo, double hi) {
      const double n = static_cast<double>(grid_n);
      const auto first = static_cast<long>(std::floor((lo + kCanvasHalf) / pitch));
      const auto last = static_cast<long>(std::ceil((hi + kCanvasHalf) / pitch));
      return std::pair<long, long>{std::max(first, 0L), std::min(last, static_cast<long>(n))};
    };
    const auto [cx0, cx1] = cell_range(x0, x1);
    const auto [cy0, cy1] = cell_range(y0, y1);
    for (long cy = cy0; cy < cy1; ++cy) {
      const double ly = -kCanvasHalf + pitch * static_cast<double>(cy);
      const double oy = std::min(y1, ly + pitch) - std::max(y0, ly);
      if (oy <= 0) continue;
      for (long cx = cx0; cx < cx1; ++cx) {
        const double lx = -kCanvasHalf + pitch * static_cast<double>(cx);
        const double ox = std::min(x1, lx + pitch) - std::max(x0, lx);
        if (ox <= 0) continue;
        res.map[static_cast<std::size_t>(cy) * grid_n + static_cast<std::size_t>(cx)] +=
            density * (ox * oy) / cell_area;
      }
    }
  }

  std::vector<double> sorted = res.map;
  const std::size_t top = std::max<std::size_t>(1, (sorted.size() + 9) / 10);
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<long>(top), sorted.end(),
                    std::greater<>());
  res.scalar = std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(top), 0.0) /
               static_cast<double>(top);
  return res;
}

double hpwl_ratio(double generated_hpwl, double dataset_hpwl) {
  if (dataset_hpwl == 0.0) throw std::invalid_argument("hpwl_ratio: reference HPWL is zero");
  return generated_hpwl / dataset_hpwl;
}

MetricReport evaluate(const Placement& pl, const Netlist& nl, std::size_t rudy_grid,
                      std::optional<double> unit_scale) {
  MetricReport rep;
  rep.hpwl = hpwl(pl, nl);
  if (unit_scale) rep.hpwl_original_units = rep.hpwl * *unit_scale;
  rep.legality = legality_score(pl, nl);
  rep.rudy_map = rudy(pl, nl, rudy_grid);
  rep.rudy_scalar = rep.rudy_map.scalar;
  return rep;
}

}  // namespace diffplace
