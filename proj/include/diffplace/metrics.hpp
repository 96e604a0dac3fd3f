#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "diffplace/netlist.hpp"

namespace diffplace {

// Pin-to-pin connectivity used for wirelength: the multi-pin nets when the
// netlist carries them, otherwise every edge as a 2-pin net.
struct WireNets {
  std::vector<Pin> pins;
  // pins[net_begin[k] .. net_begin[k+1]) belong to net k.
  std::vector<std::size_t> net_begin;

  std::size_t num_nets() const { return net_begin.empty() ? 0 : net_begin.size() - 1; }
};

WireNets wire_nets(const Netlist& netlist);

double hpwl(const Placement& placement, const Netlist& netlist);
double hpwl(const Placement& placement, const WireNets& nets);

// Subgradient w.r.t. object centers. Ties at a net's max/min go to the
// lowest-index pin of the net.
std::vector<Vec2> hpwl_subgradient(const Placement& placement, const Netlist& netlist);
std::vector<Vec2> hpwl_subgradient(const Placement& placement, const WireNets& nets);

// max(|dcx| - (wi+wj)/2, |dcy| - (hi+hj)/2); negative iff the rectangles overlap.
double signed_distance(std::size_t i, std::size_t j, const Placement& placement,
                       const Netlist& netlist);

// Rectangles overlap with positive area.
bool overlaps(const Vec2& ci, const ObjectGeom& gi, const Vec2& cj, const ObjectGeom& gj);
// Rectangle lies entirely in the canvas.
bool inside_canvas(const Vec2& c, const ObjectGeom& g);

struct Boundary {
  double xmin = -kCanvasHalf;
  double xmax = kCanvasHalf;
  double ymin = -kCanvasHalf;
  double ymax = kCanvasHalf;
};

enum class PairSearch { kAllPairs, kSweep };

struct PotentialResult {
  double value = 0.0;
  std::vector<Vec2> gradient;
};

// Sum over unordered pairs of min(0, d_ij)^2 plus one-sided wall terms.
// kSweep prunes pairs separated on x and gives bit-identical results.
PotentialResult legality_potential(const Placement& placement, const Netlist& netlist,
                                   const Boundary& boundary = {},
                                   PairSearch search = PairSearch::kAllPairs);

// Union area of the rectangles clipped to the canvas over the sum of their areas.
double legality_score(const Placement& placement, const Netlist& netlist);
double union_area(const Placement& placement, const Netlist& netlist);

struct RudyResult {
  std::size_t grid_n = 0;
  std::vector<double> map;  // row-major, row = y cell, col = x cell
  double scalar = 0.0;
};

RudyResult rudy(const Placement& placement, const Netlist& netlist, std::size_t grid_n = 256);

double hpwl_ratio(double generated_hpwl, double dataset_hpwl);

struct MetricReport {
  double hpwl = 0.0;
  std::optional<double> hpwl_original_units;
  double legality = 0.0;
  double rudy_scalar = 0.0;
  RudyResult rudy_map;
};

MetricReport evaluate(const Placement& placement, const Netlist& netlist, std::size_t rudy_grid = 256,
                      std::optional<double> unit_scale = std::nullopt);

}  // namespace diffplace
