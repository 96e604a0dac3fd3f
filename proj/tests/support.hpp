#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "diffplace/netlist.hpp"
#include "diffplace/rng.hpp"

namespace testing {

using namespace diffplace;

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// n random objects, a random placement around the canvas, and random pins.
struct RandomInstance {
  Netlist netlist;
  Placement placement;
};

inline Pin random_pin(Rng& rng, const Netlist& nl, std::size_t owner) {
  const auto& g = nl.objects[owner];
  return {owner, {uniform(rng, -g.width / 2, g.width / 2), uniform(rng, -g.height / 2, g.height / 2)}};
}

inline RandomInstance random_instance(Rng& rng, std::size_t n, std::size_t nets, double size_lo = 0.05,
                                      double size_hi = 0.5, double spread = 0.9) {
  RandomInstance r;
  for (std::size_t i = 0; i < n; ++i) {
    r.netlist.objects.push_back({uniform(rng, size_lo, size_hi), uniform(rng, size_lo, size_hi)});
    r.placement.coords.push_back({uniform(rng, -spread, spread), uniform(rng, -spread, spread)});
  }
  std::uniform_int_distribution<std::size_t> obj(0, n - 1), deg(2, 5);
  for (std::size_t k = 0; k < nets; ++k) {
    Net net;
    const std::size_t d = deg(rng);
    for (std::size_t p = 0; p < d; ++p) net.pins.push_back(random_pin(rng, r.netlist, obj(rng)));
    r.netlist.nets.push_back(std::move(net));
  }
  return r;
}

// Central difference of f along coordinate (i, axis) of a placement.
template <typename F>
double fd(F&& f, Placement p, std::size_t i, int axis, double h) {
  double& v = axis == 0 ? p.coords[i].x : p.coords[i].y;
  const double v0 = v;
  v = v0 + h;
  const double fp = f(p);
  v = v0 - h;
  const double fm = f(p);
  return (fp - fm) / (2 * h);
}

}  // namespace testing
