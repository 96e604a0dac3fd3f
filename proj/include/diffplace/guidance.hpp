#pragma once

#include <cstdint>
#include <vector>

#include "diffplace/metrics.hpp"
#include "diffplace/netlist.hpp"
#include "diffplace/schedule.hpp"

namespace diffplace {

struct GuidanceConfig {
  double w_hpwl = 1e-4;
  double x_lr = 0.008;  // plain gradient descent on x0
  double w_lr = 5e-4;   // Adam ascent on the legality weight
  double w_init = 0.0;
  int inner_steps = 10;
  double slack = 1e-4;
  double w_g = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void check() const;
};

// Dual variable for the legality constraint and its Adam moments. Owned by
// one sampling trajectory and carried across timesteps.
struct LagrangeState {
  double w = 0.0;
  double m = 0.0;
  double v = 0.0;
  std::int64_t step = 0;
};

PotentialResult combined_potential(const Placement& x0, const Netlist& netlist, double w_hpwl, double w_legality);
PotentialResult combined_potential(const Placement& x0, const Netlist& netlist, const WireNets& nets,
                                   double w_hpwl, double w_legality);

struct GuidanceResult {
  std::vector<Vec2> delta;  // x'_final - x0; zero rows for fixed objects
  double phi_legality = 0.0;  // at x'_final
  double phi_hpwl = 0.0;
  bool flagged = false;  // non-finite intermediate; delta is zero
};

// Inner loop: descent on x' for w_hpwl * hpwl + w * phi_legality, then one
// Adam ascent step on w with gradient (phi_legality(x') - slack), w >= 0.
GuidanceResult backward_guidance(const Placement& x0, const Netlist& netlist, const GuidanceConfig& config,
                                 LagrangeState& state);
GuidanceResult backward_guidance(const Placement& x0, const Netlist& netlist, const WireNets& nets,
                                 const GuidanceConfig& config, LagrangeState& state);

// eps' = eps - w_g * sqrt(alphabar_t) / sqrt(1 - alphabar_t) * delta, so that
// predict_x0 under eps' moves by exactly w_g * delta.
std::vector<Vec2> guided_score(const std::vector<Vec2>& eps_hat, const std::vector<Vec2>& delta, std::size_t t,
                               const NoiseSchedule& schedule, double w_g);

}  // namespace diffplace
