#include "diffplace/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace diffplace {

void GuidanceConfig::check() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("GuidanceConfig: " + what); };
  if (!(x_lr > 0) || !(w_lr > 0)) fail("learning rates must be positive");
  if (inner_steps < 1) fail("inner_steps must be at least 1");
  if (w_hpwl < 0 || slack < 0 || w_init < 0) fail("w_hpwl, slack and w_init must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("Adam betas must lie in [0, 1)");
}

PotentialResult combined_potential(const Placement& x0, const Netlist& netlist, double w_hpwl, double w_legality) {
  return combined_potential(x0, netlist, wire_nets(netlist), w_hpwl, w_legality);
}

PotentialResult combined_potential(const Placement& x0, const Netlist& netlist, const WireNets& nets,
                                   double w_hpwl, double w_legality) {
  PotentialResult r;
  r.gradient.assign(x0.size(), {});
  if (w_legality != 0.0) {
    auto leg = legality_potential(x0, netlist, {}, PairSearch::kSweep);
    r.value += w_legality * leg.value;
    for (std::size_t i = 0; i < x0.size(); ++i) r.gradient[i] = r.gradient[i] + w_legality * leg.gradient[i];
  }
  if (w_hpwl != 0.0) {
    r.value += w_hpwl * hpwl(x0, nets);
    auto g = hpwl_subgradient(x0, nets);
    for (std::size_t i = 0; i < x0.size(); ++i) r.gradient[i] = r.gradient[i] + w_hpwl * g[i];
  }
  return r;
}

GuidanceResult backward_guidance(const Placement& x0, const Netlist& netlist, const GuidanceConfig& config,
                                 LagrangeState& state) {
  return backward_guidance(x0, netlist, wire_nets(netlist), config, state);
}

GuidanceResult backward_guidance(const Placement& x0, const Netlist& netlist, const WireNets& nets,
                                 const GuidanceConfig& config, LagrangeState& state) {
  GuidanceResult res;
  res.delta.assign(x0.size(), {});
  Placement x = x0;
  LagrangeState s = state;
  auto finite = [](const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); };
  for (int it = 0; it < config.inner_steps; ++it) {
    auto pot = combined_potential(x, netlist, nets, config.w_hpwl, s.w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (netlist.is_fixed(i)) continue;
      x.coords[i] = x.coords[i] - config.x_lr * pot.gradient[i];
    }
    const double phi = legality_potential(x, netlist, {}, PairSearch::kSweep).value;
    if (!std::isfinite(phi) || !std::all_of(x.coords.begin(), x.coords.end(), finite)) {
      res.flagged = true;
      return res;
    }
    const double g = phi - config.slack;
    ++s.step;
    s.m = config.beta1 * s.m + (1 - config.beta1) * g;
    s.v = config.beta2 * s.v + (1 - config.beta2) * g * g;
    const double mhat = s.m / (1 - std::pow(config.beta1, static_cast<double>(s.step)));
    const double vhat = s.v / (1 - std::pow(config.beta2, static_cast<double>(s.step)));
    s.w = std::max(0.0, s.w + config.w_lr * mhat / (std::sqrt(vhat) + config.adam_eps));
    res.phi_legality = phi;
  }
  if (!std::isfinite(s.w)) {
    res.flagged = true;
    return res;
  }
  for (std::size_t i = 0; i < x.size(); ++i) res.delta[i] = x.coords[i] - x0.coords[i];
  res.phi_hpwl = hpwl(x, nets);
  state = s;
  return res;
}

std::vector<Vec2> guided_score(const std::vector<Vec2>& eps_hat, const std::vector<Vec2>& delta, std::size_t t,
                               const NoiseSchedule& schedule, double w_g) {
  if (eps_hat.size() != delta.size()) throw std::invalid_argument("guided_score: length mismatch");
  if (t == 0 || t > schedule.T) throw std::out_of_range("guided_score: timestep out of range");
  const double k = w_g * std::sqrt(schedule.alphabar[t]) / std::sqrt(1.0 - schedule.alphabar[t]);
  std::vector<Vec2> out(eps_hat.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eps_hat[i] - k * delta[i];
  return out;
}

}  // namespace diffplace
