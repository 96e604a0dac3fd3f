#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "diffplace/netlist.hpp"

namespace diffplace {

inline constexpr double kCosineOffset = 0.008;
inline constexpr double kMaxBeta = 0.999;
inline constexpr double kX0Clip = 1.5;

// All arrays are indexed by t = 0..T; entries at t = 0 are the identity
// step (alpha = alphabar = 1, no noise).
struct NoiseSchedule {
  std::size_t T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alphabar;
  std::vector<double> beta_tilde;  // posterior variance
  // x_{t-1} = coef_x[t] * x_t + coef_eps[t] * eps + sigma[t] * z
  std::vector<double> coef_x;
  std::vector<double> coef_eps;
  std::vector<double> sigma;
};

double cosine_alphabar(double t, std::size_t T, double offset = kCosineOffset);
NoiseSchedule cosine_schedule(std::size_t T, double offset = kCosineOffset);

std::vector<Vec2> q_sample(const std::vector<Vec2>& x0, std::size_t t, const std::vector<Vec2>& eps,
                           const NoiseSchedule& s);

// Pass std::nullopt to disable clipping.
std::vector<Vec2> predict_x0(const std::vector<Vec2>& x_t, std::size_t t, const std::vector<Vec2>& eps_hat,
                             const NoiseSchedule& s, std::optional<double> clip = kX0Clip);

// The noise prediction implied by x_t and an x0 estimate.
std::vector<Vec2> eps_from_x0(const std::vector<Vec2>& x_t, std::size_t t, const std::vector<Vec2>& x0,
                              const NoiseSchedule& s);

}  // namespace diffplace
