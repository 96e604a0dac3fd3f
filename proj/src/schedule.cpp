#include "diffplace/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace diffplace {

double cosine_alphabar(double t, std::size_t T, double offset) {
  auto f = [&](double u) {
    const double c = std::cos((u / static_cast<double>(T) + offset) / (1.0 + offset) * std::numbers::pi / 2);
    return c * c;
  };
  return f(t) / f(0.0);
}

NoiseSchedule cosine_schedule(std::size_t T, double offset) {
  if (T == 0) throw std::invalid_argument("cosine_schedule: T must be at least 1");
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 1.0);
  s.alphabar.assign(T + 1, 1.0);
  s.beta_tilde.assign(T + 1, 0.0);
  s.coef_x.assign(T + 1, 1.0);
  s.coef_eps.assign(T + 1, 0.0);
  s.sigma.assign(T + 1, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    const double b = 1.0 - cosine_alphabar(static_cast<double>(t), T, offset) /
                               cosine_alphabar(static_cast<double>(t - 1), T, offset);
    s.beta[t] = std::clamp(b, 0.0, kMaxBeta);
    s.alpha[t] = 1.0 - s.beta[t];
    s.alphabar[t] = s.alphabar[t - 1] * s.alpha[t];
  }
  for (std::size_t t = 1; t <= T; ++t) {
    const double ab = s.alphabar[t];
    s.beta_tilde[t] = s.beta[t] * (1.0 - s.alphabar[t - 1]) / (1.0 - ab);
    s.coef_x[t] = 1.0 / std::sqrt(s.alpha[t]);
    s.coef_eps[t] = -(1.0 - s.alpha[t]) / (std::sqrt(s.alpha[t]) * std::sqrt(1.0 - ab));
    s.sigma[t] = std::sqrt(s.beta_tilde[t]);
  }
  return s;
}

namespace {

void check_args(const char* op, std::size_t t, const NoiseSchedule& s, std::size_t a, std::size_t b) {
  if (t > s.T) throw std::out_of_range(std::string(op) + ": timestep beyond schedule length");
  if (a != b) throw std::invalid_argument(std::string(op) + ": length mismatch");
}

}  // namespace

std::vector<Vec2> q_sample(const std::vector<Vec2>& x0, std::size_t t, const std::vector<Vec2>& eps,
                           const NoiseSchedule& s) {
  check_args("q_sample", t, s, x0.size(), eps.size());
  const double a = std::sqrt(s.alphabar[t]), b = std::sqrt(1.0 - s.alphabar[t]);
  std::vector<Vec2> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = {a * x0[i].x + b * eps[i].x, a * x0[i].y + b * eps[i].y};
  return out;
}

std::vector<Vec2> predict_x0(const std::vector<Vec2>& x_t, std::size_t t, const std::vector<Vec2>& eps_hat,
                             const NoiseSchedule& s, std::optional<double> clip) {
  check_args("predict_x0", t, s, x_t.size(), eps_hat.size());
  const double a = std::sqrt(s.alphabar[t]), b = std::sqrt(1.0 - s.alphabar[t]);
  std::vector<Vec2> out(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    Vec2 v{(x_t[i].x - b * eps_hat[i].x) / a, (x_t[i].y - b * eps_hat[i].y) / a};
    if (clip) v = {std::clamp(v.x, -*clip, *clip), std::clamp(v.y, -*clip, *clip)};
    out[i] = v;
  }
  return out;
}

std::vector<Vec2> eps_from_x0(const std::vector<Vec2>& x_t, std::size_t t, const std::vector<Vec2>& x0,
                              const NoiseSchedule& s) {
  check_args("eps_from_x0", t, s, x_t.size(), x0.size());
  if (t == 0) throw std::invalid_argument("eps_from_x0: undefined at t = 0");
  const double a = std::sqrt(s.alphabar[t]), b = std::sqrt(1.0 - s.alphabar[t]);
  std::vector<Vec2> out(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    out[i] = {(x_t[i].x - a * x0[i].x) / b, (x_t[i].y - a * x0[i].y) / b};
  }
  return out;
}

}  // namespace diffplace
