#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffplace/rng.hpp"
#include "diffplace/schedule.hpp"
#include "support.hpp"

using namespace diffplace;

namespace {

std::vector<Vec2> gaussian(Rng& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<Vec2> v(n);
  for (auto& p : v) p = {nd(rng), nd(rng)};
  return v;
}

}  // namespace

TEST_CASE("alphabar matches a 50-digit evaluation") {
  // tests/oracles/cosine_schedule.py
  const auto s = cosine_schedule(1000);
  const std::pair<std::size_t, double> frozen[] = {
      {1, 0.9999587157751782222},     {250, 0.84701216132690473446}, {500, 0.49384359044063771332},
      {750, 0.14427210238573571088},  {999, 2.428766907034468356e-6}, {1000, 2.428766907034468356e-9},
  };
  for (auto [t, want] : frozen) {
    CAPTURE(t);
    CHECK(testing::rel_err(s.alphabar[t], want, 0.0) <= 1e-12);
  }
  CHECK(cosine_alphabar(0, 1000) == 1.0);
}

TEST_CASE("schedule invariants") {
  for (std::size_t T : {10u, 100u, 1000u}) {
    CAPTURE(T);
    const auto s = cosine_schedule(T);
    REQUIRE(s.alphabar.size() == T + 1);
    CHECK(s.alphabar[0] == 1.0);
    CHECK(s.alphabar[T] < 1e-3);
    for (std::size_t t = 1; t <= T; ++t) {
      CHECK(s.alphabar[t] < s.alphabar[t - 1]);
      CHECK(s.alpha[t] >= 0.001);
      CHECK(s.beta[t] <= kMaxBeta);
      CHECK(s.sigma[t] >= 0.0);
      CHECK(s.alphabar[t] == doctest::Approx(s.alphabar[t - 1] * s.alpha[t]).epsilon(1e-14));
      CHECK(s.coef_x[t] == doctest::Approx(1 / std::sqrt(s.alpha[t])).epsilon(1e-14));
      CHECK(s.coef_eps[t] ==
            doctest::Approx(-(1 - s.alpha[t]) / (std::sqrt(s.alpha[t]) * std::sqrt(1 - s.alphabar[t]))).epsilon(1e-14));
    }
    CHECK(s.sigma[1] == 0.0);
  }
  CHECK(cosine_schedule(1000).alphabar[1] > 0.999);
  CHECK_THROWS(cosine_schedule(0));
}

TEST_CASE("ancestral step equals the posterior mean") {
  // x_{t-1} mean = c0 x0 + c1 x_t with x0 implied by eps
  const auto s = cosine_schedule(1000);
  Rng rng = make_rng(3);
  std::normal_distribution<double> nd;
  for (std::size_t t : {2u, 10u, 300u, 700u, 999u}) {
    const double xt = nd(rng), eps = nd(rng);
    const double x0 = (xt - std::sqrt(1 - s.alphabar[t]) * eps) / std::sqrt(s.alphabar[t]);
    const double c0 = std::sqrt(s.alphabar[t - 1]) * s.beta[t] / (1 - s.alphabar[t]);
    const double c1 = std::sqrt(s.alpha[t]) * (1 - s.alphabar[t - 1]) / (1 - s.alphabar[t]);
    CAPTURE(t);
    CHECK(testing::rel_err(s.coef_x[t] * xt + s.coef_eps[t] * eps, c0 * x0 + c1 * xt, 1e-9) <= 1e-9);
    CHECK(s.beta_tilde[t] == doctest::Approx((1 - s.alphabar[t - 1]) / (1 - s.alphabar[t]) * s.beta[t]).epsilon(1e-12));
    CHECK(s.sigma[t] == doctest::Approx(std::sqrt(s.beta_tilde[t])).epsilon(1e-14));
  }
}

TEST_CASE("q_sample and predict_x0 are inverses") {
  const auto s = cosine_schedule(1000);
  Rng rng = make_rng(4);
  double worst = 0.0;
  for (std::size_t t = 0; t <= 1000; t += 37) {
    const auto x0 = gaussian(rng, 20, 0.5);
    const auto eps = gaussian(rng, 20);
    const auto xt = q_sample(x0, t, eps, s);
    const auto back = predict_x0(xt, t, eps, s, std::nullopt);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      worst = std::max({worst, std::abs(back[i].x - x0[i].x), std::abs(back[i].y - x0[i].y)});
    }
  }
  // relative to sqrt(alphabar_T) ~ 5e-5 the reconstruction divides by a small number
  CHECK(worst <= 1e-10);

  // t = 0 is the identity; eps = 0 leaves x_t unchanged
  const auto x0 = gaussian(rng, 5, 0.5);
  const auto eps = gaussian(rng, 5);
  CHECK(q_sample(x0, 0, eps, s) == x0);
  CHECK(predict_x0(x0, 0, std::vector<Vec2>(5), s) == x0);

  const auto e2 = eps_from_x0(q_sample(x0, 500, eps, s), 500, x0, s);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(e2[i].x == doctest::Approx(eps[i].x).epsilon(1e-12));
    CHECK(e2[i].y == doctest::Approx(eps[i].y).epsilon(1e-12));
  }
  CHECK_THROWS(q_sample(x0, 1001, eps, s));
  CHECK_THROWS(q_sample(x0, 10, std::vector<Vec2>(4), s));
}

TEST_CASE("clipping only engages beyond the bound") {
  const auto s = cosine_schedule(1000);
  const std::size_t t = 900;
  // in-range target: no effect
  const std::vector<Vec2> x0{{1.4, -1.4}, {0.2, 0.0}};
  const std::vector<Vec2> eps{{0.3, -0.7}, {1.0, 2.0}};
  const auto xt = q_sample(x0, t, eps, s);
  const auto clipped = predict_x0(xt, t, eps, s);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(clipped[i].x == doctest::Approx(x0[i].x).epsilon(1e-9));
    CHECK(clipped[i].y == doctest::Approx(x0[i].y).epsilon(1e-9));
  }
  // adversarial eps drives the raw estimate far outside
  const std::vector<Vec2> bad{{-40.0, 40.0}, eps[1]};
  const auto raw = predict_x0(xt, t, bad, s, std::nullopt);
  const auto c = predict_x0(xt, t, bad, s);
  CHECK(std::abs(raw[0].x) > kX0Clip);
  CHECK(c[0].x == kX0Clip);
  CHECK(c[0].y == -kX0Clip);
  CHECK(c[1] == raw[1]);
}

TEST_CASE("Monte Carlo variance of q_sample") {
  const auto s = cosine_schedule(1000);
  Rng rng = make_rng(5);
  const std::size_t n = 200000;
  for (std::size_t t : {100u, 500u, 900u}) {
    const std::vector<Vec2> x0{{0.3, -0.6}};
    double sum = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto xt = q_sample(x0, t, gaussian(rng, 1), s);
      sum += xt[0].x;
      sq += xt[0].x * xt[0].x;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    const double want = 1 - s.alphabar[t];
    CAPTURE(t);
    // standard error of a Gaussian variance estimate is var * sqrt(2/n)
    CHECK(std::abs(var - want) <= 5 * want * std::sqrt(2.0 / n));
    CHECK(std::abs(mean - std::sqrt(s.alphabar[t]) * 0.3) <= 5 * std::sqrt(want / n));
  }
}
