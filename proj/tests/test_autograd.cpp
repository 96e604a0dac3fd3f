#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "diffplace/autograd.hpp"
#include "support.hpp"

using namespace diffplace;
using ag::Tape;
using ag::Tensor;

namespace {

Tensor randn(Rng& rng, std::size_t r, std::size_t c, bool grad = true, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(r * c);
  for (auto& x : v) x = nd(rng);
  return Tensor::from(r, c, std::move(v), grad);
}

using Fn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// loss = sum(f(inputs) * R) for a fixed random R; compares every input
// gradient entry against a central difference. Returns the worst rel err.
double gradcheck(const Fn& f, std::vector<Tensor> inputs, double h = 1e-6, std::uint64_t seed = 1) {
  Rng rng = make_rng(seed);
  Tensor weights;
  auto loss_of = [&](Tape& tape) {
    const Tensor out = f(tape, inputs);
    if (!weights.defined()) weights = randn(rng, out.rows(), out.cols(), false);
    return tape.sum(tape.mul(out, weights));
  };
  for (auto& t : inputs) t.zero_grad();
  Tape tape;
  tape.backward(loss_of(tape));
  double worst = 0.0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double v0 = t.values()[k];
      Tape off(false);
      t.values()[k] = v0 + h;
      const double fp = loss_of(off).item();
      t.values()[k] = v0 - h;
      const double fm = loss_of(off).item();
      t.values()[k] = v0;
      const double num = (fp - fm) / (2 * h);
      worst = std::max(worst, testing::rel_err(num, analytic[k], 1e-6));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("finite differences for every primitive") {
  Rng rng = make_rng(7);
  const ag::Index seg{0, 2, 1, 2, 0, 2};
  const ag::Index gather{3, 0, 0, 5, 2};
  struct Case {
    const char* name;
    Fn f;
    std::vector<Tensor> in;
  };
  std::vector<Case> cases{
      {"matmul", [](Tape& t, const auto& x) { return t.matmul(x[0], x[1]); }, {randn(rng, 3, 4), randn(rng, 4, 5)}},
      {"matmul_nt", [](Tape& t, const auto& x) { return t.matmul_nt(x[0], x[1]); }, {randn(rng, 3, 4), randn(rng, 5, 4)}},
      {"add", [](Tape& t, const auto& x) { return t.add(x[0], x[1]); }, {randn(rng, 3, 4), randn(rng, 3, 4)}},
      {"sub", [](Tape& t, const auto& x) { return t.sub(x[0], x[1]); }, {randn(rng, 3, 4), randn(rng, 3, 4)}},
      {"mul", [](Tape& t, const auto& x) { return t.mul(x[0], x[1]); }, {randn(rng, 3, 4), randn(rng, 3, 4)}},
      {"add_row", [](Tape& t, const auto& x) { return t.add_row(x[0], x[1]); }, {randn(rng, 3, 4), randn(rng, 1, 4)}},
      {"mul_row", [](Tape& t, const auto& x) { return t.mul_row(x[0], x[1]); }, {randn(rng, 3, 4), randn(rng, 1, 4)}},
      {"scale", [](Tape& t, const auto& x) { return t.scale(x[0], -1.7); }, {randn(rng, 3, 4)}},
      {"concat_cols", [](Tape& t, const auto& x) { return t.concat_cols({x[0], x[1]}); }, {randn(rng, 3, 2), randn(rng, 3, 3)}},
      {"concat_rows", [](Tape& t, const auto& x) { return t.concat_rows({x[0], x[1]}); }, {randn(rng, 2, 3), randn(rng, 1, 3)}},
      {"slice_cols", [](Tape& t, const auto& x) { return t.slice_cols(x[0], 1, 2); }, {randn(rng, 3, 4)}},
      {"slice_rows", [](Tape& t, const auto& x) { return t.slice_rows(x[0], 1, 2); }, {randn(rng, 4, 3)}},
      {"gelu", [](Tape& t, const auto& x) { return t.gelu(x[0]); }, {randn(rng, 4, 5, true, 2.0)}},
      {"leaky_relu", [](Tape& t, const auto& x) { return t.leaky_relu(x[0], 0.2); }, {randn(rng, 4, 5)}},
      {"layer_norm", [](Tape& t, const auto& x) { return t.layer_norm(x[0], x[1], x[2]); },
       {randn(rng, 4, 6), randn(rng, 1, 6), randn(rng, 1, 6)}},
      {"softmax_rows", [](Tape& t, const auto& x) { return t.softmax_rows(x[0]); }, {randn(rng, 3, 5)}},
      {"gather_rows", [&](Tape& t, const auto& x) { return t.gather_rows(x[0], gather); }, {randn(rng, 6, 3)}},
      {"segment_sum", [&](Tape& t, const auto& x) { return t.segment_sum(x[0], seg, 4); }, {randn(rng, 6, 3)}},
      {"segment_max", [&](Tape& t, const auto& x) { return t.segment_max(x[0], seg, 4); }, {randn(rng, 6, 3)}},
      {"segment_softmax", [&](Tape& t, const auto& x) { return t.segment_softmax(x[0], seg, 4); }, {randn(rng, 6, 3)}},
      {"group_sum_cols", [](Tape& t, const auto& x) { return t.group_sum_cols(x[0], 3); }, {randn(rng, 4, 6)}},
      {"mul_groups", [](Tape& t, const auto& x) { return t.mul_groups(x[0], x[1]); }, {randn(rng, 4, 2), randn(rng, 4, 6)}},
      {"sum", [](Tape& t, const auto& x) { return t.sum(x[0]); }, {randn(rng, 3, 4)}},
      {"mean", [](Tape& t, const auto& x) { return t.mean(x[0]); }, {randn(rng, 3, 4)}},
      {"mse", [](Tape& t, const auto& x) { return t.mse(x[0], x[1]); }, {randn(rng, 3, 4), randn(rng, 3, 4)}},
  };
  for (auto& c : cases) {
    CAPTURE(c.name);
    CHECK(gradcheck(c.f, c.in) <= 1e-6);
  }
}

TEST_CASE("composite MLP gradients match finite differences") {
  Rng rng = make_rng(8);
  Tensor x = randn(rng, 5, 4, false), w1 = randn(rng, 4, 8), b1 = randn(rng, 1, 8), w2 = randn(rng, 8, 2),
         g = randn(rng, 1, 8), bb = randn(rng, 1, 8), target = randn(rng, 5, 2, false);
  const std::vector<Tensor> params{w1, b1, w2, g, bb};
  auto loss = [&](Tape& t) {
    Tensor h = t.gelu(t.add_row(t.matmul(x, w1), b1));
    h = t.layer_norm(h, g, bb);
    return t.mse(t.matmul(h, w2), target);
  };
  Tape tape;
  tape.backward(loss(tape));
  // 100 sampled parameter entries
  std::uniform_int_distribution<std::size_t> pick_p(0, params.size() - 1);
  const double h = 1e-5;
  for (int s = 0; s < 100; ++s) {
    Tensor p = params[pick_p(rng)];
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
    const double v0 = p.values()[k];
    Tape off(false);
    p.values()[k] = v0 + h;
    const double fp = loss(off).item();
    p.values()[k] = v0 - h;
    const double fm = loss(off).item();
    p.values()[k] = v0;
    CHECK(testing::rel_err((fp - fm) / (2 * h), p.grad()[k], 1e-6) <= 1e-4);
  }
}

TEST_CASE("basic semantics") {
  Tape t(false);
  Tensor a = Tensor::from(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor eye = Tensor::from(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor ai = t.matmul(a, eye);
  CHECK(std::equal(ai.values().begin(), ai.values().end(), a.values().begin()));

  const Tensor sm = t.softmax_rows(Tensor::from(1, 4, {0.3, 0.3, 0.3, 0.3}));
  for (double v : sm.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  // segment_sum against a loop; segment 3 is empty.
  Rng rng = make_rng(9);
  Tensor x = randn(rng, 50, 3, false);
  ag::Index seg(50);
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  for (auto& s : seg) s = pick(rng) == 3 ? 4 : pick(rng) % 3;
  const Tensor ss = t.segment_sum(x, seg, 5);
  std::vector<double> want(15, 0.0);
  for (std::size_t r = 0; r < 50; ++r) {
    for (std::size_t c = 0; c < 3; ++c) want[seg[r] * 3 + c] += x.at(r, c);
  }
  for (std::size_t k = 0; k < 15; ++k) CHECK(ss.values()[k] == doctest::Approx(want[k]).epsilon(1e-14));
  const Tensor mx = t.segment_max(x, seg, 5);
  CHECK(mx.at(3, 0) == 0.0);
  CHECK(t.num_records() == 0);
}

TEST_CASE("shape errors name the primitive") {
  Tape t;
  Tensor a = Tensor::zeros(2, 3, true), b = Tensor::zeros(2, 2, true);
  CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("matmul"), ag::ShapeError);
  CHECK_THROWS_WITH_AS(t.add(a, b), doctest::Contains("add"), ag::ShapeError);
  CHECK_THROWS_WITH_AS(t.concat_cols({a, Tensor::zeros(3, 1)}), doctest::Contains("concat_cols"), ag::ShapeError);
  CHECK_THROWS_WITH_AS(t.gather_rows(a, {5}), doctest::Contains("gather_rows"), ag::ShapeError);
  CHECK_THROWS_WITH_AS(t.group_sum_cols(a, 2), doctest::Contains("group_sum_cols"), ag::ShapeError);
}

TEST_CASE("backward: sum of squares, accumulation and tape rules") {
  Tensor w = Tensor::from(1, 3, {1.0, -2.0, 0.5}, true);
  {
    Tape t;
    t.backward(t.sum(t.mul(w, w)));
    CHECK(w.grad()[0] == 2.0);
    CHECK(w.grad()[1] == -4.0);
    CHECK(w.grad()[2] == 1.0);
  }
  {
    Tape t;
    const Tensor loss = t.sum(w);
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), ag::TapeError);  // consumed
  }
  {
    // gradients accumulate across uses and across backward calls until zeroed
    w.zero_grad();
    Tape t;
    t.backward(t.sum(t.add(w, w)));
    CHECK(w.grad()[0] == 2.0);
    Tape t2;
    t2.backward(t2.sum(w));
    CHECK(w.grad()[0] == 3.0);
  }
  Tape t;
  CHECK_THROWS_AS(t.backward(t.add(w, w)), ag::TapeError);  // not a scalar
  Tape other;
  const Tensor foreign = other.sum(w);
  Tape t3;
  CHECK_THROWS_AS(t3.backward(foreign), ag::TapeError);  // not recorded here
  Tape off(false);
  CHECK_FALSE(off.sum(w).requires_grad());
}

TEST_CASE("bit-identical gradients for identical inputs") {
  auto run = [] {
    Rng rng = make_rng(10);
    Tensor a = randn(rng, 6, 5), b = randn(rng, 5, 4);
    Tape t;
    t.backward(t.sum(t.gelu(t.matmul(a, b))));
    std::vector<double> g(a.grad().begin(), a.grad().end());
    g.insert(g.end(), b.grad().begin(), b.grad().end());
    return g;
  };
  CHECK(run() == run());
}

TEST_CASE("adam: zero gradient, first step size, convex quadratic") {
  std::vector<Tensor> p{Tensor::from(1, 2, {1.0, -1.0}, true)};
  p[0].zero_grad();
  ag::AdamState st;
  st.lr = 0.01;
  ag::adam_step(p, st);
  CHECK(p[0].values()[0] == 1.0);
  CHECK(p[0].values()[1] == -1.0);
  CHECK(st.step == 1);

  p[0].grad()[0] = 3.0;
  p[0].grad()[1] = -0.2;
  ag::AdamState fresh;
  fresh.lr = 0.01;
  ag::adam_step(p, fresh);
  // bias-corrected first step moves each coordinate by ~lr against the gradient
  CHECK(p[0].values()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p[0].values()[1] == doctest::Approx(-1.0 + 0.01).epsilon(1e-6));

  // f(x) = sum c_i (x_i - 1)^2
  Tensor x = Tensor::from(1, 3, {3.0, -1.0, 2.0}, true);
  const std::vector<double> c{1.0, 0.5, 2.0};
  std::vector<Tensor> params{x};
  ag::AdamState opt;
  opt.lr = 0.01;
  double prev = 1e300;
  int increases = 0;
  for (int step = 0; step < 500; ++step) {
    x.zero_grad();
    double f = 0.0;
    for (int i = 0; i < 3; ++i) {
      f += c[i] * (x.values()[i] - 1) * (x.values()[i] - 1);
      x.grad()[i] = 2 * c[i] * (x.values()[i] - 1);
    }
    if (step > 10 && f > prev) ++increases;
    prev = f;
    ag::adam_step(params, opt);
  }
  CHECK(prev < 1e-2);
  CHECK(increases == 0);
}
