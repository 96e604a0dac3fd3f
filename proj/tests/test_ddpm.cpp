#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "diffplace/ddpm.hpp"
#include "diffplace/metrics.hpp"
#include "diffplace/synthgen.hpp"
#include "support.hpp"

using namespace diffplace;

namespace {

struct Data {
  std::vector<Circuit> circuits;
  std::vector<TrainingExample> examples;
};

Data toy_data(std::size_t n, std::uint64_t seed) {
  Data d;
  for (std::size_t i = 0; i < n; ++i) d.circuits.push_back(generate_circuit(synth_preset("toy"), seed + i));
  for (std::size_t i = 0; i < n; ++i) d.examples.push_back({&d.circuits[i].netlist, &d.circuits[i].placement, i});
  return d;
}

std::vector<std::vector<double>> snapshot(const Denoiser& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

}  // namespace

TEST_CASE("cosine learning rate") {
  TrainConfig c;
  c.steps = 100;
  c.lr = 1e-3;
  c.lr_final = 1e-4;
  CHECK(cosine_lr(c, 0) == doctest::Approx(1e-3));
  CHECK(cosine_lr(c, 50) == doctest::Approx(5.5e-4));
  CHECK(cosine_lr(c, 100) == doctest::Approx(1e-4));
  c.start_step = 60;
  CHECK(cosine_lr(c, 60) == doctest::Approx(1e-3));
  CHECK(cosine_lr(c, 80) == doctest::Approx(5.5e-4));
}

TEST_CASE("training is deterministic") {
  const auto data = toy_data(8, 1);
  const auto schedule = cosine_schedule(1000);
  auto run = [&] {
    Denoiser m(denoiser_preset("tiny"), 3);
    ag::AdamState opt;
    TrainConfig cfg;
    cfg.steps = 20;
    cfg.batch_size = 4;
    cfg.lr = 1e-3;
    std::vector<double> losses;
    train(m, opt, schedule, data.examples, cfg, [&](std::size_t, double l) { losses.push_back(l); });
    return std::make_pair(losses, snapshot(m));
  };
  const auto a = run(), b = run();
  CHECK(a.first.size() == 20);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("resumed training equals continuous training") {
  const auto data = toy_data(8, 2);
  const auto schedule = cosine_schedule(1000);
  TrainConfig cfg;
  cfg.steps = 30;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.lr_final = 1e-3;

  Denoiser full(denoiser_preset("tiny"), 4);
  ag::AdamState full_opt;
  train(full, full_opt, schedule, data.examples, cfg);

  Denoiser half(denoiser_preset("tiny"), 4);
  ag::AdamState half_opt;
  TrainConfig first = cfg;
  first.steps = 12;
  train(half, half_opt, schedule, data.examples, first);
  const std::string path = (std::filesystem::temp_directory_path() / "diffplace_resume.ckpt").string();
  save_checkpoint(path, half, {{}, half_opt});
  CheckpointExtras extras;
  Denoiser resumed = load_checkpoint(path, &extras);
  std::filesystem::remove(path);
  REQUIRE(extras.adam.has_value());
  train(resumed, *extras.adam, schedule, data.examples, cfg);
  CHECK(extras.adam->step == 30);
  CHECK(snapshot(resumed) == snapshot(full));
}

TEST_CASE("non-finite loss names the circuits") {
  auto data = toy_data(2, 3);
  data.circuits[1].placement.coords[0].x = std::nan("");
  Denoiser m(denoiser_preset("tiny"), 5);
  ag::AdamState opt;
  Rng rng = make_rng(1);
  const std::vector<TrainingExample> batch{data.examples[0], {&data.circuits[1].netlist, &data.circuits[1].placement, 41}};
  CHECK_THROWS_WITH_AS(training_step(m, opt, cosine_schedule(1000), batch, rng), doctest::Contains("41"), NonFiniteError);
}

TEST_CASE("fixed objects are excluded from the loss") {
  auto data = toy_data(1, 4);
  Circuit& c = data.circuits[0];
  c.netlist.fixed_mask.assign(c.netlist.size(), true);
  Denoiser m(denoiser_preset("tiny"), 6);
  ag::AdamState opt;
  Rng rng = make_rng(1);
  CHECK_THROWS_AS(training_step(m, opt, cosine_schedule(1000), data.examples, rng), std::invalid_argument);
  c.netlist.fixed_mask[1] = false;
  Rng r1 = make_rng(2);
  const double loss = evaluate_loss(m, cosine_schedule(1000), data.examples, r1);
  CHECK(std::isfinite(loss));
}

TEST_CASE("oracle denoiser concentrates on the target") {
  // the data distribution is a point mass at `target`; the exact noise is
  // (x_t - sqrt(ab) target) / sqrt(1 - ab)
  const auto s = cosine_schedule(1000);
  Netlist nl;
  nl.objects = {{0.1, 0.1}};
  const Vec2 target{0.35, -0.6};
  const EpsPredictor oracle = [&](const std::vector<Vec2>& x, std::size_t t) {
    const double a = std::sqrt(s.alphabar[t]), b = std::sqrt(1 - s.alphabar[t]);
    return std::vector<Vec2>{{(x[0].x - a * target.x) / b, (x[0].y - a * target.y) / b}};
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SampleOptions o;
    o.seed = seed;
    const auto r = sample_batch(oracle, s, {&nl}, {}, o);
    CHECK(r[0].placement.coords[0].x == doctest::Approx(target.x).epsilon(1e-6));
    CHECK(r[0].placement.coords[0].y == doctest::Approx(target.y).epsilon(1e-6));
  }
}

TEST_CASE("sampling: seeds, determinism, fixed objects, trajectory") {
  Denoiser m(denoiser_preset("tiny"), 7);
  Rng prng = make_rng(8);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& p : m.parameters()) {
    for (auto& v : p.values()) v = nd(prng);
  }
  const auto s = cosine_schedule(1000);
  auto c = generate_circuit(synth_preset("toy"), 9);
  c.netlist.fixed_mask.assign(c.netlist.size(), false);
  c.netlist.fixed_mask[2] = true;
  c.placement.coords[2] = {0.25, -0.5};

  SampleOptions o;
  o.seed = 11;
  o.trajectory_interval = 200;
  const auto a = sample(m, s, c.netlist, &c.placement, o);
  const auto b = sample(m, s, c.netlist, &c.placement, o);
  CHECK(a.placement == b.placement);
  CHECK(a.placement.coords[2] == c.placement.coords[2]);
  REQUIRE(a.trajectory.size() == 7);
  for (const auto& frame : a.trajectory) CHECK(frame.coords[2] == c.placement.coords[2]);
  CHECK(a.trajectory.back() == a.placement);
  for (const auto& p : a.placement.coords) {
    CHECK(std::abs(p.x) <= 1.0);
    CHECK(std::abs(p.y) <= 1.0);
  }
  o.seed = 12;
  CHECK_FALSE(sample(m, s, c.netlist, &c.placement, o).placement == a.placement);
  CHECK_THROWS_AS(sample(m, s, c.netlist, nullptr, o), std::invalid_argument);

  // batching does not change a circuit's sample
  const auto c2 = generate_circuit(synth_preset("toy"), 10);
  const Placement empty{std::vector<Vec2>(c2.netlist.size())};
  o.seed = 11;
  o.trajectory_interval = 0;
  const auto both = sample_batch(m, s, {&c.netlist, &c2.netlist}, {&c.placement, &empty}, o);
  for (std::size_t i = 0; i < a.placement.size(); ++i) {
    CHECK(both[0].placement.coords[i].x == doctest::Approx(a.placement.coords[i].x).epsilon(1e-9));
    CHECK(both[0].placement.coords[i].y == doctest::Approx(a.placement.coords[i].y).epsilon(1e-9));
  }
  CHECK(both[0].trajectory.empty());
}

TEST_CASE("sigma = 0 sampling depends only on x_T") {
  auto cfg = denoiser_preset("tiny");
  cfg.num_timesteps = 200;
  Denoiser m(cfg, 13);
  Rng prng = make_rng(14);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& p : m.parameters()) {
    for (auto& v : p.values()) v = nd(prng);
  }
  const auto s = cosine_schedule(200);
  const auto c = generate_circuit(synth_preset("toy"), 15);
  SampleOptions o;
  o.seed = 3;
  o.deterministic = true;
  o.trajectory_interval = 50;
  const auto a = sample(m, s, c.netlist, nullptr, o);
  const auto b = sample(m, s, c.netlist, nullptr, o);
  CHECK(a.placement == b.placement);

  // same x_T through a different seed's path would need the same x_T; check
  // instead that the update is a fixed function of x_T by replaying it
  const EpsPredictor pred = [&](const std::vector<Vec2>& x, std::size_t t) {
    std::vector<double> flat;
    for (const auto& p : x) {
      flat.push_back(p.x);
      flat.push_back(p.y);
    }
    ag::Tape tape(false);
    const auto out = m.forward(tape, ag::Tensor::from(x.size(), 2, flat), {static_cast<double>(t)}, make_batch({&c.netlist}));
    std::vector<Vec2> eps(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) eps[i] = {out.at(i, 0), out.at(i, 1)};
    return eps;
  };
  std::vector<Vec2> x = a.trajectory.front().coords;
  for (std::size_t t = s.T; t >= 1; --t) {
    auto x0 = predict_x0(x, t, pred(x, t), s);
    const auto eps = eps_from_x0(x, t, x0, s);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = {s.coef_x[t] * x[i].x + s.coef_eps[t] * eps[i].x, s.coef_x[t] * x[i].y + s.coef_eps[t] * eps[i].y};
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(a.placement.coords[i].x == doctest::Approx(std::clamp(x[i].x, -1.0, 1.0)).epsilon(1e-9));
    CHECK(a.placement.coords[i].y == doctest::Approx(std::clamp(x[i].y, -1.0, 1.0)).epsilon(1e-9));
  }
}

TEST_CASE("a single repeated circuit is learned") {
  const auto data = toy_data(1, 20);
  const auto schedule = cosine_schedule(1000);
  Denoiser m(denoiser_preset("toy"), 21);
  ag::AdamState opt;
  TrainConfig cfg;
  cfg.steps = 5000;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.lr_final = 1e-4;
  train(m, opt, schedule, data.examples, cfg);
  Rng rng = make_rng(22);
  const std::vector<TrainingExample> batch(64, data.examples[0]);
  const double loss = evaluate_loss(m, schedule, batch, rng);
  MESSAGE("loss after 5k steps " << loss);
  CHECK(loss < 0.5);
}
