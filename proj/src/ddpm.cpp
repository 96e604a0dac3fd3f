#include "diffplace/ddpm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace diffplace {

namespace {

struct PreparedBatch {
  GraphBatch graph;
  ag::Tensor coords;
  ag::Index movable;
  ag::Tensor target;
  std::vector<double> t;
};

PreparedBatch prepare(const NoiseSchedule& schedule, const std::vector<TrainingExample>& batch, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("training batch is empty");
  std::vector<const Netlist*> nls;
  for (const auto& ex : batch) {
    if (ex.placement->size() != ex.netlist->size()) {
      throw std::invalid_argument("training example " + std::to_string(ex.id) + ": placement length mismatch");
    }
    nls.push_back(ex.netlist);
  }
  PreparedBatch p;
  p.graph = make_batch(nls);
  p.coords = ag::Tensor::zeros(p.graph.num_nodes, 2);
  std::uniform_int_distribution<std::size_t> tdist(1, schedule.T);
  std::normal_distribution<double> nd;
  std::vector<double> eps;
  for (std::size_t c = 0; c < batch.size(); ++c) {
    const std::size_t t = tdist(rng);
    p.t.push_back(static_cast<double>(t));
    const double a = std::sqrt(schedule.alphabar[t]), b = std::sqrt(1.0 - schedule.alphabar[t]);
    const auto& x0 = batch[c].placement->coords;
    const std::size_t base = p.graph.circuit_begin[c];
    for (std::size_t i = 0; i < x0.size(); ++i) {
      if (batch[c].netlist->is_fixed(i)) {
        p.coords.at(base + i, 0) = x0[i].x;
        p.coords.at(base + i, 1) = x0[i].y;
        continue;
      }
      const double ex = nd(rng), ey = nd(rng);
      p.coords.at(base + i, 0) = a * x0[i].x + b * ex;
      p.coords.at(base + i, 1) = a * x0[i].y + b * ey;
      p.movable.push_back(base + i);
      eps.push_back(ex);
      eps.push_back(ey);
    }
  }
  if (p.movable.empty()) throw std::invalid_argument("training batch has no movable objects");
  p.target = ag::Tensor::from(p.movable.size(), 2, std::move(eps));
  return p;
}

ag::Tensor batch_loss(ag::Tape& tape, const Denoiser& model, const PreparedBatch& p) {
  const ag::Tensor out = model.forward(tape, p.coords, p.t, p.graph);
  // mse averages over both coordinates; scale to a per-object squared norm
  return tape.scale(tape.mse(tape.gather_rows(out, p.movable), p.target), 2.0);
}

std::string ids_of(const std::vector<TrainingExample>& batch) {
  std::ostringstream os;
  for (std::size_t k = 0; k < batch.size(); ++k) os << (k ? "," : "") << batch[k].id;
  return os.str();
}

}  // namespace

double training_step(Denoiser& model, ag::AdamState& opt, const NoiseSchedule& schedule,
                     const std::vector<TrainingExample>& batch, Rng& rng) {
  PreparedBatch p = prepare(schedule, batch, rng);
  for (auto& param : model.parameters()) param.zero_grad();
  ag::Tape tape;
  const ag::Tensor loss = batch_loss(tape, model, p);
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw NonFiniteError("non-finite training loss at step " + std::to_string(opt.step + 1) + " (circuits " +
                         ids_of(batch) + ")");
  }
  tape.backward(loss);
  ag::adam_step(model.parameters(), opt);
  return value;
}

double evaluate_loss(const Denoiser& model, const NoiseSchedule& schedule, const std::vector<TrainingExample>& batch,
                     Rng& rng) {
  PreparedBatch p = prepare(schedule, batch, rng);
  ag::Tape tape(false);
  return batch_loss(tape, model, p).item();
}

double cosine_lr(const TrainConfig& config, std::size_t step) {
  if (config.steps <= config.start_step) return config.lr;
  const double span = static_cast<double>(config.steps - config.start_step);
  const double u = std::clamp((static_cast<double>(step) - static_cast<double>(config.start_step)) / span, 0.0, 1.0);
  return config.lr_final + 0.5 * (config.lr - config.lr_final) * (1.0 + std::cos(std::numbers::pi * u));
}

void train(Denoiser& model, ag::AdamState& opt, const NoiseSchedule& schedule,
           const std::vector<TrainingExample>& data, const TrainConfig& config,
           const std::function<void(std::size_t, double)>& on_step) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (config.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<TrainingExample> batch(config.batch_size);
  while (static_cast<std::size_t>(opt.step) < config.steps) {
    // Each step has its own stream so a resumed run continues identically.
    Rng rng = make_rng(derive_seed(config.seed, "train", static_cast<std::uint64_t>(opt.step)));
    for (auto& ex : batch) ex = data[pick(rng)];
    opt.lr = cosine_lr(config, static_cast<std::size_t>(opt.step));
    const double loss = training_step(model, opt, schedule, batch, rng);
    if (on_step) on_step(static_cast<std::size_t>(opt.step), loss);
  }
}

std::vector<SampleResult> sample_batch(const EpsPredictor& predict, const NoiseSchedule& schedule,
                                       const std::vector<const Netlist*>& netlists,
                                       const std::vector<const Placement*>& fixed_coords,
                                       const SampleOptions& options) {
  if (!fixed_coords.empty() && fixed_coords.size() != netlists.size()) {
    throw std::invalid_argument("sample: fixed_coords must be empty or one per circuit");
  }
  if (options.guidance) options.guidance->check();
  const std::size_t C = netlists.size(), T = schedule.T;
  std::vector<std::size_t> begin{0};
  for (const Netlist* nl : netlists) begin.push_back(begin.back() + nl->size());
  const std::size_t n = begin.back();

  std::vector<Rng> rngs;
  std::vector<WireNets> nets;
  std::vector<SampleResult> results(C);
  std::vector<bool> fixed(n, false);
  std::vector<Vec2> x(n);
  std::normal_distribution<double> nd;
  for (std::size_t c = 0; c < C; ++c) {
    rngs.push_back(make_rng(derive_seed(options.seed, "sample", c)));
    if (options.guidance) {
      nets.push_back(wire_nets(*netlists[c]));
      results[c].lagrange.w = options.guidance->w_init;
    }
    const Placement* fc = fixed_coords.empty() ? nullptr : fixed_coords[c];
    for (std::size_t i = 0; i < netlists[c]->size(); ++i) {
      const std::size_t g = begin[c] + i;
      if (netlists[c]->is_fixed(i)) {
        if (!fc || fc->size() != netlists[c]->size()) {
          throw std::invalid_argument("sample: circuit " + std::to_string(c) + " has fixed objects but no coordinates");
        }
        fixed[g] = true;
        x[g] = fc->coords[i];
      } else {
        const double a = nd(rngs[c]);
        const double b = nd(rngs[c]);
        x[g] = {a, b};
      }
    }
  }
  auto slice = [&](const std::vector<Vec2>& v, std::size_t c) {
    return Placement{std::vector<Vec2>(v.begin() + static_cast<long>(begin[c]), v.begin() + static_cast<long>(begin[c + 1]))};
  };
  const bool record = options.trajectory_interval > 0;
  if (record) {
    for (std::size_t c = 0; c < C; ++c) results[c].trajectory.push_back(slice(x, c));
  }

  for (std::size_t t = T; t >= 1; --t) {
    std::vector<Vec2> eps = predict(x, t);
    if (eps.size() != n) throw std::runtime_error("sample: predictor returned the wrong number of rows");
    std::vector<Vec2> x0 = predict_x0(x, t, eps, schedule, options.x0_clip);
    for (std::size_t g = 0; g < n; ++g) {
      if (fixed[g]) x0[g] = x[g];
    }
    if (options.x0_clip) eps = eps_from_x0(x, t, x0, schedule);
    if (options.guidance) {
      std::vector<Vec2> delta(n);
      for (std::size_t c = 0; c < C; ++c) {
        Placement xc = slice(x0, c);
        GuidanceResult g = backward_guidance(xc, *netlists[c], nets[c], *options.guidance, results[c].lagrange);
        if (g.flagged) ++results[c].guidance_flags;
        std::copy(g.delta.begin(), g.delta.end(), delta.begin() + static_cast<long>(begin[c]));
      }
      eps = guided_score(eps, delta, t, schedule, options.guidance->w_g);
      for (std::size_t i = 0; i < n; ++i) x0[i] = x0[i] + options.guidance->w_g * delta[i];
    }
    if (record && (T - t) % options.trajectory_interval == 0) {
      for (std::size_t c = 0; c < C; ++c) results[c].trajectory.push_back(slice(x0, c));
    }
    const double sigma = options.deterministic ? 0.0 : schedule.sigma[t];
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t g = begin[c]; g < begin[c + 1]; ++g) {
        if (fixed[g]) continue;
        Vec2 z{};
        if (t > 1) {
          const double a = nd(rngs[c]);
          const double b = nd(rngs[c]);
          z = {a, b};
        }
        x[g] = schedule.coef_x[t] * x[g] + schedule.coef_eps[t] * eps[g] + sigma * z;
        if (!std::isfinite(x[g].x) || !std::isfinite(x[g].y)) {
          throw NonFiniteError("sample: non-finite state at step " + std::to_string(t) + " in circuit " +
                               std::to_string(c));
        }
      }
    }
  }
  for (std::size_t g = 0; g < n; ++g) {
    if (!fixed[g]) x[g] = {std::clamp(x[g].x, -kCanvasHalf, kCanvasHalf), std::clamp(x[g].y, -kCanvasHalf, kCanvasHalf)};
  }
  for (std::size_t c = 0; c < C; ++c) {
    results[c].placement = slice(x, c);
    if (record) results[c].trajectory.push_back(results[c].placement);
  }
  return results;
}

std::vector<SampleResult> sample_batch(const Denoiser& model, const NoiseSchedule& schedule,
                                       const std::vector<const Netlist*>& netlists,
                                       const std::vector<const Placement*>& fixed_coords,
                                       const SampleOptions& options) {
  if (model.config().num_timesteps != schedule.T) {
    throw ConfigError("sample: model was configured for " + std::to_string(model.config().num_timesteps) +
                      " steps but the schedule has " + std::to_string(schedule.T));
  }
  const GraphBatch batch = make_batch(netlists);
  EpsPredictor predict = [&](const std::vector<Vec2>& x, std::size_t t) {
    ag::Tensor coords = ag::Tensor::zeros(x.size(), 2);
    for (std::size_t i = 0; i < x.size(); ++i) {
      coords.at(i, 0) = x[i].x;
      coords.at(i, 1) = x[i].y;
    }
    ag::Tape tape(false);
    const ag::Tensor out =
        model.forward(tape, coords, std::vector<double>(batch.num_circuits(), static_cast<double>(t)), batch);
    std::vector<Vec2> eps(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) eps[i] = {out.at(i, 0), out.at(i, 1)};
    return eps;
  };
  return sample_batch(predict, schedule, netlists, fixed_coords, options);
}

SampleResult sample(const Denoiser& model, const NoiseSchedule& schedule, const Netlist& netlist,
                    const Placement* fixed_coords, const SampleOptions& options) {
  std::vector<const Placement*> fc;
  if (fixed_coords) fc.push_back(fixed_coords);
  return sample_batch(model, schedule, {&netlist}, fc, options).front();
}

}  // namespace diffplace
