#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "diffplace/autograd.hpp"
#include "diffplace/denoiser.hpp"
#include "diffplace/guidance.hpp"
#include "diffplace/rng.hpp"
#include "diffplace/schedule.hpp"

namespace diffplace {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingExample {
  const Netlist* netlist = nullptr;
  const Placement* placement = nullptr;
  std::size_t id = 0;  // reported in diagnostics
};

// One optimization step: a timestep per circuit, eps ~ N(0, I) on movable
// objects, loss = mean over movable objects of |eps_hat - eps|^2. Returns
// the loss before the update. Throws NonFiniteError naming the step and ids.
double training_step(Denoiser& model, ag::AdamState& opt, const NoiseSchedule& schedule,
                     const std::vector<TrainingExample>& batch, Rng& rng);

// Loss only, no update (tape disabled).
double evaluate_loss(const Denoiser& model, const NoiseSchedule& schedule, const std::vector<TrainingExample>& batch,
                     Rng& rng);

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 16;
  double lr = 3e-4;
  double lr_final = 0.0;  // cosine decay from lr to lr_final over [start_step, steps]
  std::uint64_t seed = 0;
  std::size_t start_step = 0;
};

double cosine_lr(const TrainConfig& config, std::size_t step);

// Runs from opt.step up to config.steps with uniformly drawn batches. The
// callback sees (completed step, loss) after every step.
void train(Denoiser& model, ag::AdamState& opt, const NoiseSchedule& schedule,
           const std::vector<TrainingExample>& data, const TrainConfig& config,
           const std::function<void(std::size_t, double)>& on_step = {});

// Predicts eps for a disjoint union of circuits at one shared timestep.
using EpsPredictor = std::function<std::vector<Vec2>(const std::vector<Vec2>& x_t, std::size_t t)>;

struct SampleOptions {
  std::uint64_t seed = 0;
  std::optional<GuidanceConfig> guidance;
  // Record x0 predictions every this many steps; 0 disables the trajectory.
  std::size_t trajectory_interval = 0;
  // sigma_t = 0 everywhere.
  bool deterministic = false;
  std::optional<double> x0_clip = kX0Clip;
};

struct SampleResult {
  Placement placement;
  // x_T, x0 predictions at t = T, T - k, ..., then the final placement.
  std::vector<Placement> trajectory;
  LagrangeState lagrange;
  std::size_t guidance_flags = 0;
};

// Fixed objects are held at `fixed_coords` (which may be null when nothing is
// fixed). Circuit c draws its noise from its own stream of `seed`.
std::vector<SampleResult> sample_batch(const EpsPredictor& predict, const NoiseSchedule& schedule,
                                       const std::vector<const Netlist*>& netlists,
                                       const std::vector<const Placement*>& fixed_coords,
                                       const SampleOptions& options);

std::vector<SampleResult> sample_batch(const Denoiser& model, const NoiseSchedule& schedule,
                                       const std::vector<const Netlist*>& netlists,
                                       const std::vector<const Placement*>& fixed_coords,
                                       const SampleOptions& options);

SampleResult sample(const Denoiser& model, const NoiseSchedule& schedule, const Netlist& netlist,
                    const Placement* fixed_coords, const SampleOptions& options);

}  // namespace diffplace
