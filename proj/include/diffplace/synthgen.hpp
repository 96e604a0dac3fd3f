#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffplace/netlist.hpp"
#include "diffplace/rng.hpp"

namespace diffplace {

enum class EdgeDistKind { kExponential, kSigmoid, kLinear };

std::string_view to_string(EdgeDistKind kind);
EdgeDistKind edge_dist_from_string(std::string_view name);

struct UniformRange {
  double low = 0.0;
  double high = 0.0;
};

// Exponential with the given scale, clipped to [min, max]. The drawn value is
// the square root of the object area.
struct SizeDistribution {
  double scale = 0.08;
  double min = 0.02;
  double max = 1.0;
};

struct SynthParams {
  std::string version = "v0";
  UniformRange stop_density{0.75, 0.9};
  UniformRange aspect_ratio{0.25, 1.0};
  SizeDistribution size{0.08, 0.02, 1.0};

  double pin_powerlaw_exponent = 2.0;
  int pin_min = 1;
  int pin_max = 96;

  EdgeDistKind edge_dist = EdgeDistKind::kExponential;
  // Drawn log-uniformly per circuit; low == high means a fixed scale.
  UniformRange scale_s{0.2, 0.2};
  // gamma(s) = gamma_coeff * s^gamma_exponent; exponent 0 gives a constant.
  double gamma_coeff = 0.21;
  double gamma_exponent = 0.0;
  double p_max = 0.9;

  int placement_retry_limit = 100;
  int max_object_attempts = 10000;
  // Halvings of a rejected object's size before it is discarded.
  int max_shrinks = 0;

  // Optional object-count window; circuits outside it are regenerated from
  // a derived seed. 0 disables the bound.
  int min_objects = 0;
  int max_objects = 0;

  double gamma_for(double s) const;
  // Throws std::invalid_argument naming the offending field.
  void check() const;
};

// Named presets: "v0", "v1", "v2", "toy".
SynthParams synth_preset(std::string_view name);

nlohmann::json to_json(const SynthParams& p);
// Missing keys fall back to the preset named by "base" (default "v0").
SynthParams synth_params_from_json(const nlohmann::json& j);
SynthParams load_synth_params(const std::string& path);

struct EdgeProbability {
  EdgeDistKind kind = EdgeDistKind::kExponential;
  double s = 0.2;
  double gamma = 0.21;
  double p_max = 0.9;
};

double edge_probability(double l, const EdgeProbability& p);

struct ObjectSample {
  std::vector<ObjectGeom> objects;
  Placement placement;
  double target_density = 0.0;
  bool incomplete = false;  // density not reached before the attempt cap
};

ObjectSample sample_objects(const SynthParams& params, Rng& rng);

// Discrete power law P(k) ~ k^-exponent on [kmin, kmax].
int sample_pin_count(double exponent, int kmin, int kmax, Rng& rng);

std::vector<Pin> sample_pins(const std::vector<ObjectGeom>& objects, const SynthParams& params, Rng& rng);

std::vector<Edge> sample_edges(const std::vector<Pin>& pins, const Placement& placement,
                               const EdgeProbability& prob, Rng& rng);

struct CircuitMeta {
  double scale_s = 0.0;
  double gamma = 0.0;
  double target_density = 0.0;
  double achieved_density = 0.0;
  std::size_t num_objects = 0;
  std::size_t num_pins = 0;
  std::size_t num_edges = 0;
  std::uint64_t seed = 0;
  std::string version;
  bool incomplete = false;
  // Original units per normalized unit (1 for synthetic circuits).
  double unit_scale = 1.0;
};

struct Circuit {
  Netlist netlist;
  Placement placement;
  std::vector<Pin> pins;
  CircuitMeta meta;
};

Circuit generate_circuit(const SynthParams& params, std::uint64_t seed);

struct DatasetStats {
  std::size_t count = 0;
  std::size_t incomplete = 0;
  std::vector<std::size_t> object_counts;
  std::vector<std::size_t> edge_counts;
  // Edge-length histogram over [0, 4] (L1 on the canvas).
  std::vector<std::size_t> edge_length_hist;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

// Circuit i uses seed ^ i, so output does not depend on worker scheduling.
// Records reach the sink in index order from a single writer.
DatasetStats generate_dataset(const SynthParams& params, std::size_t count, std::uint64_t seed,
                              unsigned workers, const std::function<void(std::size_t, const Circuit&)>& sink);

}  // namespace diffplace
