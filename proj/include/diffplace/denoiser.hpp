#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffplace/autograd.hpp"
#include "diffplace/netlist.hpp"
#include "diffplace/rng.hpp"

namespace diffplace {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DenoiserConfig {
  std::size_t model_size = 128;
  std::size_t blocks = 2;
  std::size_t layers_per_block = 2;
  std::size_t attgnn_size = 32;  // per-head width of the self-attention sublayer
  std::size_t resgnn_size = 256;  // hidden width of the graph-attention layers
  std::size_t mlp_factor = 4;
  std::size_t mlp_layers = 2;
  std::size_t heads = 4;
  std::size_t t_enc_dim = 32;
  std::size_t xy_enc_dim = 32;
  std::size_t num_timesteps = 1000;

  // Ablations. Without attention each block gets a second graph sublayer in
  // its place.
  bool use_attention = true;
  bool use_mlp = true;
  bool use_encodings = true;

  void check() const;
  std::size_t input_dim() const;
};

// "small", "medium", "large", plus "toy" (width 32) and "tiny" (width 8).
DenoiserConfig denoiser_preset(std::string_view name);

nlohmann::json to_json(const DenoiserConfig& c);
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

// [n, dim + 2]: raw (x, y) followed by, per axis, dim/4 sin then dim/4 cos
// terms at frequencies pi * 2^k.
ag::Tensor sinusoidal_xy_encoding(const std::vector<Vec2>& coords, std::size_t dim);
// Standard transformer encoding: dim/2 sin then dim/2 cos terms.
std::vector<double> timestep_encoding(double t, std::size_t dim);

// Several circuits as one disjoint-union graph. Nodes of circuit c occupy
// rows [circuit_begin[c], circuit_begin[c+1]).
struct GraphBatch {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> circuit_begin;
  ag::Index circuit_of;
  std::vector<ObjectGeom> geoms;
  std::vector<bool> fixed;
  // Directed messages src -> dst: both directions of every edge plus a
  // self-loop per node.
  ag::Index src;
  ag::Index dst;
  ag::Tensor edge_attr;  // [messages, 4]: source pin offset, target pin offset

  std::size_t num_circuits() const { return circuit_begin.empty() ? 0 : circuit_begin.size() - 1; }
};

// Netlists without edges but with nets are expanded driver -> sink first.
GraphBatch make_batch(const std::vector<const Netlist*>& netlists);

class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const DenoiserConfig& config, std::uint64_t seed);

  const DenoiserConfig& config() const { return config_; }
  std::vector<ag::Tensor>& parameters() { return params_; }
  const std::vector<ag::Tensor>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  std::size_t num_parameters() const;

  // coords: [n, 2] node centers (fixed nodes at their true positions);
  // t: one timestep per circuit. Returns [n, 2] noise predictions.
  ag::Tensor forward(ag::Tape& tape, const ag::Tensor& coords, const std::vector<double>& t,
                     const GraphBatch& batch) const;

 private:
  struct Linear {
    ag::Tensor w, b;
  };
  struct Norm {
    ag::Tensor gain, bias;
  };
  struct GatLayer {
    ag::Tensor w_src, w_dst, w_edge, att, bias;
  };
  struct GnnSublayer {
    Norm norm;
    std::vector<GatLayer> layers;
    Linear out;
  };
  struct MlpSublayer {
    Norm norm;
    std::vector<Linear> layers;
  };
  struct AttnSublayer {
    Norm norm;
    Linear q, k, v, o;
  };
  struct Block {
    GnnSublayer gnn;
    std::optional<GnnSublayer> gnn2;  // stands in for attention in the ablation
    std::optional<MlpSublayer> mlp1, mlp2;
    std::optional<AttnSublayer> attn;
  };

  ag::Tensor add_param(const std::string& name, std::size_t rows, std::size_t cols, double stddev);
  ag::Tensor add_const(const std::string& name, std::size_t rows, std::size_t cols, double value);
  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, bool zero = false);
  Norm make_norm(const std::string& name, std::size_t dim);
  GnnSublayer make_gnn(const std::string& name);
  MlpSublayer make_mlp(const std::string& name);
  AttnSublayer make_attn(const std::string& name);

  ag::Tensor linear(ag::Tape& tape, const ag::Tensor& x, const Linear& l) const;
  ag::Tensor norm(ag::Tape& tape, const ag::Tensor& x, const Norm& n) const;
  ag::Tensor gat(ag::Tape& tape, const ag::Tensor& h, const GatLayer& l, const GraphBatch& batch) const;
  ag::Tensor gnn(ag::Tape& tape, const ag::Tensor& h, const GnnSublayer& s, const GraphBatch& batch) const;
  ag::Tensor mlp(ag::Tape& tape, const ag::Tensor& h, const MlpSublayer& s) const;
  ag::Tensor attention(ag::Tape& tape, const ag::Tensor& h, const AttnSublayer& s, const GraphBatch& batch) const;

  DenoiserConfig config_;
  std::vector<ag::Tensor> params_;
  std::vector<std::string> names_;
  Rng* init_rng_ = nullptr;

  Linear input_;
  Linear time1_, time2_;
  std::vector<Block> blocks_;
  Norm out_norm_;
  Linear head_;
};

struct CheckpointExtras {
  nlohmann::json metadata = nlohmann::json::object();
  std::optional<ag::AdamState> adam;
};

// "DPCKPT01", u64 little-endian header length, JSON header, then raw
// little-endian float64 blocks at the offsets listed in the header.
void save_checkpoint(const std::string& path, const Denoiser& model, const CheckpointExtras& extras = {});
Denoiser load_checkpoint(const std::string& path, CheckpointExtras* extras = nullptr);

}  // namespace diffplace
