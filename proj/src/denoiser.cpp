#include "diffplace/denoiser.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

namespace diffplace {

namespace {

constexpr char kMagic[8] = {'D', 'P', 'C', 'K', 'P', 'T', '0', '1'};
constexpr int kCheckpointVersion = 1;

}  // namespace

void DenoiserConfig::check() const {
  auto fail = [](const std::string& what) { throw ConfigError("DenoiserConfig: " + what); };
  if (model_size == 0 || blocks == 0 || layers_per_block == 0 || attgnn_size == 0 || resgnn_size == 0 ||
      mlp_factor == 0 || mlp_layers == 0 || heads == 0 || t_enc_dim == 0 || num_timesteps == 0) {
    fail("all sizes must be positive");
  }
  if (mlp_layers < 2) fail("mlp_layers must be at least 2");
  if (resgnn_size % heads != 0) fail("resgnn_size must be divisible by heads");
  if (t_enc_dim % 2 != 0) fail("t_enc_dim must be even");
  if (use_encodings && (xy_enc_dim == 0 || xy_enc_dim % 4 != 0)) fail("xy_enc_dim must be a positive multiple of 4");
}

std::size_t DenoiserConfig::input_dim() const { return (use_encodings ? xy_enc_dim + 2 : 2) + 2; }

DenoiserConfig denoiser_preset(std::string_view name) {
  DenoiserConfig c;
  if (name == "small") {
    c.model_size = 64;
    c.resgnn_size = 64;
  } else if (name == "medium") {
    // defaults
  } else if (name == "large") {
    c.model_size = 256;
    c.blocks = 3;
    c.attgnn_size = 256;
    c.resgnn_size = 256;
  } else if (name == "toy") {
    c.model_size = 32;
    c.resgnn_size = 32;
    c.attgnn_size = 8;
  } else if (name == "tiny") {
    c.model_size = 8;
    c.blocks = 1;
    c.resgnn_size = 8;
    c.attgnn_size = 2;
    c.mlp_factor = 2;
    c.t_enc_dim = 8;
    c.xy_enc_dim = 8;
  } else {
    throw ConfigError("unknown model preset '" + std::string(name) + "'");
  }
  return c;
}

nlohmann::json to_json(const DenoiserConfig& c) {
  return {{"model_size", c.model_size},       {"blocks", c.blocks},
          {"layers_per_block", c.layers_per_block}, {"attgnn_size", c.attgnn_size},
          {"resgnn_size", c.resgnn_size},     {"mlp_factor", c.mlp_factor},
          {"mlp_layers", c.mlp_layers},       {"heads", c.heads},
          {"t_enc_dim", c.t_enc_dim},         {"xy_enc_dim", c.xy_enc_dim},
          {"num_timesteps", c.num_timesteps}, {"use_attention", c.use_attention},
          {"use_mlp", c.use_mlp},             {"use_encodings", c.use_encodings}};
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
  DenoiserConfig c = denoiser_preset(j.value("base", std::string("medium")));
  for (const auto& [key, v] : j.items()) {
    if (key == "base") continue;
    else if (key == "model_size") c.model_size = v.get<std::size_t>();
    else if (key == "blocks") c.blocks = v.get<std::size_t>();
    else if (key == "layers_per_block") c.layers_per_block = v.get<std::size_t>();
    else if (key == "attgnn_size") c.attgnn_size = v.get<std::size_t>();
    else if (key == "resgnn_size") c.resgnn_size = v.get<std::size_t>();
    else if (key == "mlp_factor") c.mlp_factor = v.get<std::size_t>();
    else if (key == "mlp_layers") c.mlp_layers = v.get<std::size_t>();
    else if (key == "heads") c.heads = v.get<std::size_t>();
    else if (key == "t_enc_dim") c.t_enc_dim = v.get<std::size_t>();
    else if (key == "xy_enc_dim") c.xy_enc_dim = v.get<std::size_t>();
    else if (key == "num_timesteps") c.num_timesteps = v.get<std::size_t>();
    else if (key == "use_attention") c.use_attention = v.get<bool>();
    else if (key == "use_mlp") c.use_mlp = v.get<bool>();
    else if (key == "use_encodings") c.use_encodings = v.get<bool>();
    else throw ConfigError("unknown model config key '" + key + "'");
  }
  c.check();
  return c;
}

ag::Tensor sinusoidal_xy_encoding(const std::vector<Vec2>& coords, std::size_t dim) {
  if (dim % 4 != 0) throw ConfigError("xy encoding dimension " + std::to_string(dim) + " is not divisible by 4");
  const std::size_t k_count = dim / 4;
  const std::size_t cols = dim + 2;
  ag::Tensor out = ag::Tensor::zeros(coords.size(), cols);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    out.at(i, 0) = coords[i].x;
    out.at(i, 1) = coords[i].y;
    const double axis[2] = {coords[i].x, coords[i].y};
    for (std::size_t a = 0; a < 2; ++a) {
      const std::size_t base = 2 + a * 2 * k_count;
      for (std::size_t k = 0; k < k_count; ++k) {
        const double w = std::numbers::pi * std::ldexp(1.0, static_cast<int>(k));
        out.at(i, base + k) = std::sin(w * axis[a]);
        out.at(i, base + k_count + k) = std::cos(w * axis[a]);
      }
    }
  }
  return out;
}

std::vector<double> timestep_encoding(double t, std::size_t dim) {
  const std::size_t half = dim / 2;
  std::vector<double> e(dim, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    const double f = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    e[k] = std::sin(t * f);
    e[half + k] = std::cos(t * f);
  }
  return e;
}

GraphBatch make_batch(const std::vector<const Netlist*>& netlists) {
  GraphBatch b;
  b.circuit_begin.push_back(0);
  std::vector<double> attr;
  for (std::size_t c = 0; c < netlists.size(); ++c) {
    const Netlist& raw = *netlists[c];
    Netlist expanded;
    const Netlist* nl = &raw;
    if (raw.edges.empty() && raw.has_nets()) {
      expanded = hypergraph_to_edges(raw);
      nl = &expanded;
    }
    const std::size_t base = b.num_nodes;
    for (std::size_t i = 0; i < nl->size(); ++i) {
      b.circuit_of.push_back(c);
      b.geoms.push_back(nl->objects[i]);
      b.fixed.push_back(nl->is_fixed(i));
    }
    for (const Edge& e : nl->edges) {
      if (e.src >= nl->size() || e.dst >= nl->size()) {
        throw ValidationError("make_batch: edge endpoint out of range in circuit " + std::to_string(c));
      }
      b.src.push_back(base + e.src);
      b.dst.push_back(base + e.dst);
      attr.insert(attr.end(), {e.attr.src_offset.x, e.attr.src_offset.y, e.attr.dst_offset.x, e.attr.dst_offset.y});
      b.src.push_back(base + e.dst);
      b.dst.push_back(base + e.src);
      attr.insert(attr.end(), {e.attr.dst_offset.x, e.attr.dst_offset.y, e.attr.src_offset.x, e.attr.src_offset.y});
    }
    for (std::size_t i = 0; i < nl->size(); ++i) {
      b.src.push_back(base + i);
      b.dst.push_back(base + i);
      attr.insert(attr.end(), {0.0, 0.0, 0.0, 0.0});
    }
    b.num_nodes += nl->size();
    b.circuit_begin.push_back(b.num_nodes);
  }
  b.edge_attr = ag::Tensor::from(b.src.size(), 4, std::move(attr));
  return b;
}

Denoiser::Denoiser(const DenoiserConfig& config, std::uint64_t seed) : config_(config) {
  config_.check();
  Rng rng = make_rng(derive_seed(seed, "init"));
  init_rng_ = &rng;
  const std::size_t m = config_.model_size;
  input_ = make_linear("input", config_.input_dim(), m);
  time1_ = make_linear("time.0", config_.t_enc_dim, m);
  time2_ = make_linear("time.1", m, m);
  for (std::size_t k = 0; k < config_.blocks; ++k) {
    const std::string p = "block" + std::to_string(k) + ".";
    Block blk;
    blk.gnn = make_gnn(p + "gnn");
    if (config_.use_mlp) blk.mlp1 = make_mlp(p + "mlp0");
    if (config_.use_attention) {
      blk.attn = make_attn(p + "attn");
    } else {
      blk.gnn2 = make_gnn(p + "gnn_alt");
    }
    if (config_.use_mlp) blk.mlp2 = make_mlp(p + "mlp1");
    blocks_.push_back(std::move(blk));
  }
  out_norm_ = make_norm("out.norm", m);
  head_ = make_linear("out.head", m, 2, true);
  init_rng_ = nullptr;
}

ag::Tensor Denoiser::add_param(const std::string& name, std::size_t rows, std::size_t cols, double stddev) {
  std::vector<double> v(rows * cols, 0.0);
  if (stddev > 0) {
    std::normal_distribution<double> nd(0.0, stddev);
    for (double& x : v) x = nd(*init_rng_);
  }
  ag::Tensor t = ag::Tensor::from(rows, cols, std::move(v), true);
  params_.push_back(t);
  names_.push_back(name);
  return t;
}

ag::Tensor Denoiser::add_const(const std::string& name, std::size_t rows, std::size_t cols, double value) {
  ag::Tensor t = ag::Tensor::from(rows, cols, std::vector<double>(rows * cols, value), true);
  params_.push_back(t);
  names_.push_back(name);
  return t;
}

Denoiser::Linear Denoiser::make_linear(const std::string& name, std::size_t in, std::size_t out, bool zero) {
  Linear l;
  l.w = add_param(name + ".w", in, out, zero ? 0.0 : 1.0 / std::sqrt(static_cast<double>(in)));
  l.b = add_const(name + ".b", 1, out, 0.0);
  return l;
}

Denoiser::Norm Denoiser::make_norm(const std::string& name, std::size_t dim) {
  return {add_const(name + ".gain", 1, dim, 1.0), add_const(name + ".bias", 1, dim, 0.0)};
}

Denoiser::GnnSublayer Denoiser::make_gnn(const std::string& name) {
  GnnSublayer s;
  s.norm = make_norm(name + ".norm", config_.model_size);
  std::size_t in = config_.model_size;
  const std::size_t out = config_.resgnn_size;
  const double head_dim = static_cast<double>(out / config_.heads);
  for (std::size_t k = 0; k < config_.layers_per_block; ++k) {
    const std::string p = name + ".gat" + std::to_string(k);
    GatLayer l;
    l.w_src = add_param(p + ".w_src", in, out, 1.0 / std::sqrt(static_cast<double>(in)));
    l.w_dst = add_param(p + ".w_dst", in, out, 1.0 / std::sqrt(static_cast<double>(in)));
    l.w_edge = add_param(p + ".w_edge", 4, out, 1.0);
    l.att = add_param(p + ".att", 1, out, 1.0 / std::sqrt(head_dim));
    l.bias = add_const(p + ".bias", 1, out, 0.0);
    s.layers.push_back(l);
    in = out;
  }
  s.out = make_linear(name + ".out", out, config_.model_size);
  return s;
}

Denoiser::MlpSublayer Denoiser::make_mlp(const std::string& name) {
  MlpSublayer s;
  s.norm = make_norm(name + ".norm", config_.model_size);
  const std::size_t hidden = config_.model_size * config_.mlp_factor;
  for (std::size_t k = 0; k < config_.mlp_layers; ++k) {
    const std::size_t in = k == 0 ? config_.model_size : hidden;
    const std::size_t out = k + 1 == config_.mlp_layers ? config_.model_size : hidden;
    s.layers.push_back(make_linear(name + ".fc" + std::to_string(k), in, out));
  }
  return s;
}

Denoiser::AttnSublayer Denoiser::make_attn(const std::string& name) {
  AttnSublayer s;
  const std::size_t m = config_.model_size, w = config_.heads * config_.attgnn_size;
  s.norm = make_norm(name + ".norm", m);
  s.q = make_linear(name + ".q", m, w);
  s.k = make_linear(name + ".k", m, w);
  s.v = make_linear(name + ".v", m, w);
  s.o = make_linear(name + ".o", w, m);
  return s;
}

std::size_t Denoiser::num_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

ag::Tensor Denoiser::linear(ag::Tape& tape, const ag::Tensor& x, const Linear& l) const {
  return tape.add_row(tape.matmul(x, l.w), l.b);
}

ag::Tensor Denoiser::norm(ag::Tape& tape, const ag::Tensor& x, const Norm& n) const {
  return tape.layer_norm(x, n.gain, n.bias);
}

// GATv2 with edge features in the logits:
//   e_ij = a . LeakyReLU(Ws h_j + Wd h_i + We q_ij), alpha = softmax over j,
//   out_i = sum_j alpha_ij Ws h_j + b.
ag::Tensor Denoiser::gat(ag::Tape& tape, const ag::Tensor& h, const GatLayer& l, const GraphBatch& batch) const {
  const ag::Tensor s = tape.matmul(h, l.w_src);
  const ag::Tensor d = tape.matmul(h, l.w_dst);
  const ag::Tensor e = tape.matmul(batch.edge_attr, l.w_edge);
  const ag::Tensor sg = tape.gather_rows(s, batch.src);
  const ag::Tensor z = tape.leaky_relu(tape.add(tape.add(sg, tape.gather_rows(d, batch.dst)), e), 0.2);
  const ag::Tensor logits = tape.group_sum_cols(tape.mul_row(z, l.att), config_.heads);
  const ag::Tensor alpha = tape.segment_softmax(logits, batch.dst, batch.num_nodes);
  const ag::Tensor msg = tape.mul_groups(alpha, sg);
  return tape.add_row(tape.segment_sum(msg, batch.dst, batch.num_nodes), l.bias);
}

ag::Tensor Denoiser::gnn(ag::Tape& tape, const ag::Tensor& h, const GnnSublayer& s, const GraphBatch& batch) const {
  ag::Tensor x = norm(tape, h, s.norm);
  for (const auto& l : s.layers) x = tape.gelu(gat(tape, x, l, batch));
  return linear(tape, x, s.out);
}

ag::Tensor Denoiser::mlp(ag::Tape& tape, const ag::Tensor& h, const MlpSublayer& s) const {
  ag::Tensor x = norm(tape, h, s.norm);
  for (std::size_t k = 0; k < s.layers.size(); ++k) {
    x = linear(tape, x, s.layers[k]);
    if (k + 1 < s.layers.size()) x = tape.gelu(x);
  }
  return x;
}

// Dense multi-head self-attention within each circuit (block-diagonal mask).
ag::Tensor Denoiser::attention(ag::Tape& tape, const ag::Tensor& h, const AttnSublayer& s,
                               const GraphBatch& batch) const {
  const ag::Tensor x = norm(tape, h, s.norm);
  const ag::Tensor q = linear(tape, x, s.q);
  const ag::Tensor k = linear(tape, x, s.k);
  const ag::Tensor v = linear(tape, x, s.v);
  const std::size_t hd = config_.attgnn_size;
  const double inv = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<ag::Tensor> circuits;
  for (std::size_t c = 0; c < batch.num_circuits(); ++c) {
    const std::size_t start = batch.circuit_begin[c], count = batch.circuit_begin[c + 1] - start;
    if (count == 0) continue;
    const ag::Tensor qc = tape.slice_rows(q, start, count);
    const ag::Tensor kc = tape.slice_rows(k, start, count);
    const ag::Tensor vc = tape.slice_rows(v, start, count);
    std::vector<ag::Tensor> heads;
    for (std::size_t hh = 0; hh < config_.heads; ++hh) {
      const ag::Tensor scores =
          tape.scale(tape.matmul_nt(tape.slice_cols(qc, hh * hd, hd), tape.slice_cols(kc, hh * hd, hd)), inv);
      heads.push_back(tape.matmul(tape.softmax_rows(scores), tape.slice_cols(vc, hh * hd, hd)));
    }
    circuits.push_back(heads.size() == 1 ? heads.front() : tape.concat_cols(heads));
  }
  const ag::Tensor o = circuits.size() == 1 ? circuits.front() : tape.concat_rows(circuits);
  return linear(tape, o, s.o);
}

ag::Tensor Denoiser::forward(ag::Tape& tape, const ag::Tensor& coords, const std::vector<double>& t,
                             const GraphBatch& batch) const {
  if (params_.empty()) throw ConfigError("forward: denoiser has no parameters");
  if (coords.rows() != batch.num_nodes || coords.cols() != 2) {
    throw ag::ShapeError("forward: coords must be [" + std::to_string(batch.num_nodes) + ", 2]");
  }
  if (t.size() != batch.num_circuits()) throw ag::ShapeError("forward: need one timestep per circuit");
  if (batch.num_nodes == 0) return ag::Tensor::zeros(0, 2);

  const std::size_t n = batch.num_nodes;
  std::vector<double> geom(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    geom[2 * i] = batch.geoms[i].width;
    geom[2 * i + 1] = batch.geoms[i].height;
  }
  ag::Tensor pos;
  if (config_.use_encodings) {
    std::vector<Vec2> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = {coords.at(i, 0), coords.at(i, 1)};
    pos = sinusoidal_xy_encoding(c, config_.xy_enc_dim);
  } else {
    pos = coords;
  }
  const ag::Tensor feats = tape.concat_cols({pos, ag::Tensor::from(n, 2, std::move(geom))});
  ag::Tensor h = linear(tape, feats, input_);

  std::vector<double> tenc;
  for (double tc : t) {
    auto e = timestep_encoding(tc, config_.t_enc_dim);
    tenc.insert(tenc.end(), e.begin(), e.end());
  }
  const ag::Tensor temb = linear(
      tape,
      tape.gelu(linear(tape, ag::Tensor::from(t.size(), config_.t_enc_dim, std::move(tenc)), time1_)),
      time2_);
  h = tape.add(h, tape.gather_rows(temb, batch.circuit_of));

  for (const Block& blk : blocks_) {
    h = tape.add(h, gnn(tape, h, blk.gnn, batch));
    if (blk.mlp1) h = tape.add(h, mlp(tape, h, *blk.mlp1));
    if (blk.attn) h = tape.add(h, attention(tape, h, *blk.attn, batch));
    if (blk.gnn2) h = tape.add(h, gnn(tape, h, *blk.gnn2, batch));
    if (blk.mlp2) h = tape.add(h, mlp(tape, h, *blk.mlp2));
  }
  return linear(tape, norm(tape, h, out_norm_), head_);
}

// Checkpoints ---------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_doubles(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::span<double> v, const std::string& path) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint '" + path + "': truncated parameter data");
}

}  // namespace

void save_checkpoint(const std::string& path, const Denoiser& model, const CheckpointExtras& extras) {
  const auto& params = model.parameters();
  const auto& names = model.parameter_names();
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  std::vector<std::span<const double>> blocks;
  auto add_block = [&](const std::string& name, std::size_t rows, std::size_t cols, std::span<const double> data) {
    manifest.push_back({{"name", name}, {"shape", {rows, cols}}, {"offset", offset}, {"count", data.size()}});
    offset += data.size() * sizeof(double);
    blocks.push_back(data);
  };
  for (std::size_t k = 0; k < params.size(); ++k) {
    add_block(names[k], params[k].rows(), params[k].cols(), params[k].values());
  }
  nlohmann::json header = {{"format", "diffplace-checkpoint"},
                           {"version", kCheckpointVersion},
                           {"config", to_json(model.config())},
                           {"metadata", extras.metadata}};
  if (extras.adam) {
    const auto& a = *extras.adam;
    if (a.m.size() != params.size() && !a.m.empty()) {
      throw std::invalid_argument("save_checkpoint: optimizer state does not match parameters");
    }
    header["adam"] = {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}, {"step", a.step},
                      {"has_moments", !a.m.empty()}};
    for (std::size_t k = 0; k < a.m.size(); ++k) {
      add_block("adam.m." + names[k], params[k].rows(), params[k].cols(), a.m[k]);
      add_block("adam.v." + names[k], params[k].rows(), params[k].cols(), a.v[k]);
    }
  }
  header["blocks"] = manifest;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto b : blocks) write_doubles(out, b);
  if (!out) throw std::runtime_error("error writing checkpoint '" + path + "'");
}

Denoiser load_checkpoint(const std::string& path, CheckpointExtras* extras) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("checkpoint '" + path + "': bad magic");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 30)) throw std::runtime_error("checkpoint '" + path + "': bad header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint '" + path + "': truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint '" + path + "': " + e.what());
  }
  if (header.value("format", "") != "diffplace-checkpoint" || header.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error("checkpoint '" + path + "': unsupported format or version");
  }
  Denoiser model(denoiser_config_from_json(header.at("config")), 0);
  auto& params = model.parameters();
  const auto& names = model.parameter_names();
  const auto& blocks = header.at("blocks");

  const std::streamoff data_start = in.tellg();
  auto read_block = [&](const nlohmann::json& entry, const std::string& name, std::span<double> dest) {
    if (entry.at("name").get<std::string>() != name || entry.at("count").get<std::size_t>() != dest.size()) {
      throw std::runtime_error("checkpoint '" + path + "': manifest mismatch at '" + name + "'");
    }
    in.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    read_doubles(in, dest, path);
  };
  if (blocks.size() < params.size()) throw std::runtime_error("checkpoint '" + path + "': missing parameters");
  for (std::size_t k = 0; k < params.size(); ++k) read_block(blocks[k], names[k], params[k].values());

  if (extras) {
    extras->metadata = header.value("metadata", nlohmann::json::object());
    extras->adam.reset();
    if (header.contains("adam")) {
      const auto& a = header["adam"];
      ag::AdamState st;
      st.lr = a.at("lr");
      st.beta1 = a.at("beta1");
      st.beta2 = a.at("beta2");
      st.eps = a.at("eps");
      st.step = a.at("step");
      if (a.value("has_moments", false)) {
        st.m.resize(params.size());
        st.v.resize(params.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
          st.m[k].resize(params[k].size());
          st.v[k].resize(params[k].size());
          read_block(blocks.at(params.size() + 2 * k), "adam.m." + names[k], st.m[k]);
          read_block(blocks.at(params.size() + 2 * k + 1), "adam.v." + names[k], st.v[k]);
        }
      }
      extras->adam = std::move(st);
    }
  }
  return model;
}

}  // namespace diffplace
