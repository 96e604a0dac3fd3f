#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "diffplace/ddpm.hpp"
#include "diffplace/io.hpp"
#include "diffplace/metrics.hpp"
#include "diffplace/study.hpp"

using namespace diffplace;
using nlohmann::json;
namespace fs = std::filesystem;

#ifndef DIFFPLACE_VERSION
#define DIFFPLACE_VERSION "dev"
#endif

namespace {

// A netlist argument is a circuit/dataset JSON file or a Bookshelf design.
struct Input {
  Circuit circuit;
  std::optional<BookshelfDesign> design;
};

bool is_bookshelf(const std::string& path) {
  return fs::is_directory(path) || fs::path(path).extension() == ".aux";
}

Input load_input(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("netlist '" + path + "' does not exist");
  Input in;
  if (!is_bookshelf(path)) {
    in.circuit = read_circuit_file(path);
    return in;
  }
  in.design = parse_bookshelf(path);
  Circuit& c = in.circuit;
  c.netlist = in.design->netlist;
  if (in.design->placement) c.placement = *in.design->placement;
  c.meta.version = "bookshelf";
  c.meta.unit_scale = in.design->unit_scale();
  c.meta.num_objects = c.netlist.size();
  return in;
}

Circuit design_to_circuit(const BookshelfDesign& d) {
  Circuit c;
  c.netlist = hypergraph_to_edges(d.netlist);
  if (d.placement) c.placement = *d.placement;
  for (const auto& n : d.netlist.nets) c.pins.insert(c.pins.end(), n.pins.begin(), n.pins.end());
  c.meta.version = "bookshelf";
  c.meta.unit_scale = d.unit_scale();
  c.meta.num_objects = c.netlist.size();
  c.meta.num_pins = c.pins.size();
  c.meta.num_edges = c.netlist.edges.size();
  return c;
}

SynthParams params_arg(const std::string& arg) {
  for (const char* name : {"v0", "v1", "v2", "toy"}) {
    if (arg == name) return synth_preset(arg);
  }
  if (!fs::exists(arg)) throw std::runtime_error("params file '" + arg + "' does not exist");
  return load_synth_params(arg);
}

DenoiserConfig model_arg(const std::string& arg) {
  for (const char* name : {"small", "medium", "large", "toy", "tiny"}) {
    if (arg == name) return denoiser_preset(arg);
  }
  if (!fs::exists(arg)) throw std::runtime_error("model config '" + arg + "' does not exist");
  json j;
  try {
    j = json::parse(read_text_file(arg));
  } catch (const json::exception& e) {
    throw std::runtime_error(arg + ": " + e.what());
  }
  return denoiser_config_from_json(j);
}

Placement placement_or_reference(const std::string& path, const Circuit& c) {
  if (!path.empty()) return read_placement_json(path);
  if (c.placement.size() != c.netlist.size()) {
    throw std::runtime_error("no --placement given and the netlist carries no reference placement");
  }
  return c.placement;
}

json placement_json(const Placement& p) {
  json a = json::array();
  for (const auto& v : p.coords) a.push_back({v.x, v.y});
  return a;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Guidance flags shared by sample and study. Every tuning flag needs --guided.
struct GuidanceFlags {
  bool guided = false;
  GuidanceConfig cfg;

  void add(CLI::App* app) {
    auto* g = app->add_flag("--guided", guided, "Apply legality/HPWL guidance");
    app->add_option("--w-hpwl", cfg.w_hpwl, "HPWL weight in the guidance potential")->needs(g);
    app->add_option("--x-lr", cfg.x_lr, "Inner descent step size")->needs(g);
    app->add_option("--w-lr", cfg.w_lr, "Lagrange multiplier learning rate")->needs(g);
    app->add_option("--w-init", cfg.w_init, "Initial Lagrange multiplier")->needs(g);
    app->add_option("--inner-steps", cfg.inner_steps, "Inner iterations per timestep")->needs(g);
    app->add_option("--slack", cfg.slack, "Legality slack")->needs(g);
    app->add_option("--w-g", cfg.w_g, "Guidance strength")->needs(g);
  }
  std::optional<GuidanceConfig> get() const {
    if (!guided) return std::nullopt;
    cfg.check();
    return cfg;
  }
};

// Numbers stay numbers; everything else is kept as given.
json typed(const std::string& v) {
  const json n = json::parse(v, nullptr, false);
  return n.is_number() ? n : json(v);
}

json options_of(const CLI::App* app) {
  json j = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help" || opt->get_lnames().front() == "config") continue;
    const std::string name = opt->get_lnames().front();
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_type_size() == 0) {
        j[name] = true;
      } else if (r.size() == 1) {
        j[name] = typed(r.front());
      } else {
        j[name] = json::array();
        for (const auto& v : r) j[name].push_back(typed(v));
      }
    } else if (!opt->get_default_str().empty()) {
      j[name] = typed(opt->get_default_str());
    }
  }
  return j;
}

void write_manifest(const std::string& out, const CLI::App* sub, const std::vector<std::string>& argv,
                    const json& seeds, const std::vector<std::string>& outputs, double seconds) {
  json m = {
      {"format", "diffplace-manifest"},
      {"version", 1},
      {"tool", {{"name", "diffplace"}, {"version", DIFFPLACE_VERSION}}},
      {"libraries",
       {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"cli11", CLI11_VERSION}}},
      {"command", sub->get_name()},
      {"argv", argv},
      {"options", options_of(sub)},
      {"seeds", seeds},
      {"outputs", outputs},
      {"elapsed_seconds", seconds},
  };
  write_text_file(out + ".manifest.json", m.dump(2) + "\n");
}

// Appends "--key value" for config entries not given on the command line, so
// flags win over the config file and the parser checks both the same way.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  if (!fs::exists(path)) throw std::runtime_error("config file '" + path + "' does not exist");
  json cfg;
  try {
    cfg = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (!cfg.is_object()) throw std::runtime_error(path + ": config must be a JSON object");
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back(flag);
    } else if (value.is_array()) {
      extra.push_back(flag);
      for (const auto& v : value) extra.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      extra.push_back(flag);
      extra.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-based macro placement toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DIFFPLACE_VERSION);
  auto config_opt = [](CLI::App* sub) {
    sub->add_option("--config", "JSON file of option values; command-line flags take precedence");
  };

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  std::string gen_params, gen_out, gen_stats;
  std::size_t gen_count = 0;
  std::uint64_t gen_seed = 0;
  unsigned gen_workers = 1;
  gen->add_option("--params", gen_params, "Preset name (v0, v1, v2, toy) or JSON params file")->required();
  gen->add_option("--count", gen_count, "Number of circuits")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Master seed")->capture_default_str();
  gen->add_option("--workers", gen_workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output dataset (JSONL)")->required();
  gen->add_option("--stats", gen_stats, "Statistics JSON (default <out>.stats.json)");
  config_opt(gen);

  // train
  auto* tr = app.add_subcommand("train", "Train or fine-tune a denoiser");
  std::string tr_data, tr_model = "toy", tr_resume, tr_out, tr_log;
  std::size_t tr_steps = 0, tr_batch = 16, tr_every = 0;
  double tr_lr = 3e-4, tr_lr_final = 0.0;
  std::uint64_t tr_seed = 0;
  tr->add_option("--data", tr_data, "Training dataset (JSONL)")->required();
  auto* tr_model_opt = tr->add_option("--model", tr_model, "Preset (small, medium, large, toy, tiny) or JSON config")
                           ->capture_default_str();
  tr->add_option("--resume", tr_resume, "Continue from a checkpoint (weights and optimizer state)")->excludes(tr_model_opt);
  tr->add_option("--steps", tr_steps, "Steps to run in this invocation")->required()->check(CLI::PositiveNumber);
  tr->add_option("--batch", tr_batch, "Circuits per batch")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--lr", tr_lr, "Peak learning rate")->capture_default_str();
  tr->add_option("--lr-final", tr_lr_final, "Learning rate at the end of the cosine decay")->capture_default_str();
  tr->add_option("--seed", tr_seed, "Seed for initialization and batch sampling")->capture_default_str();
  tr->add_option("--out", tr_out, "Output checkpoint")->required();
  tr->add_option("--log", tr_log, "Loss log (CSV: step,loss,lr)");
  tr->add_option("--checkpoint-every", tr_every, "Also write <out> every N steps (0 = only at the end)")
      ->capture_default_str();
  config_opt(tr);

  // sample
  auto* sa = app.add_subcommand("sample", "Sample a placement for one netlist");
  std::string sa_ckpt, sa_netlist, sa_out, sa_traj, sa_pl;
  std::uint64_t sa_seed = 0;
  std::size_t sa_interval = 200;
  bool sa_det = false;
  GuidanceFlags sa_g;
  sa->add_option("--ckpt", sa_ckpt, "Model checkpoint")->required();
  sa->add_option("--netlist", sa_netlist, "Circuit JSON, dataset (first record) or Bookshelf .aux/directory")->required();
  sa->add_option("--out", sa_out, "Output placement JSON")->required();
  sa->add_option("--seed", sa_seed, "Sampling seed")->capture_default_str();
  sa_g.add(sa);
  auto* traj_opt = sa->add_option("--trajectory", sa_traj, "Also write a filmstrip SVG of the denoising trajectory");
  sa->add_option("--interval", sa_interval, "Steps between trajectory frames")->capture_default_str()->needs(traj_opt)
      ->check(CLI::PositiveNumber);
  sa->add_flag("--deterministic", sa_det, "Use sigma_t = 0");
  sa->add_option("--pl", sa_pl, "Also write a Bookshelf .pl (Bookshelf input only)");
  config_opt(sa);

  // eval
  auto* ev = app.add_subcommand("eval", "Compute metrics for a placement");
  std::string ev_netlist, ev_place, ev_out;
  std::size_t ev_grid = 256;
  bool ev_map = false;
  ev->add_option("--netlist", ev_netlist, "Circuit JSON or Bookshelf design")->required();
  ev->add_option("--placement", ev_place, "Placement JSON (default: the netlist's reference placement)");
  ev->add_option("--rudy-grid", ev_grid, "RUDY grid resolution")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_flag("--rudy-map", ev_map, "Include the full RUDY map");
  ev->add_option("--out", ev_out, "Report JSON (default: stdout)");
  config_opt(ev);

  // render
  auto* re = app.add_subcommand("render", "Render a placement or trajectory as SVG");
  std::string re_netlist, re_place, re_out, re_title;
  double re_size = 512;
  bool re_edges = false, re_no_overlap = false, re_traj = false;
  re->add_option("--netlist", re_netlist, "Circuit JSON or Bookshelf design")->required();
  re->add_option("--placement", re_place, "Placement JSON (default: the netlist's reference placement)");
  re->add_option("--out", re_out, "Output SVG")->required();
  re->add_flag("--trajectory", re_traj, "Draw the trajectory stored in --placement as a filmstrip");
  re->add_flag("--edges", re_edges, "Draw edges");
  re->add_flag("--no-overlaps", re_no_overlap, "Do not highlight overlaps");
  re->add_option("--size", re_size, "Panel size in pixels")->capture_default_str()->check(CLI::PositiveNumber);
  re->add_option("--title", re_title, "Title text");
  config_opt(re);

  // convert
  auto* cv = app.add_subcommand("convert", "Convert a Bookshelf design into a circuit JSON");
  std::string cv_aux, cv_part, cv_out, cv_bs_out;
  std::size_t cv_k = 0;
  cv->add_option("--aux", cv_aux, "Bookshelf .aux file or directory")->required();
  auto* part_opt = cv->add_option("--partition", cv_part, "Cluster assignment for standard cells");
  auto* k_opt = cv->add_option("--clusters", cv_k, "Number of clusters")->check(CLI::PositiveNumber);
  part_opt->needs(k_opt);
  k_opt->needs(part_opt);
  cv->add_option("--out", cv_out, "Output circuit JSON")->required();
  cv->add_option("--bookshelf-out", cv_bs_out, "Also write the (clustered) design as Bookshelf into this directory");
  config_opt(cv);

  // study
  auto* st = app.add_subcommand("study", "Sweep one generation parameter and evaluate a trained model");
  std::string st_axis, st_ckpt, st_grid, st_base = "toy", st_out, st_svg;
  std::size_t st_count = 16, st_seeds = 1;
  std::uint64_t st_seed = 0;
  GuidanceFlags st_g;
  st->add_option("--axis", st_axis, "edges, vertices, scale or edge-dist")
      ->required()
      ->check(CLI::IsMember({"edges", "vertices", "scale", "edge-dist"}));
  st->add_option("--ckpt", st_ckpt, "Model checkpoint")->required();
  st->add_option("--grid", st_grid, "Comma-separated grid values")->required();
  st->add_option("--base", st_base, "Base generation params (preset or JSON file)")->capture_default_str();
  st->add_option("--count", st_count, "Circuits per grid point and seed")->capture_default_str()->check(CLI::PositiveNumber);
  st->add_option("--seeds", st_seeds, "Independent seeds per grid point")->capture_default_str()->check(CLI::PositiveNumber);
  st->add_option("--seed", st_seed, "Master seed")->capture_default_str();
  st_g.add(st);
  st->add_option("--out", st_out, "Output CSV")->required();
  st->add_option("--svg", st_svg, "Line charts (default <out>.svg)");
  config_opt(st);

  std::vector<std::string> args;
  try {
    args = merge_config(std::vector<std::string>(argv + 1, argv + argc));
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (*gen) {
      const SynthParams params = params_arg(gen_params);
      if (gen_stats.empty()) gen_stats = gen_out + ".stats.json";
      DatasetWriter writer(gen_out);
      const DatasetStats stats =
          generate_dataset(params, gen_count, gen_seed, gen_workers, [&](std::size_t, const Circuit& c) { writer.write(c); });
      writer.close();
      json sj = stats.to_json();
      sj["params"] = to_json(params);
      write_text_file(gen_stats, sj.dump(2) + "\n");
      write_manifest(gen_out, gen, args, {{"master", gen_seed}, {"stream", "circuit i uses seed ^ i"}}, {gen_out, gen_stats},
                     elapsed(t0));
      std::cerr << "wrote " << stats.count << " circuits to " << gen_out << " (" << stats.incomplete << " incomplete)\n";
    } else if (*tr) {
      if (!fs::exists(tr_data)) throw std::runtime_error("dataset '" + tr_data + "' does not exist");
      if (!tr_resume.empty() && !fs::exists(tr_resume)) throw std::runtime_error("checkpoint '" + tr_resume + "' does not exist");
      std::optional<DenoiserConfig> cfg;
      if (tr_resume.empty()) cfg = model_arg(tr_model);
      const auto circuits = read_dataset(tr_data);
      if (circuits.empty()) throw std::runtime_error("dataset '" + tr_data + "' has no records");
      std::vector<TrainingExample> data;
      for (std::size_t i = 0; i < circuits.size(); ++i) {
        if (circuits[i].placement.size() != circuits[i].netlist.size()) {
          throw std::runtime_error(tr_data + ": record " + std::to_string(i) + " has no reference placement");
        }
        data.push_back({&circuits[i].netlist, &circuits[i].placement, i});
      }

      CheckpointExtras extras;
      std::optional<Denoiser> model;
      ag::AdamState opt;
      if (!tr_resume.empty()) {
        model.emplace(load_checkpoint(tr_resume, &extras));
        if (extras.adam) opt = *extras.adam;
      } else {
        model.emplace(*cfg, derive_seed(tr_seed, "init"));
      }
      const NoiseSchedule schedule = cosine_schedule(model->config().num_timesteps);
      TrainConfig tc;
      tc.start_step = static_cast<std::size_t>(opt.step);
      tc.steps = tc.start_step + tr_steps;
      tc.batch_size = tr_batch;
      tc.lr = tr_lr;
      tc.lr_final = tr_lr_final;
      tc.seed = tr_seed;

      json history = extras.metadata.value("stages", json::array());
      history.push_back({{"data", tr_data}, {"start_step", tc.start_step}, {"end_step", tc.steps}, {"lr", tr_lr},
                         {"lr_final", tr_lr_final}, {"batch", tr_batch}, {"seed", tr_seed}});
      auto save = [&]() {
        CheckpointExtras out;
        out.metadata = {{"stages", history}, {"tool_version", DIFFPLACE_VERSION}};
        out.adam = opt;
        save_checkpoint(tr_out, *model, out);
      };

      std::ofstream log;
      if (!tr_log.empty()) {
        log.open(tr_log, tr_resume.empty() ? std::ios::trunc : std::ios::app);
        if (!log) throw std::runtime_error("cannot write '" + tr_log + "'");
        if (tr_resume.empty()) log << "step,loss,lr\n";
      }
      double window = 0.0;
      std::size_t in_window = 0;
      train(*model, opt, schedule, data, tc, [&](std::size_t step, double loss) {
        if (log.is_open()) log << step << ',' << loss << ',' << opt.lr << '\n';
        window += loss;
        ++in_window;
        if (step % 100 == 0 || step == tc.steps) {
          std::cerr << "step " << step << " loss " << window / static_cast<double>(in_window) << "\n";
          window = 0.0;
          in_window = 0;
        }
        if (tr_every > 0 && step % tr_every == 0 && step != tc.steps) save();
      });
      save();
      write_manifest(tr_out, tr, args, {{"master", tr_seed}, {"init", "derive_seed(seed, init)"},
                                         {"batches", "derive_seed(seed, train, step)"}},
                     {tr_out}, elapsed(t0));
    } else if (*sa) {
      const auto guidance = sa_g.get();
      Input in = load_input(sa_netlist);
      if (!sa_pl.empty() && !in.design) throw std::runtime_error("--pl needs a Bookshelf netlist");
      const Denoiser model = load_checkpoint(sa_ckpt);
      const NoiseSchedule schedule = cosine_schedule(model.config().num_timesteps);
      SampleOptions so;
      so.seed = sa_seed;
      so.guidance = guidance;
      so.deterministic = sa_det;
      if (!sa_traj.empty()) so.trajectory_interval = sa_interval;
      const Netlist& nl = in.circuit.netlist;
      const bool has_fixed = nl.num_movable() != nl.size();
      if (has_fixed && in.circuit.placement.size() != nl.size()) {
        throw std::runtime_error("netlist has fixed objects but no coordinates for them");
      }
      const SampleResult res = sample(model, schedule, nl, has_fixed ? &in.circuit.placement : nullptr, so);

      json extra = {{"seed", sa_seed}, {"guided", guidance.has_value()}, {"guidance_flags", res.guidance_flags}};
      if (guidance) extra["lagrange_w"] = res.lagrange.w;
      std::vector<std::string> outputs{sa_out};
      if (!sa_traj.empty()) {
        std::vector<std::string> labels{"x_T"};
        for (std::size_t t = schedule.T; t >= 1 && labels.size() + 1 < res.trajectory.size();
             t = t > sa_interval ? t - sa_interval : 0) {
          labels.push_back("t=" + std::to_string(t));
        }
        labels.push_back("final");
        json frames = json::array();
        for (const auto& f : res.trajectory) frames.push_back(placement_json(f));
        extra["trajectory"] = frames;
        extra["trajectory_labels"] = labels;
        RenderOptions ro;
        ro.title = "denoising trajectory";
        write_text_file(sa_traj, render_filmstrip(res.trajectory, labels, nl, ro));
        outputs.push_back(sa_traj);
      }
      write_placement_json(sa_out, res.placement, extra);
      if (!sa_pl.empty()) {
        write_placement(res.placement, *in.design, sa_pl);
        outputs.push_back(sa_pl);
      }
      write_manifest(sa_out, sa, args, {{"master", sa_seed}, {"noise", "derive_seed(seed, sample, 0)"}}, outputs,
                     elapsed(t0));
      std::cerr << "legality " << legality_score(res.placement, nl) << " hpwl " << hpwl(res.placement, nl) << "\n";
    } else if (*ev) {
      Input in = load_input(ev_netlist);
      const Placement pl = placement_or_reference(ev_place, in.circuit);
      if (pl.size() != in.circuit.netlist.size()) {
        throw std::runtime_error("placement has " + std::to_string(pl.size()) + " objects, netlist has " +
                                 std::to_string(in.circuit.netlist.size()));
      }
      const double us = in.circuit.meta.unit_scale;
      const MetricReport rep = evaluate(pl, in.circuit.netlist, ev_grid, us != 1.0 ? std::optional<double>(us) : std::nullopt);
      json j = {{"format", "diffplace-metrics"},
                {"version", 1},
                {"num_objects", in.circuit.netlist.size()},
                {"hpwl", rep.hpwl},
                {"legality", rep.legality},
                {"rudy", rep.rudy_scalar},
                {"rudy_grid", rep.rudy_map.grid_n}};
      if (rep.hpwl_original_units) j["hpwl_original_units"] = *rep.hpwl_original_units;
      if (!ev_place.empty() && in.circuit.placement.size() == in.circuit.netlist.size()) {
        j["reference_hpwl"] = hpwl(in.circuit.placement, in.circuit.netlist);
        j["hpwl_ratio"] = hpwl_ratio(rep.hpwl, j["reference_hpwl"].get<double>());
      }
      if (ev_map) j["rudy_map"] = rep.rudy_map.map;
      if (ev_out.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        write_text_file(ev_out, j.dump(2) + "\n");
        write_manifest(ev_out, ev, args, json::object(), {ev_out}, elapsed(t0));
      }
    } else if (*re) {
      Input in = load_input(re_netlist);
      RenderOptions ro;
      ro.size_px = re_size;
      ro.draw_edges = re_edges;
      ro.highlight_overlaps = !re_no_overlap;
      ro.title = re_title;
      if (re_traj) {
        if (re_place.empty()) throw std::runtime_error("--trajectory needs --placement (a sample output with a trajectory)");
        const json j = json::parse(read_text_file(re_place));
        if (!j.contains("trajectory")) throw std::runtime_error(re_place + ": no trajectory recorded (sample with --trajectory)");
        std::vector<Placement> frames;
        for (const auto& f : j.at("trajectory")) {
          Placement p;
          for (const auto& v : f) p.coords.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
          frames.push_back(std::move(p));
        }
        const auto labels = j.value("trajectory_labels", std::vector<std::string>{});
        write_text_file(re_out, render_filmstrip(frames, labels, in.circuit.netlist, ro));
      } else {
        write_text_file(re_out, render_svg(placement_or_reference(re_place, in.circuit), in.circuit.netlist, ro));
      }
      write_manifest(re_out, re, args, json::object(), {re_out}, elapsed(t0));
    } else if (*cv) {
      BookshelfDesign d = parse_bookshelf(cv_aux);
      if (!cv_part.empty()) d = apply_clusters(d, cv_part, cv_k);
      Circuit c = design_to_circuit(d);
      write_circuit_file(cv_out, c);
      std::vector<std::string> outputs{cv_out};
      if (!cv_bs_out.empty()) {
        fs::create_directories(cv_bs_out);
        write_bookshelf(d, cv_bs_out);
        outputs.push_back(cv_bs_out);
      }
      write_manifest(cv_out, cv, args, json::object(), outputs, elapsed(t0));
      std::cerr << d.name << ": " << c.netlist.size() << " objects, " << c.netlist.nets.size() << " nets, "
                << c.netlist.edges.size() << " edges";
      if (d.dropped_single_pin_nets) std::cerr << " (" << d.dropped_single_pin_nets << " single-pin nets dropped)";
      std::cerr << "\n";
    } else if (*st) {
      const auto guidance = st_g.get();
      const StudyAxis axis = study_axis_from_string(st_axis);
      const auto grid = study_grid(axis, params_arg(st_base), split_list(st_grid));
      const Denoiser model = load_checkpoint(st_ckpt);
      const NoiseSchedule schedule = cosine_schedule(model.config().num_timesteps);
      StudyOptions so;
      so.count = st_count;
      so.seeds = st_seeds;
      so.seed = st_seed;
      so.guidance = guidance;
      const auto rows = run_study(model, schedule, axis, grid, so);
      if (st_svg.empty()) st_svg = st_out + ".svg";
      write_text_file(st_out, study_csv(rows));
      write_text_file(st_svg, study_svg(rows));
      write_manifest(st_out, st, args, {{"master", st_seed}, {"per_seed", "derive_seed(seed, study, k)"}}, {st_out, st_svg},
                     elapsed(t0));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
