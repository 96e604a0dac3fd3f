#include "diffplace/synthgen.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "diffplace/metrics.hpp"

namespace diffplace {

std::string_view to_string(EdgeDistKind kind) {
  switch (kind) {
    case EdgeDistKind::kExponential: return "exponential";
    case EdgeDistKind::kSigmoid: return "sigmoid";
    case EdgeDistKind::kLinear: return "linear";
  }
  return "exponential";
}

EdgeDistKind edge_dist_from_string(std::string_view name) {
  if (name == "exponential") return EdgeDistKind::kExponential;
  if (name == "sigmoid") return EdgeDistKind::kSigmoid;
  if (name == "linear") return EdgeDistKind::kLinear;
  throw std::invalid_argument("unknown edge distribution '" + std::string(name) + "'");
}

double SynthParams::gamma_for(double s) const {
  return gamma_exponent == 0.0 ? gamma_coeff : gamma_coeff * std::pow(s, gamma_exponent);
}

void SynthParams::check() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("SynthParams: " + what); };
  if (!(stop_density.low > 0 && stop_density.low <= stop_density.high && stop_density.high < 1)) {
    fail("stop_density must satisfy 0 < low <= high < 1");
  }
  if (!(aspect_ratio.low > 0 && aspect_ratio.low <= aspect_ratio.high && aspect_ratio.high <= 1)) {
    fail("aspect_ratio must satisfy 0 < low <= high <= 1");
  }
  if (!(size.scale > 0 && size.min > 0 && size.min <= size.max && size.max <= 2)) {
    fail("size must satisfy scale > 0 and 0 < min <= max <= 2");
  }
  if (!(pin_min >= 1 && pin_min <= pin_max)) fail("pin range must satisfy 1 <= pin_min <= pin_max");
  if (!(scale_s.low > 0 && scale_s.low <= scale_s.high)) fail("scale_s bounds must be positive and ordered");
  if (!(p_max > 0 && p_max <= 1)) fail("p_max must lie in (0, 1]");
  if (!(gamma_coeff >= 0)) fail("gamma_coeff must be non-negative");
  if (placement_retry_limit < 1 || max_object_attempts < 1 || max_shrinks < 0) {
    fail("retry limits must be >= 1");
  }
  if (min_objects < 0 || max_objects < 0 || (max_objects > 0 && max_objects < min_objects)) {
    fail("object-count window must satisfy 0 <= min_objects <= max_objects");
  }
}

SynthParams synth_preset(std::string_view name) {
  SynthParams p;
  if (name == "v0") return p;
  if (name == "v1") {
    p.version = "v1";
    p.scale_s = {0.05, 1.6};
    p.gamma_coeff = 0.212;
    p.gamma_exponent = -1.42;
    return p;
  }
  if (name == "v2") {
    p.version = "v2";
    p.size = {0.04, 0.01, 0.5};
    p.scale_s = {0.025, 0.8};
    p.gamma_coeff = 0.00792;
    p.gamma_exponent = -1.42;
    return p;
  }
  if (name == "toy") {
    // Few, large objects for desk-scale training runs.
    p.version = "toy";
    p.size = {0.25, 0.1, 1.0};
    p.min_objects = 16;
    p.max_objects = 32;
    p.pin_max = 8;
    p.scale_s = {0.4, 0.4};
    p.gamma_coeff = 0.6;
    return p;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

nlohmann::json to_json(const SynthParams& p) {
  return {
      {"version", p.version},
      {"stop_density", {{"low", p.stop_density.low}, {"high", p.stop_density.high}}},
      {"aspect_ratio", {{"low", p.aspect_ratio.low}, {"high", p.aspect_ratio.high}}},
      {"size", {{"scale", p.size.scale}, {"min", p.size.min}, {"max", p.size.max}}},
      {"pin_powerlaw_exponent", p.pin_powerlaw_exponent},
      {"pin_min", p.pin_min},
      {"pin_max", p.pin_max},
      {"edge_dist", std::string(to_string(p.edge_dist))},
      {"scale_s", {{"low", p.scale_s.low}, {"high", p.scale_s.high}}},
      {"gamma_coeff", p.gamma_coeff},
      {"gamma_exponent", p.gamma_exponent},
      {"p_max", p.p_max},
      {"placement_retry_limit", p.placement_retry_limit},
      {"max_object_attempts", p.max_object_attempts},
      {"max_shrinks", p.max_shrinks},
      {"min_objects", p.min_objects},
      {"max_objects", p.max_objects},
  };
}

SynthParams synth_params_from_json(const nlohmann::json& j) {
  SynthParams p = synth_preset(j.value("base", std::string("v0")));
  auto range = [&](const char* key, UniformRange& r) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_number()) {
      r.low = r.high = v.get<double>();
    } else {
      r.low = v.value("low", r.low);
      r.high = v.value("high", r.high);
    }
  };
  static const char* kKnown[] = {"base", "version", "stop_density", "aspect_ratio", "size",
                                 "pin_powerlaw_exponent", "pin_min", "pin_max", "edge_dist",
                                 "scale_s", "gamma_coeff", "gamma_exponent", "gamma", "p_max",
                                 "placement_retry_limit", "max_object_attempts",
                                 "max_shrinks", "min_objects", "max_objects"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw std::invalid_argument("unknown synthesis parameter '" + key + "'");
    }
  }
  if (j.contains("version")) p.version = j.at("version").get<std::string>();
  range("stop_density", p.stop_density);
  range("aspect_ratio", p.aspect_ratio);
  range("scale_s", p.scale_s);
  if (j.contains("size")) {
    const auto& s = j.at("size");
    p.size.scale = s.value("scale", p.size.scale);
    p.size.min = s.value("min", p.size.min);
    p.size.max = s.value("max", p.size.max);
  }
  p.pin_powerlaw_exponent = j.value("pin_powerlaw_exponent", p.pin_powerlaw_exponent);
  p.pin_min = j.value("pin_min", p.pin_min);
  p.pin_max = j.value("pin_max", p.pin_max);
  if (j.contains("edge_dist")) p.edge_dist = edge_dist_from_string(j.at("edge_dist").get<std::string>());
  if (j.contains("gamma")) {
    p.gamma_coeff = j.at("gamma").get<double>();
    p.gamma_exponent = 0.0;
  }
  p.gamma_coeff = j.value("gamma_coeff", p.gamma_coeff);
  p.gamma_exponent = j.value("gamma_exponent", p.gamma_exponent);
  p.p_max = j.value("p_max", p.p_max);
  p.placement_retry_limit = j.value("placement_retry_limit", p.placement_retry_limit);
  p.max_object_attempts = j.value("max_object_attempts", p.max_object_attempts);
  p.max_shrinks = j.value("max_shrinks", p.max_shrinks);
  p.min_objects = j.value("min_objects", p.min_objects);
  p.max_objects = j.value("max_objects", p.max_objects);
  p.check();
  return p;
}

SynthParams load_synth_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open parameter file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("parameter file '" + path + "': " + e.what());
  }
  return synth_params_from_json(j);
}

double edge_probability(double l, const EdgeProbability& p) {
  double v = 0.0;
  switch (p.kind) {
    case EdgeDistKind::kExponential: v = p.gamma * std::exp(-l / p.s); break;
    case EdgeDistKind::kSigmoid: v = p.gamma / (1.0 + std::exp(-(l - p.s))); break;
    case EdgeDistKind::kLinear: v = p.gamma * std::max((p.s - l) / p.s, 0.0); break;
  }
  return std::clamp(v, 0.0, p.p_max);
}

namespace {

// Uniform bucket grid over the canvas for overlap queries.
class OccupancyGrid {
 public:
  explicit OccupancyGrid(int n) : n_(n), cells_(static_cast<std::size_t>(n * n)) {}

  template <typename Fn>
  bool any_of(const Vec2& c, const ObjectGeom& g, Fn&& pred) const {
    const auto [x0, x1, y0, y1] = span(c, g);
    for (int cy = y0; cy <= y1; ++cy) {
      for (int cx = x0; cx <= x1; ++cx) {
        for (std::size_t k : cells_[static_cast<std::size_t>(cy * n_ + cx)]) {
          if (pred(k)) return true;
        }
      }
    }
    return false;
  }

  void insert(std::size_t id, const Vec2& c, const ObjectGeom& g) {
    const auto [x0, x1, y0, y1] = span(c, g);
    for (int cy = y0; cy <= y1; ++cy) {
      for (int cx = x0; cx <= x1; ++cx) cells_[static_cast<std::size_t>(cy * n_ + cx)].push_back(id);
    }
  }

 private:
  struct Span {
    int x0, x1, y0, y1;
  };
  int cell(double v) const {
    const int k = static_cast<int>(std::floor((v + kCanvasHalf) / (2 * kCanvasHalf) * n_));
    return std::clamp(k, 0, n_ - 1);
  }
  Span span(const Vec2& c, const ObjectGeom& g) const {
    return {cell(c.x - g.width / 2), cell(c.x + g.width / 2), cell(c.y - g.height / 2),
            cell(c.y + g.height / 2)};
  }

  int n_;
  std::vector<std::vector<std::size_t>> cells_;
};

double sample_size(const SizeDistribution& d, Rng& rng) {
  std::exponential_distribution<double> exp(1.0 / d.scale);
  return std::clamp(exp(rng), d.min, d.max);
}

}  // namespace

ObjectSample sample_objects(const SynthParams& params, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](const UniformRange& r) { return r.low + (r.high - r.low) * unit(rng); };

  ObjectSample out;
  out.target_density = uniform(params.stop_density);
  const double canvas_area = 4 * kCanvasHalf * kCanvasHalf;
  const double target_area = out.target_density * canvas_area;

  OccupancyGrid grid(32);
  // Every drawn object counts toward the stop density, placed or not.
  double drawn_area = 0.0;
  int attempts = 0;
  while (drawn_area < target_area) {
    if (attempts >= params.max_object_attempts) {
      out.incomplete = true;
      break;
    }
    ++attempts;

    // The drawn length fixes the area; the aspect ratio reshapes it.
    const double length = sample_size(params.size, rng);
    const double aspect = uniform(params.aspect_ratio);
    ObjectGeom g{length / std::sqrt(aspect), length * std::sqrt(aspect)};
    if (unit(rng) < 0.5) std::swap(g.width, g.height);
    drawn_area += g.area();

    // Position retries, then optionally halve the object and retry.
    bool placed = false;
    for (int shrink = 0; !placed; ++shrink) {
      for (int r = 0; r < params.placement_retry_limit && !placed; ++r) {
        const Vec2 c{-kCanvasHalf + g.width / 2 + (2 * kCanvasHalf - g.width) * unit(rng),
                     -kCanvasHalf + g.height / 2 + (2 * kCanvasHalf - g.height) * unit(rng)};
        if (!inside_canvas(c, g)) continue;
        const bool blocked = grid.any_of(c, g, [&](std::size_t k) {
          return overlaps(c, g, out.placement.coords[k], out.objects[k]);
        });
        if (blocked) continue;
        grid.insert(out.objects.size(), c, g);
        out.objects.push_back(g);
        out.placement.coords.push_back(c);
        placed = true;
      }
      if (placed || shrink >= params.max_shrinks || std::max(g.width, g.height) / 2 < params.size.min) break;
      g.width /= 2;
      g.height /= 2;
    }
  }
  return out;
}

int sample_pin_count(double exponent, int kmin, int kmax, Rng& rng) {
  if (kmin == kmax) return kmin;
  std::vector<double> weights;
  weights.reserve(static_cast<std::size_t>(kmax - kmin + 1));
  for (int k = kmin; k <= kmax; ++k) weights.push_back(std::pow(static_cast<double>(k), -exponent));
  std::discrete_distribution<int> dist(weights.begin(), weights.end());
  return kmin + dist(rng);
}

std::vector<Pin> sample_pins(const std::vector<ObjectGeom>& objects, const SynthParams& params, Rng& rng) {
  const std::size_t n = objects.size();
  std::vector<int> counts(n);
  {
    std::vector<double> weights;
    for (int k = params.pin_min; k <= params.pin_max; ++k) {
      weights.push_back(std::pow(static_cast<double>(k), -params.pin_powerlaw_exponent));
    }
    std::discrete_distribution<int> dist(weights.begin(), weights.end());
    for (auto& c : counts) c = params.pin_min + dist(rng);
  }
  // Larger objects receive the larger draws.
  std::sort(counts.begin(), counts.end(), std::greater<>());
  std::vector<std::size_t> by_area(n);
  std::iota(by_area.begin(), by_area.end(), 0);
  std::stable_sort(by_area.begin(), by_area.end(),
                   [&](std::size_t a, std::size_t b) { return objects[a].area() > objects[b].area(); });
  std::vector<int> per_object(n);
  for (std::size_t r = 0; r < n; ++r) per_object[by_area[r]] = counts[r];

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Pin> pins;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = objects[i].width;
    const double h = objects[i].height;
    for (int k = 0; k < per_object[i]; ++k) {
      // Uniform position along the perimeter, walked counter-clockwise from
      // the bottom-left corner.
      double t = unit(rng) * 2 * (w + h);
      Vec2 off;
      if (t < w) {
        off = {-w / 2 + t, -h / 2};
      } else if ((t -= w) < h) {
        off = {w / 2, -h / 2 + t};
      } else if ((t -= h) < w) {
        off = {w / 2 - t, h / 2};
      } else {
        t -= w;
        off = {-w / 2, h / 2 - std::min(t, h)};
      }
      pins.push_back({i, off});
    }
  }
  return pins;
}

std::vector<Edge> sample_edges(const std::vector<Pin>& pins, const Placement& placement,
                               const EdgeProbability& prob, Rng& rng) {
  std::vector<Vec2> pos(pins.size());
  for (std::size_t a = 0; a < pins.size(); ++a) pos[a] = pin_position(placement, pins[a]);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < pins.size(); ++a) {
    for (std::size_t b = a + 1; b < pins.size(); ++b) {
      if (pins[a].owner == pins[b].owner) continue;
      const double l = std::abs(pos[a].x - pos[b].x) + std::abs(pos[a].y - pos[b].y);
      if (unit(rng) < edge_probability(l, prob)) {
        edges.push_back({pins[a].owner, pins[b].owner, {pins[a].offset, pins[b].offset}});
      }
    }
  }
  return edges;
}

Circuit generate_circuit(const SynthParams& params, std::uint64_t seed) {
  params.check();
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng = make_rng(attempt == 0 ? seed : derive_seed(seed, "regen", attempt));
    Circuit c;
    c.meta.seed = seed;
    c.meta.version = params.version;

    auto objs = sample_objects(params, rng);
    const std::size_t n = objs.objects.size();
    const bool below = params.min_objects > 0 && n < static_cast<std::size_t>(params.min_objects);
    const bool above = params.max_objects > 0 && n > static_cast<std::size_t>(params.max_objects);
    if ((below || above) && attempt < 1000) continue;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double s = params.scale_s.low == params.scale_s.high
                         ? params.scale_s.low
                         : std::exp(std::log(params.scale_s.low) +
                                    (std::log(params.scale_s.high) - std::log(params.scale_s.low)) * unit(rng));
    const EdgeProbability prob{params.edge_dist, s, params.gamma_for(s), params.p_max};

    c.pins = sample_pins(objs.objects, params, rng);
    c.netlist.edges = sample_edges(c.pins, objs.placement, prob, rng);
    c.netlist.objects = std::move(objs.objects);
    c.placement = std::move(objs.placement);

    double area = 0.0;
    for (const auto& g : c.netlist.objects) area += g.area();
    c.meta.scale_s = s;
    c.meta.gamma = prob.gamma;
    c.meta.target_density = objs.target_density;
    c.meta.achieved_density = area / (4 * kCanvasHalf * kCanvasHalf);
    c.meta.num_objects = c.netlist.objects.size();
    c.meta.num_pins = c.pins.size();
    c.meta.num_edges = c.netlist.edges.size();
    c.meta.incomplete = objs.incomplete;
    return c;
  }
}

nlohmann::json DatasetStats::to_json() const {
  auto summary = [](const std::vector<std::size_t>& v) {
    nlohmann::json j;
    if (v.empty()) return nlohmann::json{{"count", 0}};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (auto x : v) var += (static_cast<double>(x) - mean) * (static_cast<double>(x) - mean);
    var /= static_cast<double>(v.size());
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    return nlohmann::json{{"count", v.size()}, {"mean", mean}, {"std", std::sqrt(var)},
                          {"min", *mn}, {"max", *mx}};
  };
  nlohmann::json hist = nlohmann::json::array();
  const double bin = 4.0 / static_cast<double>(edge_length_hist.size());
  for (std::size_t b = 0; b < edge_length_hist.size(); ++b) {
    hist.push_back({{"lo", bin * static_cast<double>(b)}, {"hi", bin * static_cast<double>(b + 1)},
                    {"count", edge_length_hist[b]}});
  }
  return {{"circuits", count},
          {"incomplete", incomplete},
          {"objects", summary(object_counts)},
          {"edges", summary(edge_counts)},
          {"edge_length_histogram", hist},
          {"seconds", seconds},
          {"circuits_per_second", seconds > 0 ? static_cast<double>(count) / seconds : 0.0}};
}

DatasetStats generate_dataset(const SynthParams& params, std::size_t count, std::uint64_t seed,
                              unsigned workers, const std::function<void(std::size_t, const Circuit&)>& sink) {
  params.check();
  const auto start = std::chrono::steady_clock::now();
  DatasetStats stats;
  stats.edge_length_hist.assign(40, 0);
  workers = std::max(1u, workers);

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::size_t, Circuit> ready;
  std::size_t next_to_write = 0;
  std::atomic<std::size_t> next_index{0};
  std::exception_ptr failure;

  auto record = [&](const Circuit& c) {
    ++stats.count;
    stats.incomplete += c.meta.incomplete ? 1 : 0;
    stats.object_counts.push_back(c.meta.num_objects);
    stats.edge_counts.push_back(c.meta.num_edges);
    for (const auto& e : c.netlist.edges) {
      const Vec2 a = c.placement.coords[e.src] + e.attr.src_offset;
      const Vec2 b = c.placement.coords[e.dst] + e.attr.dst_offset;
      const double l = std::abs(a.x - b.x) + std::abs(a.y - b.y);
      const auto bin = std::min<std::size_t>(stats.edge_length_hist.size() - 1,
                                             static_cast<std::size_t>(l / 4.0 * 40));
      ++stats.edge_length_hist[bin];
    }
  };

  // Bounded reorder window keeps memory independent of count.
  const std::size_t window = 4 * static_cast<std::size_t>(workers);
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next_index.fetch_add(1);
      if (i >= count) return;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return failure || i < next_to_write + window; });
        if (failure) return;
      }
      Circuit c;
      try {
        c = generate_circuit(params, seed ^ static_cast<std::uint64_t>(i));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        cv.notify_all();
        return;
      }
      std::unique_lock lock(mu);
      ready.emplace(i, std::move(c));
      while (!failure && !ready.empty() && ready.begin()->first == next_to_write) {
        auto node = ready.extract(ready.begin());
        try {
          sink(node.key(), node.mapped());
          record(node.mapped());
        } catch (...) {
          failure = std::current_exception();
        }
        ++next_to_write;
      }
      cv.notify_all();
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

}  // namespace diffplace
