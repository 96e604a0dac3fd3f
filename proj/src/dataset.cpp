#include <fstream>
#include <sstream>

#include "diffplace/io.hpp"

namespace diffplace {

namespace {

using nlohmann::json;

json vec(Vec2 v) { return json::array({v.x, v.y}); }

Vec2 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json meta_to_json(const CircuitMeta& m) {
  return {{"scale_s", m.scale_s},
          {"gamma", m.gamma},
          {"target_density", m.target_density},
          {"achieved_density", m.achieved_density},
          {"seed", m.seed},
          {"version", m.version},
          {"incomplete", m.incomplete},
          {"unit_scale", m.unit_scale}};
}

CircuitMeta meta_from_json(const json& j) {
  CircuitMeta m;
  m.scale_s = j.value("scale_s", 0.0);
  m.gamma = j.value("gamma", 0.0);
  m.target_density = j.value("target_density", 0.0);
  m.achieved_density = j.value("achieved_density", 0.0);
  m.seed = j.value("seed", std::uint64_t{0});
  m.version = j.value("version", std::string());
  m.incomplete = j.value("incomplete", false);
  m.unit_scale = j.value("unit_scale", 1.0);
  return m;
}

}  // namespace

json circuit_to_json(const Circuit& c, std::size_t id) {
  const Netlist& nl = c.netlist;
  json objects = json::array(), pins = json::array(), edges = json::array(), coords = json::array();
  for (const auto& o : nl.objects) objects.push_back({o.width, o.height});
  for (const auto& p : c.pins) pins.push_back({p.owner, p.offset.x, p.offset.y});
  for (const auto& e : nl.edges) {
    edges.push_back({e.src, e.dst, e.attr.src_offset.x, e.attr.src_offset.y, e.attr.dst_offset.x, e.attr.dst_offset.y});
  }
  for (const auto& v : c.placement.coords) coords.push_back(vec(v));
  json j = {{"id", id}, {"objects", objects}, {"pins", pins}, {"edges", edges}, {"placement", coords}};
  if (!nl.nets.empty()) {
    json nets = json::array();
    for (const auto& n : nl.nets) {
      json np = json::array();
      for (const auto& p : n.pins) np.push_back({p.owner, p.offset.x, p.offset.y});
      nets.push_back({{"name", n.name}, {"pins", np}});
    }
    j["nets"] = nets;
  }
  if (!nl.fixed_mask.empty()) j["fixed"] = nl.fixed_mask;
  if (!nl.macro_mask.empty()) j["macro"] = nl.macro_mask;
  if (!nl.names.empty()) j["names"] = nl.names;
  j["meta"] = meta_to_json(c.meta);
  return j;
}

Circuit circuit_from_json(const json& j) {
  Circuit c;
  Netlist& nl = c.netlist;
  for (const auto& o : j.at("objects")) nl.objects.push_back({o.at(0).get<double>(), o.at(1).get<double>()});
  for (const auto& p : j.value("pins", json::array())) {
    c.pins.push_back({p.at(0).get<std::size_t>(), {p.at(1).get<double>(), p.at(2).get<double>()}});
  }
  for (const auto& e : j.value("edges", json::array())) {
    if (e.size() != 6) throw std::invalid_argument("edge entries have six fields");
    nl.edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(),
                        {{e[2].get<double>(), e[3].get<double>()}, {e[4].get<double>(), e[5].get<double>()}}});
  }
  for (const auto& n : j.value("nets", json::array())) {
    Net net{n.value("name", std::string()), {}};
    for (const auto& p : n.at("pins")) {
      net.pins.push_back({p.at(0).get<std::size_t>(), {p.at(1).get<double>(), p.at(2).get<double>()}});
    }
    nl.nets.push_back(std::move(net));
  }
  if (j.contains("fixed")) nl.fixed_mask = j["fixed"].get<std::vector<bool>>();
  if (j.contains("macro")) nl.macro_mask = j["macro"].get<std::vector<bool>>();
  if (j.contains("names")) nl.names = j["names"].get<std::vector<std::string>>();
  for (const auto& v : j.value("placement", json::array())) c.placement.coords.push_back(vec_from(v));
  c.meta = meta_from_json(j.value("meta", json::object()));
  c.meta.num_objects = nl.size();
  c.meta.num_pins = c.pins.size();
  c.meta.num_edges = nl.edges.size();
  return c;
}

DatasetWriter::DatasetWriter(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot write dataset '" + path + "'");
  out_ << json{{"format", kDatasetFormat}, {"version", kDatasetVersion}}.dump() << "\n";
}

void DatasetWriter::write(const Circuit& c) {
  out_ << circuit_to_json(c, count_).dump() << "\n";
  if (!out_) throw std::runtime_error("error writing dataset '" + path_ + "'");
  ++count_;
}

void DatasetWriter::close() {
  out_.flush();
  out_.close();
}

DatasetReader::DatasetReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw ParseError("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in_, line)) throw ParseError(path + ": missing dataset header");
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(path + ": malformed dataset header: " + e.what());
  }
  if (!h.is_object() || h.value("format", "") != kDatasetFormat) throw ParseError(path + ": not a dataset file");
  if (h.value("version", -1) != kDatasetVersion) {
    throw ParseError(path + ": dataset version " + h.value("version", json(nullptr)).dump() + " is not supported (expected " +
                     std::to_string(kDatasetVersion) + ")");
  }
}

bool DatasetReader::next(Circuit& out) {
  std::string line;
  if (!std::getline(in_, line)) return false;
  const bool terminated = !in_.eof();
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError(path_ + ": record " + std::to_string(index_) + " (line " + std::to_string(index_ + 2) + "): " + why);
  };
  if (line.empty() && !terminated) return false;
  if (!terminated) throw fail("truncated final line");
  try {
    out = circuit_from_json(json::parse(line));
  } catch (const std::exception& e) {
    throw fail(e.what());
  }
  ++index_;
  return true;
}

void write_dataset(const std::string& path, const std::vector<Circuit>& circuits) {
  DatasetWriter w(path);
  for (const auto& c : circuits) w.write(c);
  w.close();
}

std::vector<Circuit> read_dataset(const std::string& path) {
  DatasetReader r(path);
  std::vector<Circuit> out;
  Circuit c;
  while (r.next(c)) out.push_back(std::move(c));
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("error writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_circuit_file(const std::string& path, const Circuit& c) {
  json j = circuit_to_json(c, 0);
  j["format"] = "diffplace-circuit";
  j["version"] = kDatasetVersion;
  write_text_file(path, j.dump(1) + "\n");
}

Circuit read_circuit_file(const std::string& path) {
  const std::string text = read_text_file(path);
  // A dataset file is accepted too; its first record is used.
  const json first = json::parse(text.substr(0, text.find('\n')), nullptr, false);
  if (first.is_object() && first.value("format", "") == kDatasetFormat) {
    DatasetReader r(path);
    Circuit c;
    if (!r.next(c)) throw ParseError(path + ": dataset has no records");
    return c;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.value("format", "") != "diffplace-circuit") throw ParseError(path + ": not a circuit file");
  try {
    return circuit_from_json(j);
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_placement_json(const std::string& path, const Placement& p, const json& extra) {
  json coords = json::array();
  for (const auto& v : p.coords) coords.push_back(vec(v));
  json j = {{"format", "diffplace-placement"}, {"version", 1}, {"coords", coords}};
  if (extra.is_object()) {
    for (const auto& [k, v] : extra.items()) j[k] = v;
  }
  write_text_file(path, j.dump(1) + "\n");
}

Placement read_placement_json(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.value("format", "") != "diffplace-placement") throw ParseError(path + ": not a placement file");
  Placement p;
  for (const auto& v : j.at("coords")) p.coords.push_back(vec_from(v));
  return p;
}

}  // namespace diffplace
