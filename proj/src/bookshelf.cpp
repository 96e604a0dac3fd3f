#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "diffplace/io.hpp"

namespace fs = std::filesystem;

namespace diffplace {

namespace {

// Whitespace tokenizer; ':' is always its own token and '#' starts a comment.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw ParseError("cannot open '" + path + "'");
  }

  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      tokens.clear();
      std::string cur;
      for (char ch : line) {
        if (ch == ':' || std::isspace(static_cast<unsigned char>(ch))) {
          if (!cur.empty()) tokens.push_back(std::move(cur));
          cur.clear();
          if (ch == ':') tokens.emplace_back(":");
        } else {
          cur += ch;
        }
      }
      if (!cur.empty()) tokens.push_back(std::move(cur));
      if (tokens.empty()) continue;
      if (!seen_banner_ && tokens[0] == "UCLA") {
        seen_banner_ = true;
        continue;
      }
      seen_banner_ = true;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path_ + ":" + std::to_string(line_no_) + ": " + msg);
  }

  double number(const std::string& tok) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size() || !std::isfinite(v)) fail("expected a number, got '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("expected a number, got '" + tok + "'");
    }
  }

  std::size_t count(const std::string& tok) const {
    const double v = number(tok);
    if (v < 0 || v != std::floor(v)) fail("expected a non-negative integer, got '" + tok + "'");
    return static_cast<std::size_t>(v);
  }

  // "<key> : <value>"
  std::size_t header_count(const std::vector<std::string>& t) const {
    if (t.size() != 3 || t[1] != ":") fail("malformed '" + t[0] + "' line");
    return count(t[2]);
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  bool seen_banner_ = false;
};

struct RawNode {
  std::string name;
  double w = 0, h = 0;
  bool terminal = false, terminal_ni = false;
};

struct RawPin {
  std::size_t node;
  char dir;
  double ox, oy;
};

struct RawNet {
  std::string name;
  std::vector<RawPin> pins;
};

std::string fmt(double v) {
  const double r = std::round(v);
  std::ostringstream os;
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v))) {
    os << static_cast<long long>(r);
  } else {
    os.precision(17);
    os << v;
  }
  return os.str();
}

struct Files {
  std::string nodes, nets, pl, scl;
  std::string name;
};

Files locate(const std::string& aux_or_dir) {
  Files f;
  fs::path p(aux_or_dir);
  if (fs::is_directory(p)) {
    std::vector<fs::path> aux, nodes, nets;
    for (const auto& e : fs::directory_iterator(p)) {
      const auto ext = e.path().extension();
      if (ext == ".aux") aux.push_back(e.path());
      if (ext == ".nodes") nodes.push_back(e.path());
      if (ext == ".nets") nets.push_back(e.path());
    }
    if (aux.size() == 1) {
      p = aux.front();
    } else if (aux.empty() && nodes.size() == 1 && nets.size() == 1) {
      f.name = nodes.front().stem().string();
      f.nodes = nodes.front().string();
      f.nets = nets.front().string();
      for (const char* ext : {".pl", ".scl"}) {
        fs::path cand = p / (f.name + ext);
        if (fs::exists(cand)) (std::string(ext) == ".pl" ? f.pl : f.scl) = cand.string();
      }
      return f;
    } else {
      throw ParseError("'" + aux_or_dir + "': expected exactly one .aux file or one .nodes/.nets pair");
    }
  }
  LineReader r(p.string());
  std::vector<std::string> t;
  if (!r.next(t)) r.fail("empty .aux file");
  if (t.size() < 3 || t[1] != ":") r.fail("expected '<kind> : <files...>'");
  f.name = p.stem().string();
  const fs::path dir = p.parent_path();
  for (std::size_t k = 2; k < t.size(); ++k) {
    const fs::path file = dir / t[k];
    const auto ext = file.extension();
    if (ext == ".nodes") f.nodes = file.string();
    else if (ext == ".nets") f.nets = file.string();
    else if (ext == ".pl") f.pl = file.string();
    else if (ext == ".scl") f.scl = file.string();
    else if (ext == ".wts" || ext == ".shapes" || ext == ".route") continue;
    else r.fail("unsupported file '" + t[k] + "'");
  }
  if (r.next(t)) r.fail("unexpected content after file list");
  if (f.nodes.empty() || f.nets.empty()) r.fail(".aux must list both a .nodes and a .nets file");
  return f;
}

}  // namespace

Normalization normalization_for(const DieArea& die) {
  const double w = die.xmax - die.xmin, h = die.ymax - die.ymin;
  if (!(w > 0) || !(h > 0)) throw ParseError("die area is empty");
  return {(die.xmin + die.xmax) / 2, (die.ymin + die.ymax) / 2, std::max(w, h) / 2};
}

BookshelfDesign parse_bookshelf(const std::string& aux_or_dir) {
  const Files files = locate(aux_or_dir);
  BookshelfDesign d;
  d.name = files.name;
  std::vector<std::string> t;

  std::vector<RawNode> nodes;
  std::unordered_map<std::string, std::size_t> index;
  {
    LineReader r(files.nodes);
    while (r.next(t)) {
      if (t[0] == "NumNodes") {
        d.header.num_nodes = r.header_count(t);
      } else if (t[0] == "NumTerminals") {
        d.header.num_terminals = r.header_count(t);
      } else if (t.size() == 3 || t.size() == 4) {
        RawNode n{t[0], r.number(t[1]), r.number(t[2])};
        if (n.w < 0 || n.h < 0) r.fail("negative size for node '" + n.name + "'");
        if (t.size() == 4) {
          if (t[3] == "terminal") n.terminal = true;
          else if (t[3] == "terminal_NI") n.terminal = n.terminal_ni = true;
          else r.fail("unrecognized node attribute '" + t[3] + "'");
        }
        if (!index.emplace(n.name, nodes.size()).second) r.fail("duplicate node '" + n.name + "'");
        nodes.push_back(std::move(n));
      } else {
        r.fail("unrecognized directive '" + t[0] + "'");
      }
    }
  }

  std::vector<RawNet> nets;
  {
    LineReader r(files.nets);
    while (r.next(t)) {
      if (t[0] == "NumNets") {
        d.header.num_nets = r.header_count(t);
      } else if (t[0] == "NumPins") {
        d.header.num_pins = r.header_count(t);
      } else if (t[0] == "NetDegree") {
        if (t.size() < 3 || t.size() > 4 || t[1] != ":") r.fail("malformed NetDegree line");
        RawNet net;
        const std::size_t degree = r.count(t[2]);
        net.name = t.size() == 4 ? t[3] : "net" + std::to_string(nets.size());
        for (std::size_t k = 0; k < degree; ++k) {
          if (!r.next(t)) r.fail("net '" + net.name + "' ends before its " + std::to_string(degree) + " pins");
          if (t.size() != 2 && t.size() != 5) r.fail("malformed pin line");
          auto it = index.find(t[0]);
          if (it == index.end()) r.fail("net '" + net.name + "' references unknown node '" + t[0] + "'");
          if (t[1] != "I" && t[1] != "O" && t[1] != "B") r.fail("pin direction must be I, O or B");
          RawPin pin{it->second, t[1][0], 0.0, 0.0};
          if (t.size() == 5) {
            if (t[2] != ":") r.fail("expected ':' before pin offsets");
            pin.ox = r.number(t[3]);
            pin.oy = r.number(t[4]);
          }
          net.pins.push_back(pin);
        }
        nets.push_back(std::move(net));
      } else {
        r.fail("unrecognized directive '" + t[0] + "'");
      }
    }
  }

  std::vector<std::optional<Vec2>> lower_left(nodes.size());
  if (!files.pl.empty()) {
    LineReader r(files.pl);
    while (r.next(t)) {
      if (t.size() < 3) r.fail("malformed placement line");
      auto it = index.find(t[0]);
      if (it == index.end()) r.fail("unknown node '" + t[0] + "'");
      lower_left[it->second] = Vec2{r.number(t[1]), r.number(t[2])};
      std::size_t k = 3;
      if (k < t.size()) {
        if (t[k] != ":" || k + 1 >= t.size()) r.fail("expected ': <orientation>'");
        k += 2;
      }
      if (k < t.size()) {
        if (t[k] != "/FIXED" && t[k] != "/FIXED_NI") r.fail("unrecognized placement attribute '" + t[k] + "'");
        ++k;
      }
      if (k != t.size()) r.fail("unexpected trailing tokens");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!lower_left[i]) throw ParseError(files.pl + ": node '" + nodes[i].name + "' has no position");
    }
  }

  if (!files.scl.empty()) {
    LineReader r(files.scl);
    std::optional<SclRow> row;
    while (r.next(t)) {
      auto value = [&]() {
        if (t.size() != 3 || t[1] != ":") r.fail("malformed '" + t[0] + "' line");
        return t[2];
      };
      if (t[0] == "NumRows" || t[0] == "Numrows") {
        r.header_count(t);
      } else if (t[0] == "CoreRow") {
        if (row) r.fail("CoreRow without End");
        row = SclRow{};
      } else if (!row) {
        r.fail("unrecognized directive '" + t[0] + "'");
      } else if (t[0] == "Coordinate") {
        row->coordinate = r.number(value());
      } else if (t[0] == "Height") {
        row->height = r.number(value());
      } else if (t[0] == "Sitewidth") {
        row->sitewidth = r.number(value());
      } else if (t[0] == "Sitespacing") {
        row->sitespacing = r.number(value());
      } else if (t[0] == "Siteorient") {
        row->siteorient = value();
      } else if (t[0] == "Sitesymmetry") {
        row->sitesymmetry = value();
      } else if (t[0] == "SubrowOrigin") {
        if (t.size() != 6 || t[1] != ":" || t[3] != "NumSites" || t[4] != ":") r.fail("malformed SubrowOrigin line");
        row->subrow_origin = r.number(t[2]);
        row->num_sites = r.count(t[5]);
      } else if (t[0] == "End") {
        d.rows.push_back(*row);
        row.reset();
      } else {
        r.fail("unrecognized directive '" + t[0] + "'");
      }
    }
    if (row) throw ParseError(files.scl + ": last CoreRow has no End");
  }

  // Die area: rows, else the placed bounding box, else a square of twice the
  // total node area centred on the origin.
  if (!d.rows.empty()) {
    d.die = {1e300, 1e300, -1e300, -1e300};
    for (const auto& row : d.rows) {
      d.die.xmin = std::min(d.die.xmin, row.subrow_origin);
      d.die.xmax = std::max(d.die.xmax, row.subrow_origin + static_cast<double>(row.num_sites) * row.sitespacing);
      d.die.ymin = std::min(d.die.ymin, row.coordinate);
      d.die.ymax = std::max(d.die.ymax, row.coordinate + row.height);
    }
    d.row_height = d.rows.front().height;
  } else if (!files.pl.empty() && !nodes.empty()) {
    d.die = {1e300, 1e300, -1e300, -1e300};
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      d.die.xmin = std::min(d.die.xmin, lower_left[i]->x);
      d.die.ymin = std::min(d.die.ymin, lower_left[i]->y);
      d.die.xmax = std::max(d.die.xmax, lower_left[i]->x + nodes[i].w);
      d.die.ymax = std::max(d.die.ymax, lower_left[i]->y + nodes[i].h);
    }
  } else {
    double area = 0;
    for (const auto& n : nodes) area += n.w * n.h;
    const double half = std::sqrt(2 * std::max(area, 1.0)) / 2;
    d.die = {-half, -half, half, half};
  }
  d.norm = normalization_for(d.die);

  std::optional<double> stdcell_height = d.row_height;
  if (!stdcell_height) {
    std::map<double, std::size_t> freq;
    for (const auto& n : nodes) {
      if (!n.terminal) ++freq[n.h];
    }
    std::size_t best = 0;
    for (const auto& [h, c] : freq) {
      if (c > best) {
        best = c;
        stdcell_height = h;
      }
    }
  }

  Netlist& nl = d.netlist;
  const double s = d.norm.scale;
  for (const auto& n : nodes) {
    nl.objects.push_back({n.w / s, n.h / s});
    nl.names.push_back(n.name);
    nl.fixed_mask.push_back(n.terminal);
    nl.macro_mask.push_back(!n.terminal && stdcell_height && n.h > *stdcell_height * (1 + 1e-9));
    d.terminal_ni.push_back(n.terminal_ni);
  }
  for (auto& raw : nets) {
    if (raw.pins.size() < 2) {
      ++d.dropped_single_pin_nets;
      continue;
    }
    // Driver first.
    auto drv = std::find_if(raw.pins.begin(), raw.pins.end(), [](const RawPin& p) { return p.dir == 'O'; });
    if (drv != raw.pins.end()) std::rotate(raw.pins.begin(), drv, drv + 1);
    Net net{raw.name, {}};
    std::string dirs;
    for (const auto& p : raw.pins) {
      net.pins.push_back({p.node, {p.ox / s, p.oy / s}});
      dirs += p.dir;
    }
    nl.nets.push_back(std::move(net));
    d.pin_dirs.push_back(std::move(dirs));
  }
  if (!files.pl.empty()) {
    Placement pl;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      pl.coords.push_back(d.norm.to_normalized({lower_left[i]->x + nodes[i].w / 2, lower_left[i]->y + nodes[i].h / 2}));
    }
    d.placement = std::move(pl);
  }
  return d;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

void write_pl(std::ostream& out, const Placement& placement, const BookshelfDesign& d) {
  const Netlist& nl = d.netlist;
  out << "UCLA pl 1.0\n\n";
  for (std::size_t i = 0; i < nl.size(); ++i) {
    const Vec2 c = d.norm.to_original(placement.coords[i]);
    const double w = nl.objects[i].width * d.norm.scale, h = nl.objects[i].height * d.norm.scale;
    out << nl.names[i] << " " << fmt(c.x - w / 2) << " " << fmt(c.y - h / 2) << " : N";
    const bool ni = i < d.terminal_ni.size() && d.terminal_ni[i];
    if (ni) out << " /FIXED_NI";
    else if (nl.is_fixed(i) || (!nl.macro_mask.empty() && nl.macro_mask[i])) out << " /FIXED";
    out << "\n";
  }
}

}  // namespace

void write_placement(const Placement& placement, const BookshelfDesign& design, const std::string& path) {
  if (design.netlist.names.size() != design.netlist.size()) {
    throw std::invalid_argument("write_placement: design has no name table");
  }
  if (placement.size() != design.netlist.size()) throw std::invalid_argument("write_placement: placement length mismatch");
  auto out = open_out(path);
  write_pl(out, placement, design);
}

void write_bookshelf(const BookshelfDesign& d, const std::string& dir) {
  const Netlist& nl = d.netlist;
  if (nl.names.size() != nl.size()) throw std::invalid_argument("write_bookshelf: design has no name table");
  fs::create_directories(dir);
  const fs::path base = fs::path(dir) / d.name;
  const double s = d.norm.scale;
  {
    auto out = open_out(base.string() + ".aux");
    out << "RowBasedPlacement : " << d.name << ".nodes " << d.name << ".nets";
    if (d.placement) out << " " << d.name << ".pl";
    if (!d.rows.empty()) out << " " << d.name << ".scl";
    out << "\n";
  }
  {
    auto out = open_out(base.string() + ".nodes");
    std::size_t terminals = 0;
    for (std::size_t i = 0; i < nl.size(); ++i) terminals += nl.is_fixed(i);
    out << "UCLA nodes 1.0\n\nNumNodes : " << nl.size() << "\nNumTerminals : " << terminals << "\n\n";
    for (std::size_t i = 0; i < nl.size(); ++i) {
      out << nl.names[i] << " " << fmt(nl.objects[i].width * s) << " " << fmt(nl.objects[i].height * s);
      if (nl.is_fixed(i)) out << (i < d.terminal_ni.size() && d.terminal_ni[i] ? " terminal_NI" : " terminal");
      out << "\n";
    }
  }
  {
    auto out = open_out(base.string() + ".nets");
    std::size_t pins = 0;
    for (const auto& n : nl.nets) pins += n.pins.size();
    out << "UCLA nets 1.0\n\nNumNets : " << nl.nets.size() << "\nNumPins : " << pins << "\n\n";
    for (std::size_t k = 0; k < nl.nets.size(); ++k) {
      const Net& n = nl.nets[k];
      out << "NetDegree : " << n.pins.size() << " " << n.name << "\n";
      for (std::size_t p = 0; p < n.pins.size(); ++p) {
        const char dir = k < d.pin_dirs.size() && p < d.pin_dirs[k].size() ? d.pin_dirs[k][p] : 'B';
        out << "  " << nl.names[n.pins[p].owner] << " " << dir << " : " << fmt(n.pins[p].offset.x * s) << " "
            << fmt(n.pins[p].offset.y * s) << "\n";
      }
    }
  }
  if (d.placement) {
    auto out = open_out(base.string() + ".pl");
    write_pl(out, *d.placement, d);
  }
  if (!d.rows.empty()) {
    auto out = open_out(base.string() + ".scl");
    out << "UCLA scl 1.0\n\nNumRows : " << d.rows.size() << "\n\n";
    for (const auto& r : d.rows) {
      out << "CoreRow Horizontal\n  Coordinate : " << fmt(r.coordinate) << "\n  Height : " << fmt(r.height)
          << "\n  Sitewidth : " << fmt(r.sitewidth) << "\n  Sitespacing : " << fmt(r.sitespacing)
          << "\n  Siteorient : " << r.siteorient << "\n  Sitesymmetry : " << r.sitesymmetry
          << "\n  SubrowOrigin : " << fmt(r.subrow_origin) << " NumSites : " << r.num_sites << "\nEnd\n";
    }
  }
}

namespace {

bool is_standard_cell(const Netlist& nl, std::size_t i) {
  return !nl.is_fixed(i) && !(!nl.macro_mask.empty() && nl.macro_mask[i]);
}

}  // namespace

std::vector<std::size_t> read_partition(const std::string& path, const BookshelfDesign& design, std::size_t k) {
  const Netlist& nl = design.netlist;
  std::vector<std::size_t> cells;
  std::unordered_map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < nl.size(); ++i) {
    if (!is_standard_cell(nl, i)) continue;
    if (i < nl.names.size()) rank.emplace(nl.names[i], cells.size());
    cells.push_back(i);
  }
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> out(cells.size(), kUnset);
  LineReader r(path);
  std::vector<std::string> t;
  std::size_t positional = 0;
  int style = 0;  // 1 positional, 2 named
  while (r.next(t)) {
    const int this_style = t.size() == 1 ? 1 : t.size() == 2 ? 2 : 0;
    if (this_style == 0) r.fail("expected '<cluster>' or '<cell> <cluster>'");
    if (style != 0 && style != this_style) r.fail("mixes positional and named lines");
    style = this_style;
    const std::size_t id = r.count(t.back());
    if (id >= k) r.fail("cluster id " + std::to_string(id) + " is not below " + std::to_string(k));
    std::size_t slot;
    if (style == 1) {
      if (positional >= cells.size()) r.fail("more lines than standard cells (" + std::to_string(cells.size()) + ")");
      slot = positional++;
    } else {
      auto it = rank.find(t[0]);
      if (it == rank.end()) r.fail("'" + t[0] + "' is not a movable standard cell");
      slot = it->second;
    }
    out[slot] = id;
  }
  for (std::size_t s = 0; s < out.size(); ++s) {
    if (out[s] == kUnset) {
      const std::size_t i = cells[s];
      throw ParseError(path + ": standard cell '" + (i < nl.names.size() ? nl.names[i] : std::to_string(i)) +
                       "' has no cluster");
    }
  }
  return out;
}

BookshelfDesign apply_clusters(const BookshelfDesign& design, const std::string& partition_path, std::size_t k) {
  return apply_clusters(design, read_partition(partition_path, design, k), k);
}

BookshelfDesign apply_clusters(const BookshelfDesign& design, const std::vector<std::size_t>& cluster_of_cell,
                               std::size_t k) {
  const Netlist& nl = design.netlist;
  BookshelfDesign out;
  out.name = design.name;
  out.norm = design.norm;
  out.die = design.die;
  out.rows = design.rows;
  out.row_height = design.row_height;

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> cluster(nl.size(), kNone);
  std::size_t cell_rank = 0;
  for (std::size_t i = 0; i < nl.size(); ++i) {
    if (!is_standard_cell(nl, i)) continue;
    if (cell_rank >= cluster_of_cell.size()) {
      throw std::invalid_argument("apply_clusters: cell '" + (i < nl.names.size() ? nl.names[i] : std::to_string(i)) +
                                  "' is unassigned");
    }
    cluster[i] = cluster_of_cell[cell_rank++];
    if (cluster[i] >= k) throw std::invalid_argument("apply_clusters: cluster id out of range");
  }
  if (cell_rank != cluster_of_cell.size()) throw std::invalid_argument("apply_clusters: more assignments than cells");

  std::vector<std::size_t> new_index(nl.size(), kNone);
  Netlist& cn = out.netlist;
  const bool has_names = nl.names.size() == nl.size();
  for (std::size_t i = 0; i < nl.size(); ++i) {
    if (cluster[i] != kNone) continue;
    new_index[i] = cn.size();
    cn.objects.push_back(nl.objects[i]);
    cn.names.push_back(has_names ? nl.names[i] : "o" + std::to_string(i));
    cn.fixed_mask.push_back(nl.is_fixed(i));
    cn.macro_mask.push_back(!nl.is_fixed(i));
    out.terminal_ni.push_back(i < design.terminal_ni.size() && design.terminal_ni[i]);
  }
  std::vector<double> area(k, 0.0), wx(k, 0.0), wy(k, 0.0);
  for (std::size_t i = 0; i < nl.size(); ++i) {
    if (cluster[i] == kNone) continue;
    const double a = nl.objects[i].area();
    area[cluster[i]] += a;
    if (design.placement) {
      wx[cluster[i]] += a * design.placement->coords[i].x;
      wy[cluster[i]] += a * design.placement->coords[i].y;
    }
  }
  std::vector<std::size_t> cluster_index(k, kNone);
  for (std::size_t c = 0; c < k; ++c) {
    if (area[c] <= 0) continue;
    cluster_index[c] = cn.size();
    const double side = std::sqrt(area[c]);
    cn.objects.push_back({side, side});
    cn.names.push_back("cluster" + std::to_string(c));
    cn.fixed_mask.push_back(false);
    cn.macro_mask.push_back(false);
    out.terminal_ni.push_back(false);
  }
  for (std::size_t i = 0; i < nl.size(); ++i) {
    if (cluster[i] != kNone) new_index[i] = cluster_index[cluster[i]];
  }
  if (design.placement) {
    Placement p;
    p.coords.resize(cn.size());
    for (std::size_t i = 0; i < nl.size(); ++i) {
      if (cluster[i] == kNone) p.coords[new_index[i]] = design.placement->coords[i];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (cluster_index[c] != kNone) p.coords[cluster_index[c]] = {wx[c] / area[c], wy[c] / area[c]};
    }
    out.placement = std::move(p);
  }

  for (std::size_t n = 0; n < nl.nets.size(); ++n) {
    const Net& net = nl.nets[n];
    Net rewired{net.name, {}};
    std::string dirs;
    std::vector<std::size_t> seen_clusters;
    std::vector<std::size_t> owners;
    for (std::size_t p = 0; p < net.pins.size(); ++p) {
      const Pin& pin = net.pins[p];
      const std::size_t owner = new_index[pin.owner];
      Vec2 offset = pin.offset;
      if (cluster[pin.owner] != kNone) {
        if (std::find(seen_clusters.begin(), seen_clusters.end(), owner) != seen_clusters.end()) continue;
        seen_clusters.push_back(owner);
        offset = {};
      }
      rewired.pins.push_back({owner, offset});
      dirs += n < design.pin_dirs.size() && p < design.pin_dirs[n].size() ? design.pin_dirs[n][p] : 'B';
      if (std::find(owners.begin(), owners.end(), owner) == owners.end()) owners.push_back(owner);
    }
    if (owners.size() < 2) continue;
    cn.nets.push_back(std::move(rewired));
    out.pin_dirs.push_back(std::move(dirs));
  }
  std::size_t terminals = 0, pins = 0;
  for (std::size_t i = 0; i < cn.size(); ++i) terminals += cn.is_fixed(i);
  for (const auto& n : cn.nets) pins += n.pins.size();
  out.header = {cn.size(), terminals, cn.nets.size(), pins};
  return out;
}

}  // namespace diffplace
