#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffplace/netlist.hpp"
#include "diffplace/synthgen.hpp"

namespace diffplace {

// Malformed input. The message names the file and, where known, the line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// original = normalized * scale + center, per axis.
struct Normalization {
  double center_x = 0.0;
  double center_y = 0.0;
  double scale = 1.0;

  Vec2 to_normalized(Vec2 p) const { return {(p.x - center_x) / scale, (p.y - center_y) / scale}; }
  Vec2 to_original(Vec2 p) const { return {p.x * scale + center_x, p.y * scale + center_y}; }
};

struct DieArea {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
};

Normalization normalization_for(const DieArea& die);

struct SclRow {
  double coordinate = 0.0;
  double height = 0.0;
  double sitewidth = 1.0;
  double sitespacing = 1.0;
  std::string siteorient = "N";
  std::string sitesymmetry = "Y";
  double subrow_origin = 0.0;
  std::size_t num_sites = 0;
};

struct BookshelfDesign {
  std::string name;
  // Objects in .nodes order; nets carry pins in normalized units; names,
  // fixed_mask (terminals) and macro_mask are populated.
  Netlist netlist;
  std::optional<Placement> placement;  // normalized centers, from .pl
  Normalization norm;
  DieArea die;  // original units
  std::vector<SclRow> rows;
  std::optional<double> row_height;  // original units, from .scl
  std::vector<bool> terminal_ni;
  // Per net, per pin: 'I', 'O' or 'B'.
  std::vector<std::string> pin_dirs;
  std::size_t dropped_single_pin_nets = 0;

  struct Header {
    std::optional<std::size_t> num_nodes, num_terminals, num_nets, num_pins;
  } header;

  double unit_scale() const { return norm.scale; }
};

// Accepts an .aux file or a directory holding exactly one .aux (or one
// .nodes/.nets pair).
BookshelfDesign parse_bookshelf(const std::string& aux_or_dir);

// Writes <dir>/<design.name>.{aux,nodes,nets,pl[,scl]} in original units.
void write_bookshelf(const BookshelfDesign& design, const std::string& dir);

// One cluster id per standard cell: either "<id>" lines in .nodes order of the
// movable standard cells, or "<name> <id>" lines. '#' starts a comment.
std::vector<std::size_t> read_partition(const std::string& path, const BookshelfDesign& design, std::size_t k);

// Movable non-macro cells collapse into square clusters of equal total area
// with one pin at the center; nets inside a single cluster are removed.
// Macros and terminals pass through unchanged and keep their order, followed
// by the non-empty clusters in id order.
BookshelfDesign apply_clusters(const BookshelfDesign& design, const std::vector<std::size_t>& cluster_of_cell,
                               std::size_t k);
BookshelfDesign apply_clusters(const BookshelfDesign& design, const std::string& partition_path, std::size_t k);

// Bookshelf .pl with lower-left corners in original units. Macros and
// terminals get /FIXED (/FIXED_NI for terminal_NI).
void write_placement(const Placement& placement, const BookshelfDesign& design, const std::string& path);

// --- JSONL datasets -------------------------------------------------------

inline constexpr const char* kDatasetFormat = "diffplace-dataset";
inline constexpr int kDatasetVersion = 1;

nlohmann::json circuit_to_json(const Circuit& c, std::size_t id);
Circuit circuit_from_json(const nlohmann::json& j);

class DatasetWriter {
 public:
  explicit DatasetWriter(const std::string& path);
  void write(const Circuit& c);
  std::size_t count() const { return count_; }
  void close();

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path);
  // False at end of file. Throws ParseError naming the zero-based record.
  bool next(Circuit& out);
  std::size_t index() const { return index_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t index_ = 0;
};

void write_dataset(const std::string& path, const std::vector<Circuit>& circuits);
std::vector<Circuit> read_dataset(const std::string& path);

// Single circuit / placement files used by the command line tool.
void write_circuit_file(const std::string& path, const Circuit& c);
Circuit read_circuit_file(const std::string& path);
void write_placement_json(const std::string& path, const Placement& p, const nlohmann::json& extra = {});
Placement read_placement_json(const std::string& path);

// --- SVG ------------------------------------------------------------------

struct RenderOptions {
  double size_px = 512.0;
  bool draw_edges = false;
  bool highlight_overlaps = true;
  std::string title;
};

std::string render_svg(const Placement& placement, const Netlist& netlist, const RenderOptions& options = {});

// Panels side by side, one per frame.
std::string render_filmstrip(const std::vector<Placement>& frames, const std::vector<std::string>& labels,
                             const Netlist& netlist, const RenderOptions& options = {});

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace diffplace
