#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffplace {

// All geometry lives on the normalized canvas [-1,1] x [-1,1].
inline constexpr double kCanvasHalf = 1.0;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

struct ObjectGeom {
  double width = 0.0;
  double height = 0.0;

  double area() const { return width * height; }
  friend bool operator==(const ObjectGeom&, const ObjectGeom&) = default;
};

struct Pin {
  std::size_t owner = 0;
  Vec2 offset;
  friend bool operator==(const Pin&, const Pin&) = default;
};

struct EdgeAttr {
  Vec2 src_offset;
  Vec2 dst_offset;
  friend bool operator==(const EdgeAttr&, const EdgeAttr&) = default;
};

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeAttr attr;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// A multi-pin net. The first pin is the driver.
struct Net {
  std::string name;
  std::vector<Pin> pins;
  friend bool operator==(const Net&, const Net&) = default;
};

struct Netlist {
  std::vector<ObjectGeom> objects;
  std::vector<Edge> edges;
  std::vector<Net> nets;
  // Empty means "no fixed objects".
  std::vector<bool> fixed_mask;
  // Optional, populated by the Bookshelf parser and required for .pl export.
  std::vector<std::string> names;
  // Optional, true for macros (render colouring); empty means all macros.
  std::vector<bool> macro_mask;

  std::size_t size() const { return objects.size(); }
  bool has_nets() const { return !nets.empty(); }
  bool is_fixed(std::size_t i) const { return !fixed_mask.empty() && fixed_mask[i]; }
  bool is_macro(std::size_t i) const { return macro_mask.empty() || macro_mask[i]; }
  std::size_t num_movable() const;
  std::vector<std::size_t> movable_indices() const;

  friend bool operator==(const Netlist&, const Netlist&) = default;
};

struct Placement {
  std::vector<Vec2> coords;

  std::size_t size() const { return coords.size(); }
  friend bool operator==(const Placement&, const Placement&) = default;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Violation {
  enum class Kind {
    kObjectSize,
    kEdgeEndpointRange,
    kSelfEdge,
    kDuplicateEdge,
    kPinOwnerRange,
    kPinOutsideObject,
    kNetTooSmall,
    kMaskLength,
    kPlacementLength,
    kNonFiniteCoord,
  };
  Kind kind;
  std::string message;
};

std::vector<Violation> validate(const Netlist& netlist, const Placement* placement = nullptr);

// True when the pin offset lies inside (or on the boundary of) its owner.
bool pin_inside_owner(const Vec2& offset, const ObjectGeom& owner);

// Expands each multi-pin net into driver->sink edges. Existing edges are
// replaced; nets are kept for wirelength evaluation.
Netlist hypergraph_to_edges(const Netlist& netlist_with_nets);

Vec2 pin_position(const Placement& placement, const Pin& pin);

}  // namespace diffplace
