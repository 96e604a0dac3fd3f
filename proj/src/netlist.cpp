#include "diffplace/netlist.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

namespace diffplace {

std::size_t Netlist::num_movable() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < objects.size(); ++i) n += is_fixed(i) ? 0 : 1;
  return n;
}

std::vector<std::size_t> Netlist::movable_indices() const {
  std::vector<std::size_t> out;
  out.reserve(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (!is_fixed(i)) out.push_back(i);
  }
  return out;
}

bool pin_inside_owner(const Vec2& offset, const ObjectGeom& owner) {
  return std::abs(offset.x) <= owner.width / 2 && std::abs(offset.y) <= owner.height / 2;
}

Vec2 pin_position(const Placement& placement, const Pin& pin) {
  return placement.coords[pin.owner] + pin.offset;
}

namespace {

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

void check_pin(const Netlist& nl, const Pin& pin, const std::string& where,
               std::vector<Violation>& out) {
  if (pin.owner >= nl.objects.size()) {
    out.push_back({Violation::Kind::kPinOwnerRange,
                   cat(where, ": owner ", pin.owner, " out of range [0, ", nl.objects.size(), ")")});
    return;
  }
  if (!pin_inside_owner(pin.offset, nl.objects[pin.owner])) {
    out.push_back({Violation::Kind::kPinOutsideObject,
                   cat(where, ": offset (", pin.offset.x, ", ", pin.offset.y,
                       ") outside object ", pin.owner)});
  }
}

}  // namespace

std::vector<Violation> validate(const Netlist& nl, const Placement* placement) {
  std::vector<Violation> out;
  const std::size_t n = nl.objects.size();

  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = nl.objects[i];
    if (!(o.width > 0 && o.width <= 2) || !(o.height > 0 && o.height <= 2)) {
      out.push_back({Violation::Kind::kObjectSize,
                     cat("object ", i, ": size (", o.width, ", ", o.height, ") outside (0, 2]")});
    }
  }

  using Key = std::tuple<std::size_t, std::size_t, double, double, double, double>;
  std::set<Key> seen;
  for (std::size_t e = 0; e < nl.edges.size(); ++e) {
    const auto& edge = nl.edges[e];
    const std::string where = cat("edge ", e);
    if (edge.src >= n || edge.dst >= n) {
      out.push_back({Violation::Kind::kEdgeEndpointRange,
                     cat(where, ": endpoint (", edge.src, ", ", edge.dst, ") out of range [0, ", n, ")")});
      continue;
    }
    if (edge.src == edge.dst) {
      out.push_back({Violation::Kind::kSelfEdge, cat(where, ": self edge on object ", edge.src)});
    }
    check_pin(nl, {edge.src, edge.attr.src_offset}, where + " src", out);
    check_pin(nl, {edge.dst, edge.attr.dst_offset}, where + " dst", out);

    // Undirected identity: orient so the smaller index comes first.
    Key key = edge.src <= edge.dst
                  ? Key{edge.src, edge.dst, edge.attr.src_offset.x, edge.attr.src_offset.y,
                        edge.attr.dst_offset.x, edge.attr.dst_offset.y}
                  : Key{edge.dst, edge.src, edge.attr.dst_offset.x, edge.attr.dst_offset.y,
                        edge.attr.src_offset.x, edge.attr.src_offset.y};
    if (!seen.insert(key).second) {
      out.push_back({Violation::Kind::kDuplicateEdge, cat(where, ": duplicate of an earlier edge")});
    }
  }

  for (std::size_t k = 0; k < nl.nets.size(); ++k) {
    const auto& net = nl.nets[k];
    const std::string where = cat("net ", k, net.name.empty() ? "" : " '" + net.name + "'");
    if (net.pins.size() < 2) {
      out.push_back({Violation::Kind::kNetTooSmall, cat(where, ": fewer than 2 pins")});
    }
    for (std::size_t p = 0; p < net.pins.size(); ++p) {
      check_pin(nl, net.pins[p], cat(where, " pin ", p), out);
    }
  }

  if (!nl.fixed_mask.empty() && nl.fixed_mask.size() != n) {
    out.push_back({Violation::Kind::kMaskLength,
                   cat("fixed_mask length ", nl.fixed_mask.size(), " != object count ", n)});
  }
  if (!nl.macro_mask.empty() && nl.macro_mask.size() != n) {
    out.push_back({Violation::Kind::kMaskLength,
                   cat("macro_mask length ", nl.macro_mask.size(), " != object count ", n)});
  }

  if (placement != nullptr) {
    if (placement->coords.size() != n) {
      out.push_back({Violation::Kind::kPlacementLength,
                     cat("placement length ", placement->coords.size(), " != object count ", n)});
    }
    for (std::size_t i = 0; i < placement->coords.size(); ++i) {
      const auto& c = placement->coords[i];
      if (!std::isfinite(c.x) || !std::isfinite(c.y)) {
        out.push_back({Violation::Kind::kNonFiniteCoord, cat("placement ", i, ": non-finite coordinate")});
      }
    }
  }
  return out;
}

Netlist hypergraph_to_edges(const Netlist& input) {
  Netlist out = input;
  out.edges.clear();
  // Identical parallel edges would violate the netlist invariant; offsets that
  // differ are kept.
  std::set<std::tuple<std::size_t, std::size_t, double, double, double, double>> emitted;
  for (std::size_t k = 0; k < input.nets.size(); ++k) {
    const auto& net = input.nets[k];
    if (net.pins.size() < 2) {
      throw ValidationError(cat("net ", k, net.name.empty() ? "" : " '" + net.name + "'",
                                " has ", net.pins.size(), " pin(s); at least 2 required"));
    }
    const Pin& driver = net.pins.front();
    for (std::size_t p = 1; p < net.pins.size(); ++p) {
      const Pin& sink = net.pins[p];
      if (sink.owner == driver.owner) continue;
      const bool forward = driver.owner < sink.owner;
      const Pin& a = forward ? driver : sink;
      const Pin& b = forward ? sink : driver;
      if (!emitted.emplace(a.owner, b.owner, a.offset.x, a.offset.y, b.offset.x, b.offset.y).second) {
        continue;
      }
      out.edges.push_back({driver.owner, sink.owner, {driver.offset, sink.offset}});
    }
  }
  return out;
}

}  // namespace diffplace
