#pragma once

#include <compare>
#include <utility>

namespace latree {

/// Node identifier. Observed nodes use non-negative ids, hidden nodes use
/// negative ids, so observed ids survive every transformation untouched.
using NodeId = int;

enum class NodeKind { Observed, Hidden };

constexpr bool is_hidden(NodeId id) { return id < 0; }
constexpr bool is_observed(NodeId id) { return id >= 0; }
constexpr NodeKind kind_of(NodeId id) { return id < 0 ? NodeKind::Hidden : NodeKind::Observed; }

/// Undirected edge with normalized endpoint order (u < v).
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  Edge() = default;
  Edge(NodeId a, NodeId b) : u(a < b ? a : b), v(a < b ? b : a) {}

  bool touches(NodeId x) const { return u == x || v == x; }
  NodeId other(NodeId x) const { return x == u ? v : u; }

  auto operator<=>(const Edge&) const = default;
};

/// Directed step along a path.
using Step = std::pair<NodeId, NodeId>;

}  // namespace latree
