#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "latree/distance_matrix.hpp"
#include "latree/node.hpp"

namespace latree {

/// Undirected tree over observed and hidden nodes with optional edge lengths
/// (information distance units).
///
/// The builder methods mutate in place; every free function below takes the
/// tree by const reference and returns new values.
class LatentTree {
 public:
  LatentTree() = default;

  void add_node(NodeId id, std::string label = {});
  /// Adds both endpoints if they are missing.
  void add_edge(NodeId a, NodeId b, std::optional<double> length = std::nullopt);
  void remove_edge(NodeId a, NodeId b);
  /// Removes the node and all incident edges.
  void remove_node(NodeId id);
  void set_length(NodeId a, NodeId b, double length);
  void set_label(NodeId id, std::string label);

  bool has_node(NodeId id) const { return nodes_.count(id) != 0; }
  bool has_edge(NodeId a, NodeId b) const;
  NodeKind kind(NodeId id) const;
  const std::string& label(NodeId id) const;
  /// Label if set, else the id rendered as text.
  std::string display_name(NodeId id) const;
  const std::vector<NodeId>& neighbors(NodeId id) const;
  std::size_t degree(NodeId id) const { return neighbors(id).size(); }
  std::optional<double> length(NodeId a, NodeId b) const;
  bool has_all_lengths() const { return lengths_.size() == edge_count_; }

  std::vector<NodeId> nodes() const;
  std::vector<NodeId> observed() const;
  std::vector<NodeId> hidden() const;
  std::vector<Edge> edges() const;
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  std::size_t hidden_count() const;
  /// A hidden id not yet used in this tree.
  NodeId fresh_hidden_id() const;

  /// Connected and acyclic.
  bool is_tree() const;
  /// Throws InvalidTree unless is_tree().
  void validate() const;

 private:
  struct NodeData {
    std::string label;
    std::vector<NodeId> neighbors;  // kept sorted
  };
  const NodeData& data(NodeId id) const;

  std::map<NodeId, NodeData> nodes_;
  std::map<Edge, double> lengths_;
  std::size_t edge_count_ = 0;
};

/// Unique simple path from i to j as directed steps; empty when i == j.
std::vector<Step> path(const LatentTree& tree, NodeId i, NodeId j);
std::size_t hop_distance(const LatentTree& tree, NodeId i, NodeId j);
/// Sum of edge lengths along the path; throws InvalidTree if one is missing.
double path_length(const LatentTree& tree, NodeId i, NodeId j);
/// Hop counts from `source` to every node.
std::map<NodeId, std::size_t> hops_from(const LatentTree& tree, NodeId source);

/// Maximum over hidden nodes of the hop count to the nearest observed node.
std::size_t effective_depth(const LatentTree& tree);
std::size_t diameter(const LatentTree& tree);
std::size_t max_degree(const LatentTree& tree);
std::set<NodeId> leaves(const LatentTree& tree);
/// Every hidden node has at least three neighbours.
bool is_minimal(const LatentTree& tree);

/// Merges `drop` (a hidden node) into `keep`. Lengths of the re-attached edges
/// become d(drop, z) + d(keep, drop) when both are known.
LatentTree contract_edge(const LatentTree& tree, NodeId keep, NodeId drop);

/// Edge-induced bipartitions of the observed label set.
struct SplitSet {
  std::vector<NodeId> observed;           // sorted; bit order of each split
  std::vector<std::vector<bool>> splits;  // sorted multiset, canonical side has bit 0 clear
  std::size_t edge_count = 0;
};

SplitSet split_set(const LatentTree& tree);
/// Size of the symmetric difference of the two split multisets.
std::size_t robinson_foulds(const LatentTree& a, const LatentTree& b);
/// Isomorphism test fixing observed ids and freely matching hidden nodes.
bool trees_equal_up_to_hidden_relabel(const LatentTree& a, const LatentTree& b);

/// Path-sum distances between `ids` (all nodes in the tree).
DistanceMatrix path_distances(const LatentTree& tree, const std::vector<NodeId>& ids);

/// Renumbers hidden nodes to -1, -2, ... in order of first appearance in a
/// breadth-first walk from the smallest observed id.
LatentTree canonicalize_hidden(const LatentTree& tree);

}  // namespace latree
