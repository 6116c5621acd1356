#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "latree/distance_matrix.hpp"
#include "latree/models.hpp"
#include "latree/recursive_grouping.hpp"
#include "latree/tree.hpp"

namespace latree {

/// Kruskal minimum spanning tree over the labels of D; edge lengths are the
/// distances. Equal weights are broken by (smaller id, larger id).
/// Throws Disconnected when +inf entries leave a node unreachable.
LatentTree mst_observed(const DistanceMatrix& D);

struct SurrogateMap {
  std::map<NodeId, NodeId> surrogate;          // every node -> nearest observed node
  std::map<NodeId, std::set<NodeId>> inverse;  // observed node -> nodes it stands for
};

/// Sg(i) = argmin over observed j of d_ij, ties to the smallest id. `D` must
/// cover every node of `tree`.
SurrogateMap surrogate_map(const LatentTree& tree, const DistanceMatrix& D);
SurrogateMap surrogate_map(const TreeModel& model);

/// Every internal node i of the MST gets a new hidden parent adjacent to i
/// and to i's neighbours. Structure only: the result has no edge lengths.
LatentTree cl_blind(const LatentTree& mst);

enum class Subroutine { RG, NJ };
enum class Mode { Exact, Relaxed };

struct ClgOptions {
  Subroutine sub = Subroutine::RG;
  Mode mode = Mode::Exact;
  RelaxationConfig config;
  /// Internal MST nodes to visit, in order. Default: decreasing MST degree,
  /// then increasing id.
  std::optional<std::vector<NodeId>> visit_order;
};

struct SpliceStep {
  NodeId center = 0;
  std::vector<NodeId> neighborhood;  // nbd[center; T] at the time of the visit
  std::vector<NodeId> introduced;    // hidden nodes added by this splice
};

struct ClgResult {
  LatentTree tree;
  LatentTree mst;
  std::vector<SpliceStep> trace;
};

ClgResult clgrouping_detailed(const DistanceMatrix& D, const ClgOptions& options);
LatentTree clgrouping(const DistanceMatrix& D, const ClgOptions& options);

/// Threshold used to remove the zero-length edges exact NJ produces.
constexpr double kExactContraction = 1e-7;

}  // namespace latree
