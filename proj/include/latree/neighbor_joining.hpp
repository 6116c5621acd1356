#pragma once

#include <optional>
#include <set>

#include "latree/distance_matrix.hpp"
#include "latree/tree.hpp"

namespace latree {

struct NjOptions {
  /// Id of the first hidden node created; defaults to one below the smallest label.
  std::optional<NodeId> first_hidden;
};

/// Saitou-Nei neighbor joining. Every input label ends up a leaf of an
/// unrooted binary tree; edge lengths are the raw NJ branch lengths (possibly
/// negative). Ties in Q go to the smallest index pair in id order.
/// Throws TooFewNodes (m < 3) and InfiniteDistance.
LatentTree nj(const DistanceMatrix& D, const NjOptions& options = {});

/// nj followed by contract_short_edges(tree, epsilon_prime).
LatentTree nj_relaxed(const DistanceMatrix& D, double epsilon_prime, const NjOptions& options = {});

/// Repeatedly contracts the shortest edge with a hidden endpoint whose length
/// (negative lengths read as 0) is below `threshold`; ties go to the
/// smallest edge. The observed endpoint survives; between two hidden nodes the
/// one closer to -1 survives. Nodes in `pinned` are never merged away.
LatentTree contract_short_edges(const LatentTree& tree, double threshold, const std::set<NodeId>& pinned = {});

}  // namespace latree
