#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "latree/distance_matrix.hpp"
#include "latree/tree.hpp"

namespace latree {

enum class RelationKind { ParentChild, Siblings, Inconclusive };

struct PairRelation {
  RelationKind kind = RelationKind::Inconclusive;
  NodeId parent = 0;  // meaningful for ParentChild only
  NodeId child = 0;
};

struct Relationships {
  /// Keyed by (smaller id, larger id).
  std::map<std::pair<NodeId, NodeId>, PairRelation> pairs;
  /// Coarsest partition whose blocks are joined by Case-1/Case-2 pairs.
  /// Blocks and members are sorted by id.
  std::vector<std::vector<NodeId>> partition;

  const PairRelation& relation(NodeId a, NodeId b) const;
};

/// Classifies every pair of `Y` from Phi_ijk = d_ik - d_jk over k in Y \ {i,j}.
/// Equalities are tested to within `tol`. Throws NeedThreeNodes.
Relationships test_node_relationships(const DistanceMatrix& D, const std::vector<NodeId>& Y, double tol = 1e-9);

/// Default distance gate tau0 (1 + log10(n) / 4), tau0 = -log 0.15.
double default_tau(std::size_t n);
inline const double kDefaultEpsilonPrime = -std::log(0.9);

struct RelaxationConfig {
  double tau = kInfinity;
  /// Fixed sibling threshold; empty selects families by k-means on Lambda.
  std::optional<double> epsilon;
  double epsilon_prime = kDefaultEpsilonPrime;
  /// With k-means: all Lambda below this means one family. Also the
  /// observed-parent tolerance when no fixed epsilon is given.
  double cluster_floor = 0.2;
  std::uint64_t seed = 0;
};

struct SiblingStatistic {
  bool empty = true;  // no admissible witness
  double lambda = 0.0;
  std::vector<NodeId> witnesses;
};

/// Lambda_ij = max - min of Phi_ijk over K_ij = {k in pool : max(d_ik, d_jk) < tau}.
/// `pool` defaults to every label of D.
SiblingStatistic sibling_statistic(const DistanceMatrix& D, NodeId i, NodeId j, const RelaxationConfig& config,
                                   const std::vector<NodeId>* pool = nullptr);

/// k-medoids on the dissimilarity `lambda` with k picked by average
/// silhouette over 2..count-2; single block when every entry is below
/// `floor` or count <= 3. Returns index blocks, each sorted, ordered by
/// their smallest member.
std::vector<std::vector<int>> cluster_families(const Eigen::MatrixXd& lambda, double floor, std::uint64_t seed);

struct RgOptions {
  /// Id of the first hidden node created; defaults to one below the
  /// smallest label (and below -1).
  std::optional<NodeId> first_hidden;
};

struct RgResult {
  LatentTree tree;
  /// Path-sum distances among all nodes of `tree`, hidden ones included.
  DistanceMatrix distances;
  std::size_t iterations = 0;
};

/// Throws NotAdditive when D is not a tree metric (no progress, or the
/// output's path sums miss D by more than 1e-9 relative).
RgResult rg_exact_detailed(const DistanceMatrix& D, const RgOptions& options = {});
LatentTree rg_exact(const DistanceMatrix& D, const RgOptions& options = {});

RgResult rg_relaxed_detailed(const DistanceMatrix& D, const RelaxationConfig& config, const RgOptions& options = {});
LatentTree rg_relaxed(const DistanceMatrix& D, const RelaxationConfig& config, const RgOptions& options = {});

}  // namespace latree
