#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "latree/distance_matrix.hpp"
#include "latree/tree.hpp"

namespace latree {

enum class Family { Gaussian, Symmetric, Discrete };

const char* to_string(Family family);
Family family_from_string(const std::string& name);

/// Zero-mean, unit-variance Gaussian tree; one correlation per edge.
struct GaussianTreeModel {
  LatentTree tree;
  std::map<Edge, double> rho;
};

/// Symmetric K-ary channel on every edge with uniform marginals.
struct SymmetricDiscreteTreeModel {
  LatentTree tree;
  int K = 2;
  std::map<Edge, double> theta;
};

/// Rooted discrete tree: root marginal plus one row-stochastic conditional
/// per edge directed away from the root (rows index the parent state).
struct GeneralDiscreteTreeModel {
  LatentTree tree;
  int K = 2;
  NodeId root = 0;
  Eigen::VectorXd root_marginal;
  std::map<Step, Eigen::MatrixXd> conditional;
};

using TreeModel = std::variant<GaussianTreeModel, SymmetricDiscreteTreeModel, GeneralDiscreteTreeModel>;

const LatentTree& tree_of(const TreeModel& model);
Family family_of(const TreeModel& model);
/// Alphabet size, 0 for Gaussian.
int alphabet_of(const TreeModel& model);

/// n x m matrix of samples; column k holds node `columns[k]`.
/// `alphabet` is 0 for real-valued data, else K with entries in 0..K-1.
struct SampleMatrix {
  std::vector<NodeId> columns;
  std::vector<std::string> names;
  Eigen::MatrixXd data;
  int alphabet = 0;

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index m() const { return data.cols(); }
  Eigen::Index column_index(NodeId id) const;
  bool has_column(NodeId id) const;
  /// Throws AlphabetViolation when a discrete entry is out of range or fractional.
  void validate() const;
  /// Restriction to the given columns, in the given order.
  SampleMatrix select(const std::vector<NodeId>& ids) const;
};

// Per-edge parameter <-> distance conversions.
double symmetric_distance(double theta, int K);
double theta_from_distance(double d, int K);

/// Information distance carried by one edge of the model.
double edge_distance(const TreeModel& model, const Edge& e);
/// Throws DegenerateParameter if an edge is independent or perfectly dependent.
void validate_parameters(const TreeModel& model);

/// Path-sum information distances among `nodes`; Gaussian models also fill the
/// sign matrix with the sign of the path correlation.
DistanceMatrix exact_distance_matrix(const TreeModel& model, const std::vector<NodeId>& nodes);
DistanceMatrix exact_distance_matrix(const TreeModel& model);  // observed nodes

/// i.i.d. ancestral samples. Columns are the observed nodes in id order,
/// followed by hidden nodes when `include_hidden` is set.
SampleMatrix sample(const TreeModel& model, std::size_t n, std::uint64_t seed, bool include_hidden = false);

/// Covariance among `ids`: product of edge correlations along each path.
Eigen::MatrixXd covariance(const GaussianTreeModel& model, const std::vector<NodeId>& ids);
Eigen::MatrixXd observed_covariance(const GaussianTreeModel& model);

/// D(p_V || q_V) over the observed nodes (exact enumeration for discrete).
double kl_observed(const TreeModel& p, const TreeModel& q);
constexpr int kMaxExactObserved = 14;

// Discrete helpers.
GeneralDiscreteTreeModel to_general(const SymmetricDiscreteTreeModel& model);
GeneralDiscreteTreeModel to_general(const TreeModel& model);  // discrete families only
std::map<NodeId, Eigen::VectorXd> node_marginals(const GeneralDiscreteTreeModel& model);
/// Same joint distribution, different root.
GeneralDiscreteTreeModel reroot(const GeneralDiscreteTreeModel& model, NodeId new_root);
/// J(a, b) = p(x_i = a, x_j = b).
Eigen::MatrixXd pairwise_joint(const GeneralDiscreteTreeModel& model, NodeId i, NodeId j);
/// Undirected edge joints, indexed [state of e.u, state of e.v].
std::map<Edge, Eigen::MatrixXd> edge_joints(const GeneralDiscreteTreeModel& model);
/// Rooted model assembled from per-edge joints; each conditional is the
/// row-normalized joint, the root marginal the row sum of one incident joint.
GeneralDiscreteTreeModel general_from_joints(const LatentTree& tree, int K, NodeId root,
                                             const std::map<Edge, Eigen::MatrixXd>& joints);
double mutual_information(const Eigen::MatrixXd& joint);
/// -log |det J| / sqrt(det M_i det M_j); +inf when degenerate.
double discrete_distance(const Eigen::MatrixXd& joint);

/// Gaussian model whose edge correlations are exp(-length). Edge signs are
/// chosen so that path products reproduce `sign` between observed nodes.
GaussianTreeModel gaussian_from_lengths(const LatentTree& tree, const DistanceMatrix* sign = nullptr);
SymmetricDiscreteTreeModel symmetric_from_lengths(const LatentTree& tree, int K);
/// Shortest edge length used when turning learned lengths into parameters.
constexpr double kMinEdgeLength = 1e-4;

}  // namespace latree
