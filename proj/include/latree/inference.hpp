#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "latree/models.hpp"

namespace latree {

/// Unique rows of a discrete sample matrix with their multiplicities.
struct PatternSet {
  std::vector<NodeId> columns;
  Eigen::MatrixXi patterns;
  Eigen::VectorXd weights;
};

PatternSet compress(const SampleMatrix& samples);

/// Exact node and edge posteriors for one observed configuration. Edge
/// posteriors are keyed by (parent, child) in the model's rooting and indexed
/// [parent state, child state].
struct Posteriors {
  double log_likelihood = 0.0;
  std::map<NodeId, Eigen::VectorXd> node;
  std::map<Step, Eigen::MatrixXd> edge;
};

/// Sum-product on a rooted discrete tree. Nodes listed in `columns` are
/// clamped to the given values, every other node is summed out.
Posteriors posteriors(const GeneralDiscreteTreeModel& model, const std::vector<NodeId>& columns,
                      const Eigen::VectorXi& values);
double log_probability(const GeneralDiscreteTreeModel& model, const std::vector<NodeId>& columns,
                       const Eigen::VectorXi& values);

/// Sum over samples of log p(x_V); -inf when a discrete sample has zero probability.
double loglikelihood(const TreeModel& model, const SampleMatrix& samples);

struct EmOptions {
  int K = 2;
  std::uint64_t seed = 0;
  int max_iters = 200;
  /// Stop once the per-sample log-likelihood gain drops below this.
  double tol = 1e-6;
  /// Pseudo-count added to every cell in the M-step.
  double smoothing = 1e-3;
};

struct EmResult {
  GeneralDiscreteTreeModel model;
  /// Log-likelihood of the parameters at each iteration, starting with the
  /// initialization; the last entry belongs to `model`.
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
};

/// Random diagonal-heavy initialization rooted at the lowest id.
GeneralDiscreteTreeModel em_initial_model(const LatentTree& structure, int K, std::uint64_t seed);
/// Sample columns are clamped; every other node of the structure is latent.
EmResult em_fit(const LatentTree& structure, const SampleMatrix& samples, const EmOptions& options);
EmResult em_fit(const GeneralDiscreteTreeModel& init, const SampleMatrix& samples, const EmOptions& options);

struct BicReport {
  double loglik = 0.0;
  std::size_t kappa = 0;
  std::size_t n = 0;
  double bic = 0.0;
};

/// Free parameters: |E| for Gaussian and symmetric, (K-1) + |E| K (K-1) for general discrete.
std::size_t parameter_count(const TreeModel& model);
BicReport bic(const TreeModel& model, const SampleMatrix& samples);
BicReport make_bic_report(double loglik, std::size_t kappa, std::size_t n);

/// Draws every non-column node from p(x_H | x_V) for each sample. Output
/// columns are the input columns followed by the remaining nodes in id order.
SampleMatrix posterior_sample_hidden(const TreeModel& model, const SampleMatrix& samples, std::uint64_t seed);

}  // namespace latree
