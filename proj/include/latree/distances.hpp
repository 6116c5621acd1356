#pragma once

#include <Eigen/Dense>

#include "latree/distance_matrix.hpp"
#include "latree/models.hpp"

namespace latree {

/// d_ij = -log |rho_ij| from the zero-mean sample covariance. Fills `sign`.
/// With `center` the empirical column means are removed first.
DistanceMatrix estimate_gaussian(const SampleMatrix& samples, bool center = false);

/// d_ij = -(K-1) log(1 - K theta_ij), theta_ij the disagreement rate.
DistanceMatrix estimate_symmetric(const SampleMatrix& samples, int K, double smoothing = 0.0);

/// d_ij = -log |det J_ij| / sqrt(det M_i det M_j) on empirical joints.
DistanceMatrix estimate_general_discrete(const SampleMatrix& samples, int K, double smoothing = 0.0);

/// Empirical K x K joint of columns a and b, add-`smoothing` then normalized.
Eigen::MatrixXd empirical_joint(const SampleMatrix& samples, Eigen::Index a, Eigen::Index b, int K,
                                double smoothing = 0.0);

/// Dispatch on family; K is ignored for Gaussian data.
DistanceMatrix estimate_distances(const SampleMatrix& samples, Family family, int K, bool center = false,
                                  double smoothing = 0.0);

}  // namespace latree
