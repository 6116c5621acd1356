#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "latree/node.hpp"

namespace latree {

enum class DistanceSource { Exact, Estimated };

/// Symmetric matrix of information distances over a labelled node set.
///
/// Entries live in [0, +inf]; +inf is a legitimate value produced by the
/// estimators when a pair looks independent. `sign` carries the sign of the
/// underlying correlation when the family has one (Gaussian).
struct DistanceMatrix {
  std::vector<NodeId> labels;
  Eigen::MatrixXd d;
  std::optional<Eigen::MatrixXd> sign;
  DistanceSource source = DistanceSource::Exact;
  std::size_t sample_count = 0;
  /// Optional display names parallel to `labels` (CSV headers, tickers...).
  std::vector<std::string> names;

  DistanceMatrix() = default;
  explicit DistanceMatrix(std::vector<NodeId> ids);

  Eigen::Index size() const { return static_cast<Eigen::Index>(labels.size()); }
  bool contains(NodeId id) const;
  /// Position of `id` in `labels`; throws UnknownNode.
  Eigen::Index index_of(NodeId id) const;
  double operator()(NodeId a, NodeId b) const;
  void set(NodeId a, NodeId b, double value);
  double sign_of(NodeId a, NodeId b) const;

  /// Restriction to `ids` (in the given order).
  DistanceMatrix subset(const std::vector<NodeId>& ids) const;
  double max_finite() const;
  bool all_finite() const;
};

constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace latree
