#include "latree/distance_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latree/error.hpp"

namespace latree {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::NoSuchEdge: return "NoSuchEdge";
    case ErrorKind::InvalidTree: return "InvalidTree";
    case ErrorKind::LabelMismatch: return "LabelMismatch";
    case ErrorKind::DegenerateParameter: return "DegenerateParameter";
    case ErrorKind::TooLargeForExact: return "TooLargeForExact";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::AlphabetViolation: return "AlphabetViolation";
    case ErrorKind::NeedThreeNodes: return "NeedThreeNodes";
    case ErrorKind::NotAdditive: return "NotAdditive";
    case ErrorKind::InfiniteDistance: return "InfiniteDistance";
    case ErrorKind::TooFewNodes: return "TooFewNodes";
    case ErrorKind::Disconnected: return "Disconnected";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::NonNumeric: return "NonNumeric";
    case ErrorKind::Parse: return "Parse";
  }
  return "Error";
}

DistanceMatrix::DistanceMatrix(std::vector<NodeId> ids)
    : labels(std::move(ids)),
      d(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()),
                              static_cast<Eigen::Index>(labels.size()))) {}

bool DistanceMatrix::contains(NodeId id) const {
  return std::find(labels.begin(), labels.end(), id) != labels.end();
}

Eigen::Index DistanceMatrix::index_of(NodeId id) const {
  auto it = std::find(labels.begin(), labels.end(), id);
  if (it == labels.end()) throw Error(ErrorKind::UnknownNode, "node " + std::to_string(id) + " not in distance matrix");
  return static_cast<Eigen::Index>(it - labels.begin());
}

double DistanceMatrix::operator()(NodeId a, NodeId b) const { return d(index_of(a), index_of(b)); }

void DistanceMatrix::set(NodeId a, NodeId b, double value) {
  const auto i = index_of(a);
  const auto j = index_of(b);
  d(i, j) = value;
  d(j, i) = value;
}

double DistanceMatrix::sign_of(NodeId a, NodeId b) const {
  if (!sign) return 1.0;
  return (*sign)(index_of(a), index_of(b));
}

DistanceMatrix DistanceMatrix::subset(const std::vector<NodeId>& ids) const {
  DistanceMatrix out(ids);
  out.source = source;
  out.sample_count = sample_count;
  std::vector<Eigen::Index> idx;
  idx.reserve(ids.size());
  for (NodeId id : ids) idx.push_back(index_of(id));
  const auto n = static_cast<Eigen::Index>(ids.size());
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) out.d(a, b) = d(idx[a], idx[b]);
  if (sign) {
    Eigen::MatrixXd s(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) s(a, b) = (*sign)(idx[a], idx[b]);
    out.sign = std::move(s);
  }
  if (!names.empty()) {
    for (auto i : idx) out.names.push_back(names[static_cast<std::size_t>(i)]);
  }
  return out;
}

double DistanceMatrix::max_finite() const {
  double best = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double v = d.data()[i];
    if (std::isfinite(v)) best = std::max(best, v);
  }
  return best;
}

bool DistanceMatrix::all_finite() const { return d.allFinite(); }

}  // namespace latree
