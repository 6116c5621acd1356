#include "latree/distances.hpp"

#include <cmath>
#include <string>

#include "latree/error.hpp"

namespace latree {

namespace {

DistanceMatrix empty_like(const SampleMatrix& samples) {
  DistanceMatrix out(samples.columns);
  out.names = samples.names;
  out.source = DistanceSource::Estimated;
  out.sample_count = static_cast<std::size_t>(samples.n());
  return out;
}

void require_discrete(const SampleMatrix& samples, int K) {
  if (K < 2) throw Error(ErrorKind::AlphabetViolation, "alphabet must have at least two symbols");
  SampleMatrix probe = samples;
  probe.alphabet = K;
  probe.validate();
}

}  // namespace

DistanceMatrix estimate_gaussian(const SampleMatrix& samples, bool center) {
  if (samples.n() < 2) throw Error(ErrorKind::InvalidSpec, "need at least two samples");
  Eigen::MatrixXd x = samples.data;
  if (center) x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd s = (x.transpose() * x) / static_cast<double>(samples.n());
  DistanceMatrix out = empty_like(samples);
  const auto m = samples.m();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(s(i, i) > 0.0)) {
      const std::string name = samples.names.empty() ? std::to_string(samples.columns[static_cast<std::size_t>(i)])
                                                     : samples.names[static_cast<std::size_t>(i)];
      throw Error(ErrorKind::ZeroVariance, "column " + name + " is constant");
    }
  }
  Eigen::MatrixXd sign = Eigen::MatrixXd::Ones(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double rho = s(i, j) / std::sqrt(s(i, i) * s(j, j));
      const double a = std::min(std::abs(rho), 1.0);
      const double d = a > 0.0 ? -std::log(a) : kInfinity;
      out.d(i, j) = out.d(j, i) = d;
      sign(i, j) = sign(j, i) = rho < 0 ? -1.0 : 1.0;
    }
  }
  out.sign = std::move(sign);
  return out;
}

DistanceMatrix estimate_symmetric(const SampleMatrix& samples, int K, double smoothing) {
  require_discrete(samples, K);
  DistanceMatrix out = empty_like(samples);
  const auto m = samples.m();
  const double n = static_cast<double>(samples.n());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double disagree = (samples.data.col(i).array() != samples.data.col(j).array()).count();
      // Add-lambda on the K x K joint: K(K-1) off-diagonal cells out of K^2.
      const double theta = (disagree + smoothing * K * (K - 1)) / (n + smoothing * K * K);
      const double d = symmetric_distance(theta, K);
      out.d(i, j) = out.d(j, i) = d;
    }
  }
  return out;
}

Eigen::MatrixXd empirical_joint(const SampleMatrix& samples, Eigen::Index a, Eigen::Index b, int K,
                                double smoothing) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Constant(K, K, smoothing);
  for (Eigen::Index r = 0; r < samples.n(); ++r)
    J(static_cast<Eigen::Index>(samples.data(r, a)), static_cast<Eigen::Index>(samples.data(r, b))) += 1.0;
  const double total = J.sum();
  if (total > 0) J /= total;
  return J;
}

DistanceMatrix estimate_general_discrete(const SampleMatrix& samples, int K, double smoothing) {
  require_discrete(samples, K);
  DistanceMatrix out = empty_like(samples);
  const auto m = samples.m();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double d = discrete_distance(empirical_joint(samples, i, j, K, smoothing));
      out.d(i, j) = out.d(j, i) = d;
    }
  }
  return out;
}

DistanceMatrix estimate_distances(const SampleMatrix& samples, Family family, int K, bool center,
                                  double smoothing) {
  switch (family) {
    case Family::Gaussian: return estimate_gaussian(samples, center);
    case Family::Symmetric: return estimate_symmetric(samples, K, smoothing);
    case Family::Discrete: return estimate_general_discrete(samples, K, smoothing);
  }
  throw Error(ErrorKind::InvalidSpec, "unknown family");
}

}  // namespace latree
