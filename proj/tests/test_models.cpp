#include <doctest.h>

#include "latree/error.hpp"
#include "latree/inference.hpp"
#include "latree/io.hpp"
#include "support.hpp"

using namespace latree;

namespace {

GaussianTreeModel gauss_chain(std::vector<double> rho) {
  GaussianTreeModel g;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    g.tree.add_edge(static_cast<NodeId>(k), static_cast<NodeId>(k + 1));
    g.rho[Edge(static_cast<NodeId>(k), static_cast<NodeId>(k + 1))] = rho[k];
  }
  return g;
}

SymmetricDiscreteTreeModel sym_edge(double theta, int K = 2) {
  SymmetricDiscreteTreeModel s;
  s.tree.add_edge(0, 1);
  s.K = K;
  s.theta[Edge(0, 1)] = theta;
  return s;
}

}  // namespace

TEST_CASE("exact distances are per-edge sums") {
  auto one = gauss_chain({0.5});
  auto D = exact_distance_matrix(one);
  CHECK(D(0, 1) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  auto two = gauss_chain({0.5, 0.5});
  CHECK(exact_distance_matrix(two)(0, 2) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
  CHECK(exact_distance_matrix(TreeModel{sym_edge(0.25)})(0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(symmetric_distance(0.1, 3) == doctest::Approx(-2 * std::log(1 - 0.3)));

  auto bad = one;
  bad.rho[Edge(0, 1)] = 0.0;
  CHECK_THROWS_AS(exact_distance_matrix(bad), Error);
  CHECK_THROWS_AS(validate_parameters(TreeModel{sym_edge(0.5)}), Error);
}

TEST_CASE("additivity against correlations of the covariance oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    auto t = gen::random_minimal(rng, 14, 0.4);
    auto g = gen::gaussian(t, rng, -0.9, 0.9);
    for (auto& [e, r] : g.rho)
      if (std::abs(r) < 0.05) r = 0.3;
    auto ids = t.nodes();
    auto D = exact_distance_matrix(g, ids);
    auto S = oracle::covariance(g, ids);
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = 0; b < ids.size(); ++b) {
        CHECK(D(ids[a], ids[b]) == doctest::Approx(-std::log(std::abs(S(a, b)))).epsilon(1e-12));
        CHECK(D.sign_of(ids[a], ids[b]) == (S(a, b) < 0 ? -1.0 : 1.0));
      }
  }
}

TEST_CASE("observed covariance") {
  auto one = gauss_chain({0.5});
  Eigen::Matrix2d expect;
  expect << 1, 0.5, 0.5, 1;
  CHECK((observed_covariance(one) - expect).norm() < 1e-15);
  CHECK(observed_covariance(gauss_chain({0.5, 0.5}))(0, 2) == doctest::Approx(0.25));
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto t = gen::random_minimal(rng, 16, 0.5);
    auto g = gen::gaussian(t, rng);
    auto S = observed_covariance(g);
    CHECK((S - oracle::covariance(g, t.observed())).norm() < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().minCoeff() > 0);
  }
}

TEST_CASE("sampling matches the parameters") {
  auto s = sample(TreeModel{sym_edge(0.25)}, 100000, 4);
  double disagree = (s.data.col(0).array() != s.data.col(1).array()).cast<double>().mean();
  CHECK(std::abs(disagree - 0.25) < 0.01);

  auto g = sample(TreeModel{gauss_chain({0.5})}, 100000, 4);
  const double r = g.data.col(0).dot(g.data.col(1)) / std::sqrt(g.data.col(0).squaredNorm() * g.data.col(1).squaredNorm());
  CHECK(std::abs(r - 0.5) < 0.02);

  auto again = sample(TreeModel{gauss_chain({0.5})}, 100000, 4);
  CHECK(again.data == g.data);
  CHECK(sample(TreeModel{gauss_chain({0.5})}, 10, 5).data != sample(TreeModel{gauss_chain({0.5})}, 10, 6).data);

  auto withh = sample(TreeModel{[] {
                        GaussianTreeModel m;
                        m.tree.add_edge(-1, 0);
                        m.tree.add_edge(-1, 1);
                        m.tree.add_edge(-1, 2);
                        for (auto e : m.tree.edges()) m.rho[e] = 0.6;
                        return m;
                      }()},
                      20, 1, true);
  CHECK(withh.columns == std::vector<NodeId>{0, 1, 2, -1});
}

TEST_CASE("symmetric models have uniform marginals") {
  std::mt19937_64 rng(3);
  auto t = gen::random_minimal(rng, 10, 0.4);
  SymmetricDiscreteTreeModel m;
  m.tree = t;
  m.K = 3;
  for (auto e : t.edges()) m.theta[e] = 0.1;
  const int n = 30000;
  auto s = sample(TreeModel{m}, n, 9, true);
  const double sigma = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (Eigen::Index c = 0; c < s.m(); ++c)
    for (int a = 0; a < 3; ++a) {
      const double count = (s.data.col(c).array() == a).cast<double>().sum();
      CHECK(std::abs(count - n / 3.0) < 3 * sigma + 1);
    }
}

TEST_CASE("mutual information decreases with distance") {
  double prev = INFINITY;
  for (double rho = 0.99; rho > 0.01; rho -= 0.01) {
    const double d = -std::log(rho);
    const double mi = -0.5 * std::log(1 - std::exp(-2 * d));
    CHECK(mi < prev);
    prev = mi;
  }
}

TEST_CASE("KL divergence between observed marginals") {
  auto p = gauss_chain({0.5, 0.7});
  CHECK(kl_observed(p, p) == doctest::Approx(0.0).scale(1.0));

  GaussianTreeModel indep = gauss_chain({1e-9});
  auto q = gauss_chain({0.5});
  Eigen::Matrix2d Sq;
  Sq << 1, 0.5, 0.5, 1;
  const double formula = 0.5 * (Sq.inverse().trace() - 2 + std::log(Sq.determinant()));
  CHECK(kl_observed(indep, q) == doctest::Approx(formula).epsilon(1e-6));
  // Monte-Carlo log-ratio estimate of the same quantity.
  auto x = sample(TreeModel{indep}, 200000, 12);
  const Eigen::Matrix2d inv = Sq.inverse();
  double acc = 0.0;
  for (Eigen::Index r = 0; r < x.n(); ++r) {
    const Eigen::Vector2d v = x.data.row(r).transpose();
    acc += 0.5 * (v.dot(inv * v) - v.squaredNorm()) + 0.5 * std::log(Sq.determinant());
  }
  CHECK(std::abs(acc / x.n() - formula) < 0.01);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto t = gen::random_minimal(rng, trial % 2 ? 12 : 7, 0.4);
    if (t.observed().size() > 8) continue;
    if (trial % 2) {
      CHECK(kl_observed(gen::gaussian(t, rng), gen::gaussian(t, rng)) >= -1e-12);
    } else {
      TreeModel a = gen::discrete(t, 2, rng), b = gen::discrete(t, 2, rng);
      CHECK(kl_observed(a, b) >= -1e-12);
    }
  }
}

TEST_CASE("rerooting a discrete model keeps the joint") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = gen::random_minimal(rng, 7, 0.4);
    auto m = gen::discrete(t, 2 + trial % 2, rng);
    auto j0 = oracle::enumerate(m);
    for (NodeId r : t.nodes()) {
      auto j1 = oracle::enumerate(reroot(m, r));
      for (std::size_t k = 0; k < j0.prob.size(); ++k) CHECK(j1.prob[k] == doctest::Approx(j0.prob[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("model JSON round trip is exact") {
  std::mt19937_64 rng(7);
  auto t = gen::random_minimal(rng, 10, 0.4);
  TreeModel models[] = {gen::gaussian(t, rng), symmetric_from_lengths(
                                                   [&] {
                                                     LatentTree c = t;
                                                     for (auto e : t.edges()) c.set_length(e.u, e.v, 0.37);
                                                     return c;
                                                   }(),
                                                   3),
                        gen::discrete(t, 3, rng)};
  for (const auto& m : models) {
    auto back = model_from_json(model_to_json(m));
    CHECK(family_of(back) == family_of(m));
    CHECK(model_to_json(back) == model_to_json(m));
    if (family_of(m) == Family::Discrete) {
      const auto& a = std::get<GeneralDiscreteTreeModel>(m);
      const auto& b = std::get<GeneralDiscreteTreeModel>(back);
      for (const auto& [s, C] : a.conditional) CHECK(b.conditional.at(s) == C);
    }
  }
  CHECK_THROWS_AS(model_from_json(R"({"nodes":[{"id":0},{"id":1}],"edges":[{"u":0,"v":1}],"family":"gaussian","rho":[]})"),
                  Error);
}
