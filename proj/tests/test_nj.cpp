#include <doctest.h>

#include "latree/error.hpp"
#include "latree/generators.hpp"
#include "latree/neighbor_joining.hpp"
#include "support.hpp"

using namespace latree;

namespace {

DistanceMatrix observed_metric(const GaussianTreeModel& g) {
  const auto obs = g.tree.observed();
  DistanceMatrix D(obs);
  for (NodeId a : obs)
    for (NodeId b : obs) D.set(a, b, a == b ? 0.0 : -std::log(std::abs(oracle::path_product(g, a, b))));
  return D;
}

// Unrooted binary tree with observed leaves 0..leaves-1: each new leaf
// subdivides a uniformly chosen edge with a fresh hidden node.
LatentTree random_binary(std::mt19937_64& rng, int leaves) {
  LatentTree t;
  t.add_edge(-1, 0);
  t.add_edge(-1, 1);
  t.add_edge(-1, 2);
  NodeId next = -2;
  for (NodeId leaf = 3; leaf < leaves; ++leaf) {
    auto edges = t.edges();
    std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
    const Edge e = edges[pick(rng)];
    t.remove_edge(e.u, e.v);
    t.add_edge(e.u, next);
    t.add_edge(next, e.v);
    t.add_edge(next, leaf);
    --next;
  }
  return t;
}

DistanceMatrix permuted(const DistanceMatrix& D, std::mt19937_64& rng) {
  auto ids = D.labels;
  std::shuffle(ids.begin(), ids.end(), rng);
  return D.subset(ids);
}

}  // namespace

TEST_CASE("three leaves give the forced star") {
  DistanceMatrix D({0, 1, 2});
  D.set(0, 1, 3.0);
  D.set(0, 2, 4.0);
  D.set(1, 2, 5.0);
  auto t = nj(D);
  REQUIRE(t.hidden_count() == 1);
  const NodeId h = t.hidden()[0];
  CHECK(*t.length(h, 0) == doctest::Approx(1.0));
  CHECK(*t.length(h, 1) == doctest::Approx(2.0));
  CHECK(*t.length(h, 2) == doctest::Approx(3.0));
}

TEST_CASE("quartets match the four-point brute force") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<NodeId> leaf = {0, 1, 2, 3};
    std::shuffle(leaf.begin(), leaf.end(), rng);
    LatentTree q;
    q.add_edge(-1, leaf[0], u(rng));
    q.add_edge(-1, leaf[1], u(rng));
    q.add_edge(-1, -2, u(rng));
    q.add_edge(-2, leaf[2], u(rng));
    q.add_edge(-2, leaf[3], u(rng));
    const auto D = path_distances(q, {0, 1, 2, 3});
    // The true split has the smallest pair sum.
    const double s01 = D(0, 1) + D(2, 3), s02 = D(0, 2) + D(1, 3), s03 = D(0, 3) + D(1, 2);
    const NodeId partner = s01 < s02 && s01 < s03 ? 1 : (s02 < s03 ? 2 : 3);
    auto t = nj(D);
    CHECK(t.hidden_count() == 2);
    CHECK(oracle::side(t, t.neighbors(0).front(), 0) == std::set<NodeId>{0});
    const NodeId h0 = t.neighbors(0).front();
    CHECK(t.neighbors(partner).front() == h0);
  }
}

TEST_CASE("binary trees with observed leaves are recovered") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto truth = random_binary(rng, 4 + trial % 20);
    auto D = observed_metric(gen::gaussian(truth, rng));
    auto t = nj(D);
    CHECK(trees_equal_up_to_hidden_relabel(t, truth));
    for (NodeId v : t.hidden()) CHECK(t.neighbors(v).size() == 3);
    CHECK(trees_equal_up_to_hidden_relabel(nj(permuted(D, rng)), t));
  }
}

TEST_CASE("short-edge contraction") {
  DistanceMatrix D({1, 2, 3});
  D.set(1, 2, 0.5);
  D.set(2, 3, 0.7);
  D.set(1, 3, 1.2);
  auto raw = nj(D);
  CHECK(raw.hidden_count() == 1);
  CHECK(*raw.length(raw.hidden()[0], 2) == doctest::Approx(0.0).scale(1.0));
  auto fixed = nj_relaxed(D, -std::log(0.9));
  CHECK(fixed.hidden_count() == 0);
  CHECK(fixed.has_edge(1, 2));
  CHECK(fixed.has_edge(2, 3));
  CHECK(*fixed.length(1, 2) == doctest::Approx(0.5));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto truth = gen::random_minimal(rng, 16, 0.5);
    if (truth.observed().size() < 3) continue;
    auto D2 = observed_metric(gen::gaussian(truth, rng));
    auto t = nj(D2);
    CHECK(nj_relaxed(D2, 0.0).edges() == t.edges());
    auto r = nj_relaxed(D2, -std::log(0.9));
    CHECK(r.hidden_count() <= t.hidden_count());
    CHECK(r.is_tree());
    // Exact distances from a tree with edges longer than the threshold.
    CHECK(trees_equal_up_to_hidden_relabel(r, truth));
  }

  LatentTree pin;
  pin.add_edge(-1, 0, 0.01);
  pin.add_edge(-1, 1, 1.0);
  pin.add_edge(-1, 2, 1.0);
  CHECK(contract_short_edges(pin, 0.1).hidden_count() == 0);
  CHECK(contract_short_edges(pin, 0.1, {-1}).hidden_count() == 1);
}

TEST_CASE("double star through relaxed NJ") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::DoubleStar;
  spec.observed = 20;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = seed;
    auto model = generate(spec);
    auto t = nj_relaxed(exact_distance_matrix(model), -std::log(0.9));
    CHECK(t.hidden_count() == 2);
    CHECK(trees_equal_up_to_hidden_relabel(t, tree_of(model)));
  }
}

TEST_CASE("nj input errors") {
  DistanceMatrix two({0, 1});
  two.set(0, 1, 1.0);
  CHECK_THROWS_AS(nj(two), Error);
  DistanceMatrix inf({0, 1, 2});
  inf.set(0, 1, 1.0);
  inf.set(1, 2, 1.0);
  inf.set(0, 2, kInfinity);
  try {
    nj(inf);
    FAIL("expected InfiniteDistance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfiniteDistance);
  }
}
