#pragma once

// Independent oracles and random inputs for the test suites. Nothing here
// calls the library routine it is used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include "latree/models.hpp"
#include "latree/tree.hpp"

namespace oracle {

using latree::NodeId;

inline std::map<NodeId, std::vector<NodeId>> adjacency(const latree::LatentTree& t) {
  std::map<NodeId, std::vector<NodeId>> adj;
  for (NodeId v : t.nodes()) adj[v];
  for (const auto& e : t.edges()) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  return adj;
}

inline std::map<NodeId, int> hops(const latree::LatentTree& t, NodeId s) {
  auto adj = adjacency(t);
  std::map<NodeId, int> dist{{s, 0}};
  std::deque<NodeId> q{s};
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop_front();
    for (NodeId w : adj[u])
      if (!dist.count(w)) {
        dist[w] = dist[u] + 1;
        q.push_back(w);
      }
  }
  return dist;
}

inline int diameter(const latree::LatentTree& t) {
  int best = 0;
  for (NodeId v : t.nodes())
    for (const auto& [w, h] : hops(t, v)) best = std::max(best, h);
  return best;
}

inline int effective_depth(const latree::LatentTree& t) {
  int worst = 0;
  for (NodeId h : t.nodes()) {
    if (h >= 0) continue;
    int nearest = 1 << 30;
    for (const auto& [w, d] : hops(t, h))
      if (w >= 0) nearest = std::min(nearest, d);
    worst = std::max(worst, nearest);
  }
  return worst;
}

// Nodes on the i-j path, endpoints included, by depth-first search.
inline std::vector<NodeId> path_nodes(const latree::LatentTree& t, NodeId i, NodeId j) {
  auto adj = adjacency(t);
  std::vector<NodeId> stack;
  std::function<bool(NodeId, NodeId)> dfs = [&](NodeId u, NodeId from) {
    stack.push_back(u);
    if (u == j) return true;
    for (NodeId w : adj[u])
      if (w != from && dfs(w, u)) return true;
    stack.pop_back();
    return false;
  };
  dfs(i, i);
  return stack;
}

// Observed nodes on the side of `b` after cutting edge (a, b).
inline std::set<NodeId> side(const latree::LatentTree& t, NodeId a, NodeId b) {
  auto adj = adjacency(t);
  std::set<NodeId> seen{a, b};
  std::set<NodeId> out;
  std::vector<NodeId> stack{b};
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    if (u >= 0) out.insert(u);
    for (NodeId w : adj[u])
      if (seen.insert(w).second) stack.push_back(w);
  }
  return out;
}

// Non-trivial bipartitions, each stored as the block without the smallest observed id.
inline std::multiset<std::set<NodeId>> splits(const latree::LatentTree& t) {
  const auto obs = t.observed();
  std::multiset<std::set<NodeId>> out;
  for (const auto& e : t.edges()) {
    auto s = side(t, e.u, e.v);
    if (s.count(obs.front())) {
      std::set<NodeId> other;
      for (NodeId v : obs)
        if (!s.count(v)) other.insert(v);
      s = other;
    }
    if (s.empty()) continue;
    out.insert(s);
  }
  return out;
}

inline int rf(const latree::LatentTree& a, const latree::LatentTree& b) {
  auto sa = splits(a), sb = splits(b);
  std::vector<std::set<NodeId>> diff;
  std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(diff));
  return static_cast<int>(diff.size());
}

inline double path_product(const latree::GaussianTreeModel& g, NodeId i, NodeId j) {
  const auto p = path_nodes(g.tree, i, j);
  double r = 1.0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) r *= g.rho.at(latree::Edge(p[k], p[k + 1]));
  return r;
}

inline Eigen::MatrixXd covariance(const latree::GaussianTreeModel& g, const std::vector<NodeId>& ids) {
  const auto m = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd S(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) S(a, b) = path_product(g, ids[a], ids[b]);
  return S;
}

// Sum of multivariate normal log densities, straight from the formula.
inline double mvn_loglik(const Eigen::MatrixXd& S, const Eigen::MatrixXd& X) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  const Eigen::MatrixXd inv = lu.inverse();
  const double logdet = std::log(lu.determinant());
  double total = 0.0;
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const Eigen::VectorXd x = X.row(r).transpose();
    total += -0.5 * (x.dot(inv * x) + logdet + static_cast<double>(S.rows()) * std::log(2 * std::numbers::pi));
  }
  return total;
}

// Full joint of a rooted discrete model by enumeration over every node.
struct Joint {
  std::vector<NodeId> nodes;
  std::vector<std::vector<int>> states;
  std::vector<double> prob;
};

inline Joint enumerate(const latree::GeneralDiscreteTreeModel& m) {
  Joint j;
  j.nodes = m.tree.nodes();
  const std::size_t N = j.nodes.size();
  std::map<NodeId, std::size_t> pos;
  for (std::size_t k = 0; k < N; ++k) pos[j.nodes[k]] = k;
  std::vector<int> x(N, 0);
  while (true) {
    double p = m.root_marginal(x[pos[m.root]]);
    for (const auto& [step, C] : m.conditional) p *= C(x[pos[step.first]], x[pos[step.second]]);
    j.states.push_back(x);
    j.prob.push_back(p);
    std::size_t k = 0;
    while (k < N && ++x[k] == m.K) x[k++] = 0;
    if (k == N) break;
  }
  return j;
}

inline std::size_t index_in(const Joint& j, NodeId v) {
  return static_cast<std::size_t>(std::find(j.nodes.begin(), j.nodes.end(), v) - j.nodes.begin());
}

inline bool matches(const Joint& j, std::size_t row, const std::vector<NodeId>& cols, const Eigen::VectorXi& vals) {
  for (std::size_t c = 0; c < cols.size(); ++c)
    if (j.states[row][index_in(j, cols[c])] != vals(static_cast<Eigen::Index>(c))) return false;
  return true;
}

inline double evidence(const Joint& j, const std::vector<NodeId>& cols, const Eigen::VectorXi& vals) {
  double s = 0.0;
  for (std::size_t r = 0; r < j.prob.size(); ++r)
    if (matches(j, r, cols, vals)) s += j.prob[r];
  return s;
}

inline Eigen::VectorXd node_posterior(const Joint& j, int K, NodeId v, const std::vector<NodeId>& cols,
                                      const Eigen::VectorXi& vals) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(K);
  const std::size_t iv = index_in(j, v);
  for (std::size_t r = 0; r < j.prob.size(); ++r)
    if (matches(j, r, cols, vals)) out(j.states[r][iv]) += j.prob[r];
  return out / out.sum();
}

inline Eigen::MatrixXd pair_posterior(const Joint& j, int K, NodeId a, NodeId b, const std::vector<NodeId>& cols,
                                      const Eigen::VectorXi& vals) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(K, K);
  const std::size_t ia = index_in(j, a), ib = index_in(j, b);
  for (std::size_t r = 0; r < j.prob.size(); ++r)
    if (matches(j, r, cols, vals)) out(j.states[r][ia], j.states[r][ib]) += j.prob[r];
  return out / out.sum();
}

}  // namespace oracle

namespace gen {

using latree::NodeId;

// Random tree: observed ids 0..m-1, hidden ids negative. Built by attaching
// nodes one at a time to a uniformly chosen earlier node, then hidden nodes
// of degree < 3 are repaired by contraction so the result is minimal.
inline latree::LatentTree random_minimal(std::mt19937_64& rng, int max_nodes, double hidden_share) {
  std::uniform_int_distribution<int> size(4, max_nodes);
  const int n = size(rng);
  std::bernoulli_distribution hid(hidden_share);
  std::vector<NodeId> ids;
  NodeId next_obs = 0, next_hid = -1;
  for (int k = 0; k < n; ++k) ids.push_back(hid(rng) ? next_hid-- : next_obs++);
  if (next_obs < 2) ids[0] = next_obs++, ids[1] = next_obs++;
  std::map<NodeId, std::set<NodeId>> adj;
  for (int k = 0; k < n; ++k) adj[ids[k]];
  for (int k = 1; k < n; ++k) {
    std::uniform_int_distribution<int> pick(0, k - 1);
    NodeId a = ids[k], b = ids[pick(rng)];
    adj[a].insert(b);
    adj[b].insert(a);
  }
  // Hidden leaves are dropped, hidden degree-2 nodes spliced out.
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = adj.begin(); it != adj.end(); ++it) {
      const NodeId h = it->first;
      if (h >= 0 || it->second.size() >= 3) continue;
      std::vector<NodeId> nb(it->second.begin(), it->second.end());
      for (NodeId w : nb) adj[w].erase(h);
      if (nb.size() == 2) {
        adj[nb[0]].insert(nb[1]);
        adj[nb[1]].insert(nb[0]);
      }
      adj.erase(it);
      changed = true;
      break;
    }
  }
  latree::LatentTree t;
  for (const auto& [v, nb] : adj) {
    t.add_node(v);
    for (NodeId w : nb)
      if (v < w) t.add_edge(v, w);
  }
  return t;
}

inline latree::GaussianTreeModel gaussian(const latree::LatentTree& t, std::mt19937_64& rng, double lo = 0.2,
                                          double hi = 0.8) {
  std::uniform_real_distribution<double> u(lo, hi);
  latree::GaussianTreeModel g;
  g.tree = t;
  for (const auto& e : t.edges()) g.rho[e] = u(rng);
  return g;
}

inline latree::GeneralDiscreteTreeModel discrete(const latree::LatentTree& t, int K, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  latree::GeneralDiscreteTreeModel m;
  m.tree = t;
  m.K = K;
  m.root = t.nodes().front();
  m.root_marginal = Eigen::VectorXd(K);
  for (int a = 0; a < K; ++a) m.root_marginal(a) = u(rng);
  m.root_marginal /= m.root_marginal.sum();
  std::map<NodeId, bool> seen{{m.root, true}};
  std::deque<NodeId> q{m.root};
  while (!q.empty()) {
    NodeId p = q.front();
    q.pop_front();
    for (NodeId c : t.neighbors(p)) {
      if (seen[c]) continue;
      seen[c] = true;
      Eigen::MatrixXd C(K, K);
      for (int a = 0; a < K; ++a) {
        for (int b = 0; b < K; ++b) C(a, b) = u(rng) + (a == b ? 1.5 : 0.0);
        C.row(a) /= C.row(a).sum();
      }
      m.conditional[{p, c}] = C;
      q.push_back(c);
    }
  }
  return m;
}

}  // namespace gen
