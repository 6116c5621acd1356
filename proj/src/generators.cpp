#include "latree/generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "latree/error.hpp"

namespace latree {

const char* to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::DoubleStar: return "double_star";
    case GeneratorKind::Hmm: return "hmm";
    case GeneratorKind::KComplete: return "k_complete";
    case GeneratorKind::RandomMinimal: return "random_minimal";
    case GeneratorKind::Blind: return "blind";
  }
  return "?";
}

GeneratorKind generator_kind_from_string(const std::string& name) {
  if (name == "double_star") return GeneratorKind::DoubleStar;
  if (name == "hmm") return GeneratorKind::Hmm;
  if (name == "k_complete") return GeneratorKind::KComplete;
  if (name == "random_minimal") return GeneratorKind::RandomMinimal;
  if (name == "blind") return GeneratorKind::Blind;
  throw Error(ErrorKind::InvalidSpec, "unknown generator '" + name + "'");
}

namespace {

LatentTree double_star(int m) {
  if (m < 4) throw Error(ErrorKind::InvalidSpec, "double star needs at least 4 observed nodes");
  LatentTree t;
  t.add_edge(-1, -2);
  for (int i = 0; i < m; ++i) t.add_edge(i < m / 2 ? -1 : -2, i);
  return t;
}

LatentTree hmm(int hidden) {
  if (hidden < 1) throw Error(ErrorKind::InvalidSpec, "hmm needs at least one hidden node");
  LatentTree t;
  for (int k = 1; k <= hidden; ++k) {
    t.add_edge(-k, k);
    if (k > 1) t.add_edge(-(k - 1), -k);
  }
  t.add_edge(-1, 0);
  t.add_edge(-hidden, hidden + 1);
  return t;
}

LatentTree k_complete(int arity, int levels) {
  if (arity < 3 || levels < 1) throw Error(ErrorKind::InvalidSpec, "k_complete needs arity >= 3 and levels >= 1");
  LatentTree t;
  NodeId next_obs = 0;
  NodeId next_hidden = -1;
  const NodeId root = next_obs++;
  t.add_node(root);
  std::vector<NodeId> frontier;
  for (int c = 0; c < arity; ++c) {
    const NodeId h = next_hidden--;
    t.add_edge(root, h);
    frontier.push_back(h);
  }
  for (int level = 2; level <= levels + 1; ++level) {
    std::vector<NodeId> next;
    for (NodeId p : frontier) {
      for (int c = 0; c < arity - 1; ++c) {
        const NodeId v = level <= levels ? next_hidden-- : next_obs++;
        t.add_edge(p, v);
        next.push_back(v);
      }
    }
    frontier = std::move(next);
  }
  return t;
}

// Random recursive tree relabelled so that leaves and degree-2 nodes are
// observed; retried until minimal with 3..max_observed observed nodes.
LatentTree random_minimal(int max_observed, double hidden_prob, std::mt19937_64& rng) {
  if (max_observed < 3) throw Error(ErrorKind::InvalidSpec, "random_minimal needs at least 3 observed nodes");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::uniform_int_distribution<int> size_dist(4, std::max(4, max_observed + max_observed / 2));
    const int N = size_dist(rng);
    std::vector<std::pair<int, int>> edges;
    std::vector<int> degree(static_cast<std::size_t>(N), 0);
    for (int v = 1; v < N; ++v) {
      std::uniform_int_distribution<int> pick(0, v - 1);
      const int p = pick(rng);
      edges.emplace_back(p, v);
      ++degree[static_cast<std::size_t>(p)];
      ++degree[static_cast<std::size_t>(v)];
    }
    std::vector<bool> hidden(static_cast<std::size_t>(N), false);
    int observed = 0;
    for (int v = 0; v < N; ++v) {
      hidden[static_cast<std::size_t>(v)] = degree[static_cast<std::size_t>(v)] >= 3 && unif(rng) < hidden_prob;
      if (!hidden[static_cast<std::size_t>(v)]) ++observed;
    }
    if (observed < 3 || observed > max_observed) continue;
    std::vector<NodeId> id(static_cast<std::size_t>(N));
    NodeId next_obs = 0;
    NodeId next_hidden = -1;
    for (int v = 0; v < N; ++v) id[static_cast<std::size_t>(v)] = hidden[static_cast<std::size_t>(v)] ? next_hidden-- : next_obs++;
    LatentTree t;
    for (const auto& [a, b] : edges) t.add_edge(id[static_cast<std::size_t>(a)], id[static_cast<std::size_t>(b)]);
    if (is_minimal(t)) return t;
  }
  throw Error(ErrorKind::InvalidSpec, "could not draw a minimal tree");
}

// All internal nodes hidden; each hidden node gets at least one leaf.
LatentTree blind(int hidden, std::mt19937_64& rng) {
  if (hidden < 1) throw Error(ErrorKind::InvalidSpec, "blind generator needs a hidden node");
  LatentTree t;
  t.add_node(-1);
  for (int k = 2; k <= hidden; ++k) {
    std::uniform_int_distribution<int> pick(1, k - 1);
    t.add_edge(-pick(rng), -k);
  }
  NodeId next_obs = 0;
  std::uniform_int_distribution<int> extra(0, 2);
  for (int k = 1; k <= hidden; ++k) {
    const NodeId h = -k;
    const int need = std::max(1, 3 - static_cast<int>(t.degree(h)));
    const int leaves = need + extra(rng);
    for (int c = 0; c < leaves; ++c) t.add_edge(h, next_obs++);
  }
  return t;
}

}  // namespace

LatentTree generate_topology(const GeneratorSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  switch (spec.kind) {
    case GeneratorKind::DoubleStar: return double_star(spec.observed);
    case GeneratorKind::Hmm: return hmm(spec.hidden);
    case GeneratorKind::KComplete: return k_complete(spec.arity, spec.levels);
    case GeneratorKind::RandomMinimal: return random_minimal(spec.observed, spec.hidden_prob, rng);
    case GeneratorKind::Blind: return blind(spec.hidden, rng);
  }
  throw Error(ErrorKind::InvalidSpec, "unknown generator");
}

TreeModel generate(const GeneratorSpec& spec) {
  if (!(spec.lo > 0.0 && spec.lo <= spec.hi && spec.hi < 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "correlation range must satisfy 0 < lo <= hi < 1");
  }
  const LatentTree tree = generate_topology(spec);
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> rho_dist(spec.lo, spec.hi);

  std::map<Edge, double> rho;
  if (spec.kind == GeneratorKind::Blind) {
    // Each hidden node's first leaf is its surrogate: strictly the strongest edge at that node.
    const double mid = 0.5 * (spec.lo + spec.hi);
    std::uniform_real_distribution<double> weak(spec.lo, mid);
    std::uniform_real_distribution<double> strong(std::min(spec.hi, mid + 0.05), spec.hi);
    for (const Edge& e : tree.edges()) rho[e] = weak(rng);
    for (NodeId h : tree.hidden()) {
      for (NodeId v : tree.neighbors(h)) {
        if (is_observed(v)) {
          rho[Edge(h, v)] = strong(rng);
          break;
        }
      }
    }
  } else {
    for (const Edge& e : tree.edges()) rho[e] = rho_dist(rng);
  }

  if (spec.family == Family::Gaussian) return GaussianTreeModel{tree, rho};
  if (spec.K < 2) throw Error(ErrorKind::InvalidSpec, "alphabet must have at least two symbols");
  SymmetricDiscreteTreeModel sym{tree, spec.K, {}};
  for (const auto& [e, r] : rho) sym.theta[e] = theta_from_distance(-std::log(r), spec.K);
  if (spec.family == Family::Symmetric) return sym;

  // General discrete: symmetric channels with skewed rows and a skewed root.
  GeneralDiscreteTreeModel g = to_general(sym);
  std::uniform_real_distribution<double> skew(0.5, 1.5);
  for (auto& [step, C] : g.conditional) {
    for (Eigen::Index a = 0; a < C.rows(); ++a) {
      Eigen::RowVectorXd noise(C.cols());
      for (Eigen::Index b = 0; b < C.cols(); ++b) noise(b) = skew(rng);
      noise /= noise.sum();
      C.row(a) = 0.85 * C.row(a) + 0.15 * noise;
    }
  }
  for (Eigen::Index a = 0; a < g.root_marginal.size(); ++a) g.root_marginal(a) = skew(rng);
  g.root_marginal /= g.root_marginal.sum();
  return g;
}

std::pair<double, double> edge_distance_range(const TreeModel& model) {
  double lo = kInfinity;
  double hi = 0.0;
  const LatentTree& tree = tree_of(model);
  if (const auto* g = std::get_if<GeneralDiscreteTreeModel>(&model)) {
    for (const Edge& e : tree.edges()) {
      const double d = discrete_distance(edge_joints(*g).at(e));
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    return {lo, hi};
  }
  for (const Edge& e : tree.edges()) {
    const double d = edge_distance(model, e);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

}  // namespace latree
