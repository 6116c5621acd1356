#include "latree/recursive_grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "latree/error.hpp"

namespace latree {

namespace {

// Growable symmetric table of distances keyed by node id.
class Table {
 public:
  explicit Table(const DistanceMatrix& D) {
    const auto m = D.size();
    d_ = Eigen::MatrixXd::Zero(2 * m + 4, 2 * m + 4);
    for (Eigen::Index a = 0; a < m; ++a) add(D.labels[static_cast<std::size_t>(a)]);
    d_.topLeftCorner(m, m) = D.d;
  }

  void add(NodeId id) {
    const auto n = static_cast<Eigen::Index>(ids_.size());
    if (n == d_.rows()) {
      Eigen::MatrixXd bigger = Eigen::MatrixXd::Zero(2 * n, 2 * n);
      bigger.topLeftCorner(n, n) = d_;
      d_ = std::move(bigger);
    }
    idx_[id] = n;
    ids_.push_back(id);
  }

  double operator()(NodeId a, NodeId b) const { return d_(idx_.at(a), idx_.at(b)); }
  void set(NodeId a, NodeId b, double v) {
    const auto ia = idx_.at(a);
    const auto ib = idx_.at(b);
    d_(ia, ib) = d_(ib, ia) = v;
  }

 private:
  std::map<NodeId, Eigen::Index> idx_;
  std::vector<NodeId> ids_;
  Eigen::MatrixXd d_;
};

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

std::vector<std::vector<int>> blocks_of(UnionFind& uf, std::size_t n) {
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[uf.find(static_cast<int>(i))].push_back(static_cast<int>(i));
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

NodeId first_hidden_id(const DistanceMatrix& D, const RgOptions& options) {
  if (options.first_hidden) return *options.first_hidden;
  NodeId lowest = 0;
  for (NodeId id : D.labels) lowest = std::min(lowest, id);
  return lowest - 1;
}

void check_labels(const DistanceMatrix& D) {
  std::vector<NodeId> ids = D.labels;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorKind::InvalidSpec, "duplicate labels in distance matrix");
  }
}

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

}  // namespace

const PairRelation& Relationships::relation(NodeId a, NodeId b) const {
  return pairs.at({std::min(a, b), std::max(a, b)});
}

Relationships test_node_relationships(const DistanceMatrix& D, const std::vector<NodeId>& Y, double tol) {
  if (Y.size() < 3) throw Error(ErrorKind::NeedThreeNodes, "need at least three active nodes");
  std::vector<NodeId> ys = Y;
  std::sort(ys.begin(), ys.end());
  const std::size_t n = ys.size();
  Relationships out;
  UnionFind uf(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const NodeId i = ys[a];
      const NodeId j = ys[b];
      const double dij = D(i, j);
      double lo = kInfinity;
      double hi = -kInfinity;
      for (NodeId k : ys) {
        if (k == i || k == j) continue;
        const double phi = D(i, k) - D(j, k);
        lo = std::min(lo, phi);
        hi = std::max(hi, phi);
      }
      PairRelation rel;
      if (hi - lo <= tol) {
        const double phi = 0.5 * (hi + lo);
        if (std::abs(phi - dij) <= tol) {
          rel = {RelationKind::ParentChild, j, i};
        } else if (std::abs(phi + dij) <= tol) {
          rel = {RelationKind::ParentChild, i, j};
        } else if (phi > -dij && phi < dij) {
          rel = {RelationKind::Siblings, 0, 0};
        }
      }
      if (rel.kind != RelationKind::Inconclusive) uf.unite(static_cast<int>(a), static_cast<int>(b));
      out.pairs[{i, j}] = rel;
    }
  }
  for (const auto& block : blocks_of(uf, n)) {
    std::vector<NodeId> ids;
    for (int p : block) ids.push_back(ys[static_cast<std::size_t>(p)]);
    out.partition.push_back(std::move(ids));
  }
  return out;
}

double default_tau(std::size_t n) {
  const double tau0 = -std::log(0.15);
  return tau0 * (1.0 + std::log10(static_cast<double>(std::max<std::size_t>(n, 1))) / 4.0);
}

SiblingStatistic sibling_statistic(const DistanceMatrix& D, NodeId i, NodeId j, const RelaxationConfig& config,
                                   const std::vector<NodeId>* pool) {
  SiblingStatistic out;
  const std::vector<NodeId>& ks = pool ? *pool : D.labels;
  double lo = kInfinity;
  double hi = -kInfinity;
  for (NodeId k : ks) {
    if (k == i || k == j) continue;
    const double dik = D(i, k);
    const double djk = D(j, k);
    if (!(std::max(dik, djk) < config.tau) || !std::isfinite(dik) || !std::isfinite(djk)) continue;
    out.witnesses.push_back(k);
    lo = std::min(lo, dik - djk);
    hi = std::max(hi, dik - djk);
  }
  if (!out.witnesses.empty()) {
    out.empty = false;
    out.lambda = hi - lo;
  }
  return out;
}

// ---------------------------------------------------------------- k-means

namespace {

double silhouette(const Eigen::MatrixXd& L, const std::vector<int>& assign, int k) {
  const auto n = static_cast<int>(assign.size());
  std::vector<int> size(static_cast<std::size_t>(k), 0);
  for (int a : assign) ++size[static_cast<std::size_t>(a)];
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int ci = assign[static_cast<std::size_t>(i)];
    if (size[static_cast<std::size_t>(ci)] <= 1) continue;  // singleton: s = 0
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    for (int j = 0; j < n; ++j)
      if (j != i) sum[static_cast<std::size_t>(assign[static_cast<std::size_t>(j)])] += L(i, j);
    const double a = sum[static_cast<std::size_t>(ci)] / (size[static_cast<std::size_t>(ci)] - 1);
    double b = kInfinity;
    for (int c = 0; c < k; ++c)
      if (c != ci && size[static_cast<std::size_t>(c)] > 0) b = std::min(b, sum[static_cast<std::size_t>(c)] / size[static_cast<std::size_t>(c)]);
    const double denom = std::max(a, b);
    if (denom > 0 && std::isfinite(b)) total += (b - a) / denom;
  }
  return total / n;
}

// One k-medoids run; returns the assignment (clusters may be relabelled).
std::vector<int> k_medoids(const Eigen::MatrixXd& L, int k, std::mt19937_64& rng) {
  const auto n = static_cast<int>(L.rows());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> medoids(order.begin(), order.begin() + k);
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (L(i, medoids[static_cast<std::size_t>(c)]) < L(i, medoids[static_cast<std::size_t>(best)])) best = c;
      for (int c = 0; c < k; ++c)
        if (medoids[static_cast<std::size_t>(c)] == i) best = c;
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    bool moved = false;
    for (int c = 0; c < k; ++c) {
      int best = medoids[static_cast<std::size_t>(c)];
      double best_cost = kInfinity;
      for (int cand = 0; cand < n; ++cand) {
        if (assign[static_cast<std::size_t>(cand)] != c) continue;
        double cost = 0.0;
        for (int i = 0; i < n; ++i)
          if (assign[static_cast<std::size_t>(i)] == c) cost = std::max(cost, L(i, cand));
        if (cost < best_cost) {
          best_cost = cost;
          best = cand;
        }
      }
      if (best != medoids[static_cast<std::size_t>(c)]) {
        medoids[static_cast<std::size_t>(c)] = best;
        moved = true;
      }
    }
    if (!changed && !moved) break;
  }
  return assign;
}

}  // namespace

std::vector<std::vector<int>> cluster_families(const Eigen::MatrixXd& lambda, double floor, std::uint64_t seed) {
  const auto n = static_cast<int>(lambda.rows());
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  if (n == 0) return {};
  double max_off = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) max_off = std::max(max_off, lambda(i, j));
  if (n <= 3 || max_off < floor) return {all};

  constexpr int kRestarts = 5;
  double best_score = -kInfinity;
  std::vector<int> best_assign;
  for (int k = 2; k <= n - 2; ++k) {
    for (int r = 0; r < kRestarts; ++r) {
      std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(k) * 101ULL + static_cast<std::uint64_t>(r));
      const auto assign = k_medoids(lambda, k, rng);
      const double s = silhouette(lambda, assign, k);
      if (s > best_score + 1e-12) {
        best_score = s;
        best_assign = assign;
      }
    }
  }
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[best_assign[static_cast<std::size_t>(i)]].push_back(i);
  std::vector<std::vector<int>> out;
  for (auto& [c, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

// ------------------------------------------------------------------ exact

RgResult rg_exact_detailed(const DistanceMatrix& D, const RgOptions& options) {
  check_labels(D);
  for (Eigen::Index a = 0; a < D.d.size(); ++a)
    if (!std::isfinite(D.d.data()[a])) throw Error(ErrorKind::InfiniteDistance, "exact distances must be finite");

  RgResult result;
  Table table(D);
  LatentTree& tree = result.tree;
  std::vector<NodeId> Y = D.labels;
  std::sort(Y.begin(), Y.end());
  for (NodeId v : Y) tree.add_node(v);
  NodeId next_hidden = first_hidden_id(D, options);
  const double tol = 1e-7 * std::max(1.0, D.max_finite());

  while (Y.size() >= 3) {
    ++result.iterations;
    DistanceMatrix active(Y);
    for (std::size_t a = 0; a < Y.size(); ++a)
      for (std::size_t b = 0; b < Y.size(); ++b)
        active.d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = table(Y[a], Y[b]);
    const Relationships rel = test_node_relationships(active, Y, tol);

    std::vector<NodeId> Ynew;
    std::map<NodeId, std::vector<NodeId>> children;  // new hidden -> children
    bool progress = false;
    for (const auto& block : rel.partition) {
      if (block.size() == 1) {
        Ynew.push_back(block.front());
        continue;
      }
      progress = true;
      std::optional<NodeId> parent;
      for (NodeId u : block) {
        bool all = true;
        for (NodeId v : block) {
          if (v == u) continue;
          const auto& r = rel.relation(u, v);
          if (r.kind != RelationKind::ParentChild || r.parent != u) {
            all = false;
            break;
          }
        }
        if (all) {
          parent = u;
          break;
        }
      }
      if (parent) {
        for (NodeId v : block)
          if (v != *parent) tree.add_edge(*parent, v, table(*parent, v));
        Ynew.push_back(*parent);
        continue;
      }
      for (std::size_t a = 0; a < block.size(); ++a)
        for (std::size_t b = a + 1; b < block.size(); ++b)
          if (rel.relation(block[a], block[b]).kind != RelationKind::Siblings)
            throw Error(ErrorKind::NotAdditive, "inconsistent family in distance matrix");
      const NodeId h = next_hidden--;
      table.add(h);
      tree.add_node(h);
      children[h] = block;
      Ynew.push_back(h);
    }
    if (!progress) throw Error(ErrorKind::NotAdditive, "no families found; distances are not a tree metric");

    const std::vector<NodeId>& Yold = Y;
    for (const auto& [h, kids] : children) {
      for (std::size_t a = 0; a < kids.size(); ++a) {
        const NodeId i = kids[a];
        const NodeId j = kids[a == 0 ? 1 : 0];
        NodeId k = i;
        for (NodeId c : Yold)
          if (c != i && c != j) {
            k = c;
            break;
          }
        const double dih = 0.5 * (table(i, j) + table(i, k) - table(j, k));
        table.set(i, h, dih);
      }
    }
    auto is_old = [&](NodeId v) { return std::binary_search(Yold.begin(), Yold.end(), v); };
    for (const auto& [h, kids] : children) {
      const NodeId i = kids.front();
      for (NodeId l : Ynew) {
        if (l == h) continue;
        if (is_old(l)) {
          table.set(h, l, table(i, l) - table(i, h));
        } else {
          const NodeId k = children.at(l).front();
          table.set(h, l, table(i, k) - table(i, h) - table(l, k));
        }
      }
      for (NodeId c : kids) tree.add_edge(h, c, table(c, h));
    }
    std::sort(Ynew.begin(), Ynew.end());
    Y = std::move(Ynew);
  }
  if (Y.size() == 2) {
    ++result.iterations;
    tree.add_edge(Y[0], Y[1], table(Y[0], Y[1]));
  }

  // Every node gets distances to every other via path sums of the output.
  std::vector<NodeId> all = tree.nodes();
  for (NodeId a : all)
    for (NodeId b : all)
      if (a < b) table.set(a, b, path_length(tree, a, b));
  for (std::size_t a = 0; a < D.labels.size(); ++a) {
    for (std::size_t b = a + 1; b < D.labels.size(); ++b) {
      const double want = D.d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      const double got = table(D.labels[a], D.labels[b]);
      if (std::abs(got - want) > 1e-9 * std::max(1.0, std::abs(want))) {
        throw Error(ErrorKind::NotAdditive, "output tree does not reproduce the input distances");
      }
    }
  }
  result.distances = path_distances(tree, tree.nodes());
  result.distances.source = D.source;
  return result;
}

LatentTree rg_exact(const DistanceMatrix& D, const RgOptions& options) { return rg_exact_detailed(D, options).tree; }

// ---------------------------------------------------------------- relaxed

namespace {

struct RelaxedState {
  Table table;
  double tau;
  std::vector<NodeId> Yold;
  std::map<NodeId, std::vector<NodeId>> children;  // new hidden -> children

  std::vector<NodeId> witnesses(NodeId i, NodeId j) const {
    std::vector<NodeId> out;
    for (NodeId k : Yold) {
      if (k == i || k == j) continue;
      const double dik = table(i, k);
      const double djk = table(j, k);
      if (std::isfinite(dik) && std::isfinite(djk) && std::max(dik, djk) < tau) out.push_back(k);
    }
    return out;
  }
};

// Averaged distance from child i to its new parent h.
double child_parent_distance(const RelaxedState& s, NodeId i, const std::vector<NodeId>& kids) {
  double sum = 0.0;
  int terms = 0;
  for (NodeId j : kids) {
    if (j == i) continue;
    const double dij = s.table(i, j);
    if (!std::isfinite(dij)) continue;
    const auto K = s.witnesses(i, j);
    if (K.empty()) continue;
    double phi = 0.0;
    for (NodeId k : K) phi += s.table(i, k) - s.table(j, k);
    sum += dij + phi / static_cast<double>(K.size());
    ++terms;
  }
  if (terms > 0) return std::max(0.0, sum / (2.0 * terms));
  // No admissible witness: single pair with the nearest sibling and nearest witness.
  NodeId j = i;
  for (NodeId c : kids)
    if (c != i && (j == i || s.table(i, c) < s.table(i, j))) j = c;
  NodeId k = i;
  double best = kInfinity;
  for (NodeId c : s.Yold) {
    if (c == i || c == j) continue;
    const double w = std::max(s.table(i, c), s.table(j, c));
    if (k == i || w < best) {
      k = c;
      best = w;
    }
  }
  const double dij = s.table(i, j);
  if (!std::isfinite(dij)) return 0.0;
  if (k == i || !std::isfinite(best)) return 0.5 * dij;
  return std::clamp(0.5 * (dij + s.table(i, k) - s.table(j, k)), 0.0, dij);
}

void hidden_to_others(RelaxedState& s, const std::vector<NodeId>& Ynew) {
  auto is_old = [&](NodeId v) { return std::binary_search(s.Yold.begin(), s.Yold.end(), v); };
  for (const auto& [h, kids] : s.children) {
    for (NodeId k : Ynew) {
      if (k == h) continue;
      double sum = 0.0;
      int terms = 0;
      if (is_old(k)) {
        for (NodeId i : kids) {
          const double v = s.table(i, k) - s.table(i, h);
          if (std::isfinite(v)) {
            sum += v;
            ++terms;
          }
        }
      } else {
        for (NodeId i : kids) {
          for (NodeId j : s.children.at(k)) {
            const double v = s.table(i, j) - s.table(i, h) - s.table(j, k);
            if (std::isfinite(v)) {
              sum += v;
              ++terms;
            }
          }
        }
      }
      s.table.set(h, k, terms > 0 ? std::max(0.0, sum / terms) : kInfinity);
    }
  }
}

}  // namespace

RgResult rg_relaxed_detailed(const DistanceMatrix& D, const RelaxationConfig& config, const RgOptions& options) {
  check_labels(D);
  RgResult result;
  RelaxedState s{Table(D), config.tau, {}, {}};
  LatentTree& tree = result.tree;
  std::vector<NodeId> Y = D.labels;
  std::sort(Y.begin(), Y.end());
  for (NodeId v : Y) tree.add_node(v);
  NodeId next_hidden = first_hidden_id(D, options);
  const double parent_eps = config.epsilon ? *config.epsilon : config.cluster_floor;
  const double big_length = 2.0 * std::max(1.0, D.max_finite());
  auto length = [&](NodeId a, NodeId b) { return finite_or(s.table(a, b), big_length); };

  while (Y.size() >= 3) {
    ++result.iterations;
    s.Yold = Y;
    s.children.clear();
    const auto n = static_cast<int>(Y.size());

    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::vector<bool>> defined(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n), false));
    double max_lambda = 0.0;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        const NodeId i = Y[static_cast<std::size_t>(a)];
        const NodeId j = Y[static_cast<std::size_t>(b)];
        const double dij = s.table(i, j);
        if (!(dij < config.tau) || !std::isfinite(dij)) continue;
        const auto K = s.witnesses(i, j);
        if (K.empty()) continue;
        double lo = kInfinity;
        double hi = -kInfinity;
        for (NodeId k : K) {
          const double phi = s.table(i, k) - s.table(j, k);
          lo = std::min(lo, phi);
          hi = std::max(hi, phi);
        }
        lambda(a, b) = lambda(b, a) = hi - lo;
        defined[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
        defined[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = true;
        max_lambda = std::max(max_lambda, hi - lo);
      }
    }

    std::vector<std::vector<int>> blocks;
    if (config.epsilon) {
      UnionFind uf(static_cast<std::size_t>(n));
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
          if (defined[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] && lambda(a, b) < *config.epsilon) uf.unite(a, b);
      blocks = blocks_of(uf, static_cast<std::size_t>(n));
    } else {
      const double undefined = 2.0 * max_lambda + (std::isfinite(config.tau) ? config.tau : 1.0) + config.cluster_floor;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          if (a != b && !defined[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) lambda(a, b) = undefined;
      blocks = cluster_families(lambda, config.cluster_floor, config.seed + result.iterations);
    }

    std::vector<NodeId> Ynew;
    bool progress = false;
    for (const auto& block_idx : blocks) {
      std::vector<NodeId> block;
      for (int p : block_idx) block.push_back(Y[static_cast<std::size_t>(p)]);
      if (block.size() == 1) {
        Ynew.push_back(block.front());
        continue;
      }
      progress = true;
      std::optional<NodeId> parent;
      double parent_dev = kInfinity;
      for (NodeId u : block) {
        double dev = 0.0;
        if (block.size() >= 3) {
          for (NodeId i : block)
            for (NodeId j : block)
              if (i < j && i != u && j != u) dev = std::max(dev, std::abs(s.table(i, u) + s.table(u, j) - s.table(i, j)));
        } else {
          const NodeId i = block[0] == u ? block[1] : block[0];
          const auto K = s.witnesses(i, u);
          if (K.empty()) dev = kInfinity;
          for (NodeId k : K) dev = std::max(dev, std::abs(s.table(i, u) + s.table(u, k) - s.table(i, k)));
        }
        if (!std::isfinite(dev)) continue;
        if (dev < parent_eps && dev < parent_dev) {
          parent = u;
          parent_dev = dev;
        }
      }
      if (parent) {
        for (NodeId v : block)
          if (v != *parent) tree.add_edge(*parent, v, length(*parent, v));
        Ynew.push_back(*parent);
        continue;
      }
      const NodeId h = next_hidden--;
      s.table.add(h);
      tree.add_node(h);
      s.children[h] = block;
      Ynew.push_back(h);
    }

    if (!progress) {
      // Degenerate input: hang every active node off one new hidden node.
      const NodeId h = next_hidden--;
      s.table.add(h);
      tree.add_node(h);
      s.children[h] = Y;
      Ynew = {h};
    }

    for (const auto& [h, kids] : s.children)
      for (NodeId i : kids) s.table.set(i, h, child_parent_distance(s, i, kids));
    std::sort(Ynew.begin(), Ynew.end());
    hidden_to_others(s, Ynew);
    for (const auto& [h, kids] : s.children)
      for (NodeId c : kids) tree.add_edge(h, c, length(c, h));
    Y = std::move(Ynew);
  }
  if (Y.size() == 2) {
    ++result.iterations;
    tree.add_edge(Y[0], Y[1], length(Y[0], Y[1]));
  }
  result.distances = path_distances(tree, tree.nodes());
  result.distances.source = D.source;
  return result;
}

LatentTree rg_relaxed(const DistanceMatrix& D, const RelaxationConfig& config, const RgOptions& options) {
  return rg_relaxed_detailed(D, config, options).tree;
}

}  // namespace latree
