#include "latree/clgrouping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "latree/error.hpp"
#include "latree/neighbor_joining.hpp"

namespace latree {

LatentTree mst_observed(const DistanceMatrix& D) {
  const auto m = static_cast<std::size_t>(D.size());
  std::vector<NodeId> ids = D.labels;
  std::sort(ids.begin(), ids.end());
  std::vector<std::tuple<double, NodeId, NodeId>> cand;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const double d = D(ids[a], ids[b]);
      if (std::isfinite(d)) cand.emplace_back(d, ids[a], ids[b]);
    }
  std::sort(cand.begin(), cand.end());

  std::map<NodeId, NodeId> parent;
  for (NodeId v : ids) parent[v] = v;
  auto find = [&](NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  LatentTree tree;
  for (NodeId v : ids) tree.add_node(v);
  for (const auto& [d, u, v] : cand) {
    const NodeId ru = find(u);
    const NodeId rv = find(v);
    if (ru == rv) continue;
    parent[std::max(ru, rv)] = std::min(ru, rv);
    tree.add_edge(u, v, d);
    if (tree.edge_count() + 1 == m) break;
  }
  if (m > 0 && tree.edge_count() + 1 != m) {
    throw Error(ErrorKind::Disconnected, "infinite distances disconnect the observed nodes");
  }
  return tree;
}

SurrogateMap surrogate_map(const LatentTree& tree, const DistanceMatrix& D) {
  SurrogateMap out;
  const auto observed = tree.observed();
  const double tol = 1e-12 * std::max(1.0, D.max_finite());
  for (NodeId v : tree.nodes()) {
    NodeId best = observed.front();
    double best_d = D(v, best);
    for (NodeId j : observed) {
      const double d = D(v, j);
      if (d < best_d - tol) {
        best = j;
        best_d = d;
      }
    }
    out.surrogate[v] = best;
    out.inverse[best].insert(v);
  }
  return out;
}

SurrogateMap surrogate_map(const TreeModel& model) {
  const LatentTree& tree = tree_of(model);
  return surrogate_map(tree, exact_distance_matrix(model, tree.nodes()));
}

namespace {

std::vector<NodeId> internal_nodes(const LatentTree& mst) {
  std::vector<NodeId> out;
  for (NodeId v : mst.nodes())
    if (mst.degree(v) >= 2) out.push_back(v);
  std::stable_sort(out.begin(), out.end(), [&](NodeId a, NodeId b) { return mst.degree(a) > mst.degree(b); });
  return out;
}

}  // namespace

LatentTree cl_blind(const LatentTree& mst) {
  LatentTree out;
  for (NodeId v : mst.nodes()) out.add_node(v, mst.label(v));
  for (const Edge& e : mst.edges()) out.add_edge(e.u, e.v);
  NodeId next = -1;
  for (NodeId v : mst.nodes()) next = std::min(next, v - 1);
  for (NodeId i : internal_nodes(mst)) {
    const NodeId h = next--;
    const auto nbrs = out.neighbors(i);
    for (NodeId y : nbrs) {
      out.remove_edge(i, y);
      out.add_edge(h, y);
    }
    out.add_edge(h, i);
  }
  return out;
}

namespace {

// Distances over every node created so far, keyed by id.
struct Distances {
  std::map<NodeId, std::map<NodeId, double>> d;
  double get(NodeId a, NodeId b) const {
    if (a == b) return 0.0;
    return d.at(a).at(b);
  }
  void set(NodeId a, NodeId b, double v) {
    d[a][b] = v;
    d[b][a] = v;
  }
};

// Nodes hanging off each neighbour y of `center` (y itself included).
std::map<NodeId, std::vector<NodeId>> branches(const LatentTree& tree, NodeId center) {
  std::map<NodeId, std::vector<NodeId>> out;
  for (NodeId y : tree.neighbors(center)) {
    std::vector<NodeId> stack{y};
    std::set<NodeId> seen{center, y};
    auto& list = out[y];
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      list.push_back(u);
      for (NodeId w : tree.neighbors(u))
        if (seen.insert(w).second) stack.push_back(w);
    }
  }
  return out;
}

}  // namespace

ClgResult clgrouping_detailed(const DistanceMatrix& D, const ClgOptions& options) {
  ClgResult result;
  result.mst = mst_observed(D);
  LatentTree& tree = result.tree;
  tree = result.mst;
  for (NodeId v : D.labels)
    if (!D.names.empty()) tree.set_label(v, D.names[static_cast<std::size_t>(D.index_of(v))]);

  Distances dist;
  for (NodeId a : D.labels)
    for (NodeId b : D.labels)
      if (a != b) dist.d[a][b] = D(a, b);

  NodeId next_hidden = -1;
  for (NodeId v : D.labels) next_hidden = std::min(next_hidden, v - 1);

  const bool relaxed = options.mode == Mode::Relaxed;
  const double finite_cap = 2.0 * std::max(1.0, D.max_finite());
  const std::vector<NodeId> order = options.visit_order ? *options.visit_order : internal_nodes(result.mst);

  for (NodeId i : order) {
    if (!tree.has_node(i) || tree.degree(i) < 2) continue;
    std::vector<NodeId> nbd = tree.neighbors(i);
    nbd.push_back(i);
    std::sort(nbd.begin(), nbd.end());

    DistanceMatrix local(nbd);
    local.source = D.source;
    local.sample_count = D.sample_count;
    for (NodeId a : nbd)
      for (NodeId b : nbd)
        if (a != b) local.set(a, b, dist.get(a, b));

    LatentTree S;
    if (options.sub == Subroutine::RG) {
      RgOptions rg;
      rg.first_hidden = next_hidden;
      S = relaxed ? rg_relaxed(local, options.config, rg) : rg_exact(local, rg);
    } else {
      NjOptions njo;
      njo.first_hidden = next_hidden;
      if (relaxed)
        for (Eigen::Index a = 0; a < local.d.size(); ++a)
          if (!std::isfinite(local.d.data()[a])) local.d.data()[a] = finite_cap;
      const std::set<NodeId> pinned(nbd.begin(), nbd.end());
      S = contract_short_edges(nj(local, njo), relaxed ? options.config.epsilon_prime : kExactContraction, pinned);
    }

    SpliceStep step;
    step.center = i;
    step.neighborhood = nbd;
    for (NodeId h : S.hidden())
      if (!tree.has_node(h)) step.introduced.push_back(h);
    for (NodeId h : step.introduced) next_hidden = std::min(next_hidden, h - 1);
    std::sort(step.introduced.begin(), step.introduced.end(), std::greater<>());

    // Distances from each new hidden node to every node outside nbd.
    const auto hang = branches(tree, i);
    const DistanceMatrix inS = path_distances(S, S.nodes());
    for (NodeId h : step.introduced) {
      for (NodeId h2 : S.nodes())
        if (h2 != h) dist.set(h, h2, std::max(0.0, inS(h, h2)));
      for (const auto& [y, members] : hang) {
        // Nodes of nbd whose S-path to y passes through h.
        std::vector<NodeId> through;
        for (NodeId a : nbd) {
          if (a == y) continue;
          for (const Step& st : path(S, a, y))
            if (st.second == h) {
              through.push_back(a);
              break;
            }
        }
        for (NodeId x : members) {
          if (x == y) continue;
          double sum = 0.0;
          int terms = 0;
          for (NodeId a : through) {
            const double v = dist.get(a, x) - inS(a, h);
            if (std::isfinite(v)) {
              sum += v;
              ++terms;
            }
          }
          dist.set(h, x, terms > 0 ? std::max(0.0, sum / terms) : kInfinity);
        }
      }
    }

    const std::vector<NodeId> old_nbrs = tree.neighbors(i);
    for (NodeId y : old_nbrs) tree.remove_edge(i, y);
    for (const Edge& e : S.edges()) tree.add_edge(e.u, e.v, S.length(e.u, e.v));
    result.trace.push_back(std::move(step));
  }

  if (relaxed) tree = contract_short_edges(tree, options.config.epsilon_prime);
  return result;
}

LatentTree clgrouping(const DistanceMatrix& D, const ClgOptions& options) {
  return clgrouping_detailed(D, options).tree;
}

}  // namespace latree
