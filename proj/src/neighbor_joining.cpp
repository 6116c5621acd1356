#include "latree/neighbor_joining.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "latree/error.hpp"

namespace latree {

LatentTree nj(const DistanceMatrix& D, const NjOptions& options) {
  const auto m = static_cast<std::size_t>(D.size());
  if (m < 3) throw Error(ErrorKind::TooFewNodes, "neighbor joining needs at least three nodes");
  if (!D.all_finite()) throw Error(ErrorKind::InfiniteDistance, "neighbor joining needs finite distances");

  std::vector<NodeId> active = D.labels;
  std::sort(active.begin(), active.end());
  std::vector<std::vector<double>> d(m, std::vector<double>(m));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) d[a][b] = D(active[a], active[b]);

  NodeId next_hidden = options.first_hidden.value_or(std::min<NodeId>(0, active.front()) - 1);
  LatentTree tree;
  for (NodeId v : active) tree.add_node(v);

  while (active.size() > 3) {
    const std::size_t r = active.size();
    std::vector<double> S(r, 0.0);
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t b = 0; b < r; ++b) S[a] += d[a][b];
    std::size_t bi = 0;
    std::size_t bj = 1;
    double best = kInfinity;
    for (std::size_t a = 0; a < r; ++a) {
      for (std::size_t b = a + 1; b < r; ++b) {
        const double q = static_cast<double>(r - 2) * d[a][b] - S[a] - S[b];
        if (q < best) {
          best = q;
          bi = a;
          bj = b;
        }
      }
    }
    const double dij = d[bi][bj];
    const double li = 0.5 * dij + (S[bi] - S[bj]) / (2.0 * static_cast<double>(r - 2));
    const double lj = dij - li;
    const NodeId u = next_hidden--;
    tree.add_edge(u, active[bi], li);
    tree.add_edge(u, active[bj], lj);

    std::vector<double> du(r);
    for (std::size_t k = 0; k < r; ++k) du[k] = 0.5 * (d[bi][k] + d[bj][k] - dij);
    // Replace row bi with u, drop row bj.
    for (std::size_t k = 0; k < r; ++k) {
      d[bi][k] = d[k][bi] = du[k];
    }
    d[bi][bi] = 0.0;
    active[bi] = u;
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    d.erase(d.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : d) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  const NodeId h = next_hidden--;
  const double l0 = 0.5 * (d[0][1] + d[0][2] - d[1][2]);
  const double l1 = 0.5 * (d[0][1] + d[1][2] - d[0][2]);
  const double l2 = 0.5 * (d[0][2] + d[1][2] - d[0][1]);
  tree.add_edge(h, active[0], l0);
  tree.add_edge(h, active[1], l1);
  tree.add_edge(h, active[2], l2);
  return tree;
}

LatentTree contract_short_edges(const LatentTree& tree, double threshold, const std::set<NodeId>& pinned) {
  LatentTree out = tree;
  while (true) {
    const Edge* pick = nullptr;
    double shortest = kInfinity;
    const auto edges = out.edges();
    for (const Edge& e : edges) {
      const bool fixed_u = is_observed(e.u) || pinned.count(e.u);
      const bool fixed_v = is_observed(e.v) || pinned.count(e.v);
      if (fixed_u && fixed_v) continue;
      const auto len = out.length(e.u, e.v);
      const double l = len ? std::max(0.0, *len) : kInfinity;
      if (l < threshold && l < shortest) {
        shortest = l;
        pick = &e;
      }
    }
    if (!pick) return out;
    NodeId keep = pick->u;
    NodeId drop = pick->v;
    const bool fixed_keep = is_observed(keep) || pinned.count(keep);
    const bool fixed_drop = is_observed(drop) || pinned.count(drop);
    if (fixed_drop || (!fixed_keep && keep < drop)) std::swap(keep, drop);
    out = contract_edge(out, keep, drop);
  }
}

LatentTree nj_relaxed(const DistanceMatrix& D, double epsilon_prime, const NjOptions& options) {
  return contract_short_edges(nj(D, options), epsilon_prime);
}

}  // namespace latree
