#include "latree/reg_clgrouping.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "latree/distances.hpp"
#include "latree/error.hpp"
#include "latree/neighbor_joining.hpp"

namespace latree {

namespace {

constexpr double kLongEdge = 50.0;

struct Local {
  LatentTree S;
  NodeId center = 0;
  std::vector<NodeId> introduced;
  std::optional<GeneralDiscreteTreeModel> em;
};

double clamp_length(double d) { return std::isfinite(d) ? std::max(d, kMinEdgeLength) : kLongEdge; }

// Parameters for `tree`: edges between sampled nodes come from the augmented
// samples, edges touching a new hidden node from the local subtree.
TreeModel fit(const LatentTree& tree, const SampleMatrix& aug, const DistanceMatrix& D, const RegOptions& opt,
              const Local* local) {
  auto sampled = [&](const Edge& e) { return aug.has_column(e.u) && aug.has_column(e.v); };
  switch (opt.family) {
    case Family::Gaussian: {
      GaussianTreeModel g;
      g.tree = tree;
      std::map<NodeId, double> gauge;
      if (local)
        for (NodeId a : local->S.nodes())
          gauge[a] = (a == local->center || !D.contains(a) || D.sign_of(local->center, a) >= 0) ? 1.0 : -1.0;
      for (const Edge& e : tree.edges()) {
        if (sampled(e)) {
          g.rho[e] = D.sign_of(e.u, e.v) * std::exp(-clamp_length(D(e.u, e.v)));
        } else {
          const double s = gauge.at(e.u) * gauge.at(e.v);
          g.rho[e] = s * std::exp(-clamp_length(*local->S.length(e.u, e.v)));
        }
      }
      return g;
    }
    case Family::Symmetric: {
      LatentTree t = tree;
      for (const Edge& e : tree.edges())
        t.set_length(e.u, e.v, sampled(e) ? clamp_length(D(e.u, e.v)) : clamp_length(*local->S.length(e.u, e.v)));
      return symmetric_from_lengths(t, opt.K);
    }
    case Family::Discrete: {
      std::map<Edge, Eigen::MatrixXd> joints;
      std::map<Edge, Eigen::MatrixXd> local_joints;
      if (local && local->em) local_joints = edge_joints(*local->em);
      for (const Edge& e : tree.edges()) {
        if (sampled(e))
          joints[e] = empirical_joint(aug, aug.column_index(e.u), aug.column_index(e.v), opt.K, opt.em.smoothing);
        else
          joints[e] = local_joints.at(e);
      }
      return general_from_joints(tree, opt.K, tree.nodes().front(), joints);
    }
  }
  throw Error(ErrorKind::InvalidSpec, "unknown family");
}

Local local_subtree(const LatentTree& tree, NodeId center, const DistanceMatrix& D, const SampleMatrix& aug,
                    const RegOptions& opt, NodeId next_hidden) {
  std::vector<NodeId> nbd = tree.neighbors(center);
  nbd.push_back(center);
  std::sort(nbd.begin(), nbd.end());
  DistanceMatrix sub = D.subset(nbd);

  Local out;
  out.center = center;
  if (opt.sub == Subroutine::RG) {
    RgOptions rg;
    rg.first_hidden = next_hidden;
    out.S = rg_relaxed(sub, opt.config, rg);
  } else {
    const double cap = 2.0 * std::max(1.0, sub.max_finite());
    for (Eigen::Index a = 0; a < sub.d.size(); ++a)
      if (!std::isfinite(sub.d.data()[a])) sub.d.data()[a] = cap;
    NjOptions njo;
    njo.first_hidden = next_hidden;
    const std::set<NodeId> pinned(nbd.begin(), nbd.end());
    out.S = contract_short_edges(nj(sub, njo), opt.config.epsilon_prime, pinned);
  }
  for (NodeId h : out.S.hidden())
    if (!tree.has_node(h)) out.introduced.push_back(h);
  std::sort(out.introduced.begin(), out.introduced.end(), std::greater<>());
  if (!out.introduced.empty() && opt.family == Family::Discrete) {
    EmOptions em = opt.em;
    em.K = opt.K;
    out.em = em_fit(out.S, aug.select(nbd), em).model;
  }
  return out;
}

LatentTree splice(const LatentTree& tree, const Local& local) {
  LatentTree out = tree;
  const std::vector<NodeId> old_nbrs = out.neighbors(local.center);
  for (NodeId y : old_nbrs) out.remove_edge(local.center, y);
  for (const Edge& e : local.S.edges()) out.add_edge(e.u, e.v, local.S.length(e.u, e.v));
  return out;
}

std::vector<NodeId> internal_observed(const LatentTree& mst) {
  std::vector<NodeId> out;
  for (NodeId v : mst.nodes())
    if (mst.degree(v) >= 2) out.push_back(v);
  return out;
}

}  // namespace

RegResult reg_clgrouping(const SampleMatrix& samples, const RegOptions& options) {
  if (samples.n() < 2) throw Error(ErrorKind::TooFewNodes, "need at least two samples");
  const int K = options.family == Family::Gaussian ? 0 : options.K;
  const double smoothing = options.family == Family::Discrete ? options.em.smoothing : 0.0;

  RegResult result;
  SampleMatrix aug = samples;
  DistanceMatrix D = estimate_distances(aug, options.family, K, false, smoothing);
  result.tree = mst_observed(D);
  for (NodeId v : result.tree.nodes())
    if (!samples.names.empty()) result.tree.set_label(v, samples.names[static_cast<std::size_t>(samples.column_index(v))]);
  result.model = fit(result.tree, aug, D, options, nullptr);
  result.chow_liu = bic(result.model, samples);
  BicReport current = result.chow_liu;

  const std::vector<NodeId> candidates = internal_observed(result.tree);
  std::set<NodeId> visited;
  NodeId next_hidden = -1;
  std::uint64_t draw = 0;

  while (!options.max_hidden || result.tree.hidden_count() < *options.max_hidden) {
    const double approx_now = bic(result.model, aug).bic;
    struct Scored {
      double gain;
      Local local;
      LatentTree tree;
      TreeModel model;
      double approx;
    };
    std::vector<Scored> ranked;
    for (NodeId i : candidates) {
      if (visited.count(i) || result.tree.degree(i) < 2) continue;
      Local local = local_subtree(result.tree, i, D, aug, options, next_hidden);
      if (local.introduced.empty()) continue;
      if (options.max_hidden && result.tree.hidden_count() + local.introduced.size() > *options.max_hidden) continue;
      LatentTree cand = splice(result.tree, local);
      TreeModel model = fit(cand, aug, D, options, &local);
      const double approx = bic(model, aug).bic;
      if (approx > approx_now)
        ranked.push_back({approx - approx_now, std::move(local), std::move(cand), std::move(model), approx});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const Scored& a, const Scored& b) { return a.gain > b.gain; });

    bool accepted = false;
    for (Scored& s : ranked) {
      const BicReport exact = bic(s.model, samples);
      if (!(exact.bic > current.bic)) continue;
      visited.insert(s.local.center);
      next_hidden = std::min(next_hidden, s.local.introduced.back() - 1);
      result.steps.push_back({s.local.center, s.local.introduced, s.approx, exact.bic});
      result.tree = std::move(s.tree);
      result.model = std::move(s.model);
      current = exact;
      accepted = true;
      break;
    }
    if (!accepted) break;
    aug = posterior_sample_hidden(result.model, samples, options.seed + draw++);
    D = estimate_distances(aug, options.family, K, false, smoothing);
  }

  if (options.family == Family::Discrete && result.tree.hidden_count() > 0) {
    EmOptions em = options.em;
    em.K = options.K;
    EmResult refined = em_fit(std::get<GeneralDiscreteTreeModel>(result.model), samples, em);
    result.model = std::move(refined.model);
  }
  result.final = bic(result.model, samples);
  return result;
}

}  // namespace latree
