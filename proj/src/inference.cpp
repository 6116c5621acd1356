#include "latree/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "latree/error.hpp"
#include "rooting.hpp"

namespace latree {

using detail::root_tree;
using detail::Rooting;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-model precomputation shared by all samples.
struct Plan {
  Rooting r;
  int K = 2;
  std::vector<const Eigen::MatrixXd*> cond;  // by position; nullptr at the root
};

// Points the plan's conditionals at `model`, which must share its rooting.
void bind(Plan& p, const GeneralDiscreteTreeModel& model) {
  p.cond.assign(p.r.order.size(), nullptr);
  for (std::size_t q = 1; q < p.r.order.size(); ++q) {
    const NodeId par = p.r.order[static_cast<std::size_t>(p.r.parent[q])];
    auto it = model.conditional.find({par, p.r.order[q]});
    if (it == model.conditional.end()) throw Error(ErrorKind::InvalidTree, "conditional missing for an edge");
    p.cond[q] = &it->second;
  }
}

Plan make_plan(const GeneralDiscreteTreeModel& model) {
  Plan p;
  p.r = root_tree(model.tree, model.root);
  p.K = model.K;
  bind(p, model);
  return p;
}

// Evidence positions: clamp[q] = state or -1.
std::vector<int> clamp_of(const Plan& plan, const std::vector<NodeId>& columns, const Eigen::VectorXi& values) {
  std::vector<int> clamp(plan.r.order.size(), -1);
  for (std::size_t k = 0; k < columns.size(); ++k) {
    auto it = plan.r.pos.find(columns[k]);
    if (it == plan.r.pos.end()) throw Error(ErrorKind::UnknownNode, "column " + std::to_string(columns[k]) + " not in tree");
    const int v = values(static_cast<Eigen::Index>(k));
    if (v < 0 || v >= plan.K) throw Error(ErrorKind::AlphabetViolation, "state " + std::to_string(v));
    clamp[static_cast<std::size_t>(it->second)] = v;
  }
  return clamp;
}

// Upward pass. beta[q] = evidence below and at q (scaled); up[q] = message to
// the parent (scaled). Returns log p(evidence).
struct Upward {
  std::vector<Eigen::VectorXd> beta;
  std::vector<Eigen::VectorXd> up;
  double loglik = 0.0;
};

Upward upward(const Plan& plan, const GeneralDiscreteTreeModel& model, const std::vector<int>& clamp) {
  const std::size_t N = plan.r.order.size();
  Upward u;
  u.beta.resize(N);
  u.up.resize(N);
  double log_scale = 0.0;
  for (std::size_t q = N; q-- > 0;) {
    Eigen::VectorXd b;
    if (clamp[q] >= 0) {
      b = Eigen::VectorXd::Zero(plan.K);
      b(clamp[q]) = 1.0;
    } else {
      b = Eigen::VectorXd::Ones(plan.K);
    }
    for (int c : plan.r.children[q]) b.array() *= u.up[static_cast<std::size_t>(c)].array();
    u.beta[q] = b;
    if (q == 0) break;
    Eigen::VectorXd m = (*plan.cond[q]) * b;
    const double s = m.sum();
    if (!(s > 0.0)) {
      u.loglik = kNegInf;
      return u;
    }
    u.up[q] = m / s;
    log_scale += std::log(s);
  }
  const double z = model.root_marginal.dot(u.beta[0]);
  u.loglik = (z > 0.0) ? std::log(z) + log_scale : kNegInf;
  return u;
}

// Full posteriors given an upward pass. Edge posteriors are filled when
// `edges` is set; node posteriors always.
void downward(const Plan& plan, const GeneralDiscreteTreeModel& model, const std::vector<int>& clamp,
              const Upward& u, std::vector<Eigen::VectorXd>& node, std::vector<Eigen::MatrixXd>* edges) {
  const std::size_t N = plan.r.order.size();
  std::vector<Eigen::VectorXd> alpha(N);  // p(x_q, evidence outside subtree(q)), scaled
  node.assign(N, Eigen::VectorXd());
  if (edges) edges->assign(N, Eigen::MatrixXd());
  alpha[0] = model.root_marginal;
  for (std::size_t q = 0; q < N; ++q) {
    Eigen::VectorXd post = alpha[q].cwiseProduct(u.beta[q]);
    node[q] = post / post.sum();
    const auto& kids = plan.r.children[q];
    if (kids.empty()) continue;
    Eigen::VectorXd ev = Eigen::VectorXd::Ones(plan.K);
    if (clamp[q] >= 0) {
      ev.setZero();
      ev(clamp[q]) = 1.0;
    }
    // Messages from all children but one, via prefix/suffix products.
    const std::size_t nk = kids.size();
    std::vector<Eigen::VectorXd> prefix(nk + 1, Eigen::VectorXd::Ones(plan.K));
    std::vector<Eigen::VectorXd> suffix(nk + 1, Eigen::VectorXd::Ones(plan.K));
    for (std::size_t k = 0; k < nk; ++k)
      prefix[k + 1] = prefix[k].cwiseProduct(u.up[static_cast<std::size_t>(kids[k])]);
    for (std::size_t k = nk; k-- > 0;)
      suffix[k] = suffix[k + 1].cwiseProduct(u.up[static_cast<std::size_t>(kids[k])]);
    for (std::size_t k = 0; k < nk; ++k) {
      const auto c = static_cast<std::size_t>(kids[k]);
      Eigen::VectorXd excl = alpha[q].cwiseProduct(ev).cwiseProduct(prefix[k]).cwiseProduct(suffix[k + 1]);
      const double s = excl.sum();
      if (s > 0) excl /= s;
      const Eigen::MatrixXd& C = *plan.cond[c];
      Eigen::VectorXd a = C.transpose() * excl;
      const double sa = a.sum();
      alpha[c] = sa > 0 ? Eigen::VectorXd(a / sa) : a;
      if (edges) {
        Eigen::MatrixXd E = excl.asDiagonal() * C * u.beta[c].asDiagonal();
        const double se = E.sum();
        (*edges)[c] = se > 0 ? Eigen::MatrixXd(E / se) : E;
      }
    }
  }
}

}  // namespace

PatternSet compress(const SampleMatrix& samples) {
  PatternSet out;
  out.columns = samples.columns;
  const auto n = samples.n();
  const auto m = samples.m();
  std::map<std::vector<int>, double> counts;
  std::vector<int> row(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < m; ++k) row[static_cast<std::size_t>(k)] = static_cast<int>(samples.data(i, k));
    counts[row] += 1.0;
  }
  out.patterns.resize(static_cast<Eigen::Index>(counts.size()), m);
  out.weights.resize(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index r = 0;
  for (const auto& [pattern, w] : counts) {
    for (Eigen::Index k = 0; k < m; ++k) out.patterns(r, k) = pattern[static_cast<std::size_t>(k)];
    out.weights(r) = w;
    ++r;
  }
  return out;
}

Posteriors posteriors(const GeneralDiscreteTreeModel& model, const std::vector<NodeId>& columns,
                      const Eigen::VectorXi& values) {
  const Plan plan = make_plan(model);
  const auto clamp = clamp_of(plan, columns, values);
  const Upward u = upward(plan, model, clamp);
  Posteriors out;
  out.log_likelihood = u.loglik;
  if (!std::isfinite(u.loglik)) return out;
  std::vector<Eigen::VectorXd> node;
  std::vector<Eigen::MatrixXd> edges;
  downward(plan, model, clamp, u, node, &edges);
  for (std::size_t q = 0; q < plan.r.order.size(); ++q) {
    out.node[plan.r.order[q]] = node[q];
    if (q > 0) out.edge[{plan.r.order[static_cast<std::size_t>(plan.r.parent[q])], plan.r.order[q]}] = edges[q];
  }
  return out;
}

double log_probability(const GeneralDiscreteTreeModel& model, const std::vector<NodeId>& columns,
                       const Eigen::VectorXi& values) {
  const Plan plan = make_plan(model);
  return upward(plan, model, clamp_of(plan, columns, values)).loglik;
}

namespace {

double gaussian_loglik(const GaussianTreeModel& model, const SampleMatrix& samples) {
  const Eigen::MatrixXd sigma = covariance(model, samples.columns);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularCovariance, "model covariance is singular");
  const double m = static_cast<double>(samples.m());
  const double n = static_cast<double>(samples.n());
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Eigen::MatrixXd z = llt.matrixL().solve(samples.data.transpose());
  return -0.5 * n * (m * std::log(2.0 * std::numbers::pi) + logdet) - 0.5 * z.squaredNorm();
}

double discrete_loglik(const GeneralDiscreteTreeModel& model, const SampleMatrix& samples) {
  const PatternSet ps = compress(samples);
  const Plan plan = make_plan(model);
  double total = 0.0;
  for (Eigen::Index r = 0; r < ps.patterns.rows(); ++r) {
    const Eigen::VectorXi row = ps.patterns.row(r).transpose();
    const double lp = upward(plan, model, clamp_of(plan, ps.columns, row)).loglik;
    if (!std::isfinite(lp)) return kNegInf;
    total += ps.weights(r) * lp;
  }
  return total;
}

}  // namespace

double loglikelihood(const TreeModel& model, const SampleMatrix& samples) {
  if (const auto* g = std::get_if<GaussianTreeModel>(&model)) return gaussian_loglik(*g, samples);
  samples.validate();
  return discrete_loglik(to_general(model), samples);
}

// --------------------------------------------------------------------- EM

GeneralDiscreteTreeModel em_initial_model(const LatentTree& structure, int K, std::uint64_t seed) {
  if (K < 2) throw Error(ErrorKind::DegenerateParameter, "alphabet must have at least two symbols");
  structure.validate();
  GeneralDiscreteTreeModel out;
  out.tree = structure;
  out.K = K;
  out.root = structure.nodes().front();
  out.root_marginal = Eigen::VectorXd::Constant(K, 1.0 / K);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> eps(0.1, 0.3);
  const Rooting r = root_tree(structure, out.root);
  for (std::size_t q = 1; q < r.order.size(); ++q) {
    const double e = eps(rng);
    Eigen::MatrixXd C = Eigen::MatrixXd::Constant(K, K, e / (K - 1));
    C.diagonal().setConstant(1.0 - e);
    out.conditional[{r.order[static_cast<std::size_t>(r.parent[q])], r.order[q]}] = C;
  }
  return out;
}

namespace {

struct Stats {
  double loglik = 0.0;
  Eigen::VectorXd root;
  std::vector<Eigen::MatrixXd> edge;  // by position
};

Stats e_step(Plan plan, const GeneralDiscreteTreeModel& model, const PatternSet& ps) {
  bind(plan, model);
  const std::size_t N = plan.r.order.size();
  Stats s;
  s.root = Eigen::VectorXd::Zero(plan.K);
  s.edge.assign(N, Eigen::MatrixXd::Zero(plan.K, plan.K));
  std::vector<Eigen::VectorXd> node;
  std::vector<Eigen::MatrixXd> edges;
  for (Eigen::Index r = 0; r < ps.patterns.rows(); ++r) {
    const Eigen::VectorXi row = ps.patterns.row(r).transpose();
    const auto clamp = clamp_of(plan, ps.columns, row);
    const Upward u = upward(plan, model, clamp);
    if (!std::isfinite(u.loglik)) {
      s.loglik = kNegInf;
      continue;
    }
    const double w = ps.weights(r);
    s.loglik += w * u.loglik;
    downward(plan, model, clamp, u, node, &edges);
    s.root += w * node[0];
    for (std::size_t q = 1; q < N; ++q) s.edge[q] += w * edges[q];
  }
  return s;
}

GeneralDiscreteTreeModel m_step(const Plan& plan, const GeneralDiscreteTreeModel& like, const Stats& s,
                                double smoothing) {
  GeneralDiscreteTreeModel out = like;
  Eigen::VectorXd root = s.root.array() + smoothing;
  out.root_marginal = root / root.sum();
  for (std::size_t q = 1; q < plan.r.order.size(); ++q) {
    Eigen::MatrixXd C = s.edge[q].array() + smoothing;
    for (Eigen::Index a = 0; a < C.rows(); ++a) {
      const double rs = C.row(a).sum();
      C.row(a) /= rs;
    }
    out.conditional[{plan.r.order[static_cast<std::size_t>(plan.r.parent[q])], plan.r.order[q]}] = C;
  }
  return out;
}

}  // namespace

EmResult em_fit(const GeneralDiscreteTreeModel& init, const SampleMatrix& samples, const EmOptions& options) {
  samples.validate();
  if (samples.alphabet != init.K) throw Error(ErrorKind::AlphabetViolation, "sample alphabet differs from K");
  const PatternSet ps = compress(samples);
  const Plan plan = make_plan(init);
  const double n = std::max<double>(1.0, static_cast<double>(samples.n()));

  EmResult result;
  result.model = init;
  Stats stats = e_step(plan, init, ps);
  result.loglik_trace.push_back(stats.loglik);
  for (int it = 0; it < options.max_iters; ++it) {
    GeneralDiscreteTreeModel next = m_step(plan, result.model, stats, options.smoothing);
    Stats next_stats = e_step(plan, next, ps);
    result.iterations = it + 1;
    // The smoothed update can lose a sliver of likelihood near a fixed point;
    // such a step is rejected and the fit ends there.
    if (next_stats.loglik < stats.loglik) {
      result.converged = true;
      break;
    }
    const double gain = next_stats.loglik - stats.loglik;
    result.model = std::move(next);
    stats = std::move(next_stats);
    result.loglik_trace.push_back(stats.loglik);
    if (std::isfinite(gain) && gain / n < options.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

EmResult em_fit(const LatentTree& structure, const SampleMatrix& samples, const EmOptions& options) {
  for (NodeId c : samples.columns)
    if (!structure.has_node(c)) throw Error(ErrorKind::UnknownNode, "column " + std::to_string(c) + " not in tree");
  return em_fit(em_initial_model(structure, options.K, options.seed), samples, options);
}

// -------------------------------------------------------------------- BIC

std::size_t parameter_count(const TreeModel& model) {
  const std::size_t e = tree_of(model).edge_count();
  if (const auto* g = std::get_if<GeneralDiscreteTreeModel>(&model)) {
    const auto K = static_cast<std::size_t>(g->K);
    return (K - 1) + e * K * (K - 1);
  }
  return e;
}

BicReport make_bic_report(double loglik, std::size_t kappa, std::size_t n) {
  BicReport r;
  r.loglik = loglik;
  r.kappa = kappa;
  r.n = n;
  r.bic = loglik - 0.5 * static_cast<double>(kappa) * std::log(static_cast<double>(std::max<std::size_t>(n, 1)));
  return r;
}

BicReport bic(const TreeModel& model, const SampleMatrix& samples) {
  return make_bic_report(loglikelihood(model, samples), parameter_count(model), static_cast<std::size_t>(samples.n()));
}

// ---------------------------------------------------- posterior sampling

SampleMatrix posterior_sample_hidden(const TreeModel& model, const SampleMatrix& samples, std::uint64_t seed) {
  const LatentTree& tree = tree_of(model);
  std::vector<NodeId> rest;
  for (NodeId id : tree.nodes())
    if (!samples.has_column(id)) rest.push_back(id);

  SampleMatrix out;
  out.columns = samples.columns;
  out.columns.insert(out.columns.end(), rest.begin(), rest.end());
  out.names = samples.names;
  out.alphabet = samples.alphabet;
  out.data.resize(samples.n(), static_cast<Eigen::Index>(out.columns.size()));
  out.data.leftCols(samples.m()) = samples.data;
  if (rest.empty()) return out;
  if (!out.names.empty())
    for (NodeId id : rest) out.names.push_back(tree.display_name(id));

  std::mt19937_64 rng(seed);

  if (const auto* g = std::get_if<GaussianTreeModel>(&model)) {
    const Eigen::MatrixXd soo = covariance(*g, samples.columns);
    const Eigen::MatrixXd shh = covariance(*g, rest);
    Eigen::MatrixXd sho(static_cast<Eigen::Index>(rest.size()), samples.m());
    {
      std::vector<NodeId> all = rest;
      all.insert(all.end(), samples.columns.begin(), samples.columns.end());
      const Eigen::MatrixXd full = covariance(*g, all);
      sho = full.topRightCorner(static_cast<Eigen::Index>(rest.size()), samples.m());
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(soo);
    const Eigen::MatrixXd gain = ldlt.solve(sho.transpose()).transpose();
    Eigen::MatrixXd cond = shh - gain * sho.transpose();
    cond = 0.5 * (cond + cond.transpose()).eval();
    cond.diagonal().array() += 1e-12;
    Eigen::LLT<Eigen::MatrixXd> llt(cond);
    const Eigen::MatrixXd L = llt.matrixL();
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(rest.size()));
    for (Eigen::Index i = 0; i < samples.n(); ++i) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
      const Eigen::VectorXd mean = gain * samples.data.row(i).transpose();
      out.data.row(i).tail(z.size()) = (mean + L * z).transpose();
    }
    return out;
  }

  samples.validate();
  const GeneralDiscreteTreeModel gd = to_general(model);
  const Plan plan = make_plan(gd);
  const std::size_t N = plan.r.order.size();
  std::vector<Eigen::Index> out_col(N, -1);
  for (std::size_t k = 0; k < rest.size(); ++k)
    out_col[static_cast<std::size_t>(plan.r.pos.at(rest[k]))] = samples.m() + static_cast<Eigen::Index>(k);

  std::map<std::vector<int>, Upward> cache;
  std::vector<int> key(static_cast<std::size_t>(samples.m()));
  std::vector<int> state(N);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&](const Eigen::VectorXd& w) {
    const double total = w.sum();
    double u = unif(rng) * total;
    for (Eigen::Index a = 0; a < w.size(); ++a) {
      u -= w(a);
      if (u < 0) return static_cast<int>(a);
    }
    for (Eigen::Index a = w.size(); a-- > 0;)
      if (w(a) > 0) return static_cast<int>(a);
    return 0;
  };
  for (Eigen::Index i = 0; i < samples.n(); ++i) {
    for (Eigen::Index k = 0; k < samples.m(); ++k) key[static_cast<std::size_t>(k)] = static_cast<int>(samples.data(i, k));
    auto it = cache.find(key);
    if (it == cache.end()) {
      Eigen::VectorXi vals(samples.m());
      for (Eigen::Index k = 0; k < samples.m(); ++k) vals(k) = key[static_cast<std::size_t>(k)];
      it = cache.emplace(key, upward(plan, gd, clamp_of(plan, samples.columns, vals))).first;
      if (!std::isfinite(it->second.loglik)) {
        throw Error(ErrorKind::DegenerateParameter, "sample has zero probability under the model");
      }
    }
    const Upward& u = it->second;
    state[0] = draw(gd.root_marginal.cwiseProduct(u.beta[0]));
    for (std::size_t q = 1; q < N; ++q) {
      const auto par = static_cast<std::size_t>(plan.r.parent[q]);
      const Eigen::VectorXd w = plan.cond[q]->row(state[par]).transpose().cwiseProduct(u.beta[q]);
      state[q] = draw(w);
    }
    for (std::size_t q = 0; q < N; ++q)
      if (out_col[q] >= 0) out.data(i, out_col[q]) = state[q];
  }
  return out;
}

}  // namespace latree
