#include "latree/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "latree/error.hpp"
#include "latree/inference.hpp"
#include "rooting.hpp"

namespace latree {

using detail::root_tree;
using detail::Rooting;

const char* to_string(Family family) {
  switch (family) {
    case Family::Gaussian: return "gaussian";
    case Family::Symmetric: return "symmetric";
    case Family::Discrete: return "discrete";
  }
  return "?";
}

Family family_from_string(const std::string& name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "symmetric") return Family::Symmetric;
  if (name == "discrete") return Family::Discrete;
  throw Error(ErrorKind::InvalidSpec, "unknown family '" + name + "'");
}

const LatentTree& tree_of(const TreeModel& model) {
  return std::visit([](const auto& m) -> const LatentTree& { return m.tree; }, model);
}

Family family_of(const TreeModel& model) {
  switch (model.index()) {
    case 0: return Family::Gaussian;
    case 1: return Family::Symmetric;
    default: return Family::Discrete;
  }
}

int alphabet_of(const TreeModel& model) {
  if (const auto* s = std::get_if<SymmetricDiscreteTreeModel>(&model)) return s->K;
  if (const auto* g = std::get_if<GeneralDiscreteTreeModel>(&model)) return g->K;
  return 0;
}

// ---------------------------------------------------------------- samples

Eigen::Index SampleMatrix::column_index(NodeId id) const {
  auto it = std::find(columns.begin(), columns.end(), id);
  if (it == columns.end()) throw Error(ErrorKind::UnknownNode, "no sample column for node " + std::to_string(id));
  return static_cast<Eigen::Index>(it - columns.begin());
}

bool SampleMatrix::has_column(NodeId id) const {
  return std::find(columns.begin(), columns.end(), id) != columns.end();
}

void SampleMatrix::validate() const {
  if (static_cast<Eigen::Index>(columns.size()) != data.cols()) {
    throw Error(ErrorKind::InvalidSpec, "column labels do not match the data width");
  }
  std::vector<NodeId> sorted = columns;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorKind::InvalidSpec, "duplicate column labels");
  }
  if (alphabet <= 0) return;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double v = data.data()[i];
    if (v < 0 || v >= alphabet || v != std::floor(v)) {
      throw Error(ErrorKind::AlphabetViolation,
                  "entry " + std::to_string(v) + " outside 0.." + std::to_string(alphabet - 1));
    }
  }
}

SampleMatrix SampleMatrix::select(const std::vector<NodeId>& ids) const {
  SampleMatrix out;
  out.columns = ids;
  out.alphabet = alphabet;
  out.data.resize(n(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto c = column_index(ids[k]);
    out.data.col(static_cast<Eigen::Index>(k)) = data.col(c);
    if (!names.empty()) out.names.push_back(names[static_cast<std::size_t>(c)]);
  }
  return out;
}

// ------------------------------------------------------------- parameters

double symmetric_distance(double theta, int K) {
  const double inner = 1.0 - K * theta;
  if (inner <= 0.0) return kInfinity;
  return -(K - 1) * std::log(inner);
}

double theta_from_distance(double d, int K) {
  if (!std::isfinite(d)) return 1.0 / K;
  return (1.0 - std::exp(-d / (K - 1))) / K;
}

double mutual_information(const Eigen::MatrixXd& joint) {
  const Eigen::VectorXd r = joint.rowwise().sum();
  const Eigen::RowVectorXd c = joint.colwise().sum();
  double mi = 0.0;
  for (Eigen::Index a = 0; a < joint.rows(); ++a)
    for (Eigen::Index b = 0; b < joint.cols(); ++b)
      if (joint(a, b) > 0) mi += joint(a, b) * std::log(joint(a, b) / (r(a) * c(b)));
  return mi;
}

double discrete_distance(const Eigen::MatrixXd& joint) {
  const Eigen::VectorXd r = joint.rowwise().sum();
  const Eigen::VectorXd c = joint.colwise().sum().transpose();
  if ((r.array() <= 0).any() || (c.array() <= 0).any()) return kInfinity;
  const double det = joint.fullPivLu().determinant();
  if (det == 0.0 || !std::isfinite(det)) return kInfinity;
  const double log_marg = r.array().log().sum() + c.array().log().sum();
  const double d = -std::log(std::abs(det)) + 0.5 * log_marg;
  return std::max(d, 0.0);
}

std::map<NodeId, Eigen::VectorXd> node_marginals(const GeneralDiscreteTreeModel& model) {
  const Rooting r = root_tree(model.tree, model.root);
  std::map<NodeId, Eigen::VectorXd> out;
  out[model.root] = model.root_marginal;
  for (std::size_t p = 1; p < r.order.size(); ++p) {
    const NodeId u = r.order[p];
    const NodeId par = r.order[static_cast<std::size_t>(r.parent[p])];
    const auto& C = model.conditional.at({par, u});
    out[u] = C.transpose() * out[par];
  }
  return out;
}

namespace {

double general_edge_distance(const GeneralDiscreteTreeModel& model, const std::map<NodeId, Eigen::VectorXd>& marg,
                             const Step& directed) {
  const auto& C = model.conditional.at(directed);
  const Eigen::MatrixXd J = marg.at(directed.first).asDiagonal() * C;
  return discrete_distance(J);
}

// Directed (parent, child) orientation of an edge in the model's rooting.
Step oriented(const GeneralDiscreteTreeModel& model, const Edge& e) {
  if (model.conditional.count({e.u, e.v})) return {e.u, e.v};
  return {e.v, e.u};
}

std::map<Edge, double> all_edge_distances(const TreeModel& model) {
  std::map<Edge, double> out;
  if (const auto* g = std::get_if<GeneralDiscreteTreeModel>(&model)) {
    const auto marg = node_marginals(*g);
    for (const Edge& e : g->tree.edges()) out[e] = general_edge_distance(*g, marg, oriented(*g, e));
    return out;
  }
  for (const Edge& e : tree_of(model).edges()) out[e] = edge_distance(model, e);
  return out;
}

}  // namespace

double edge_distance(const TreeModel& model, const Edge& e) {
  if (const auto* g = std::get_if<GaussianTreeModel>(&model)) return -std::log(std::abs(g->rho.at(e)));
  if (const auto* s = std::get_if<SymmetricDiscreteTreeModel>(&model)) return symmetric_distance(s->theta.at(e), s->K);
  const auto& gd = std::get<GeneralDiscreteTreeModel>(model);
  return general_edge_distance(gd, node_marginals(gd), oriented(gd, e));
}

void validate_parameters(const TreeModel& model) {
  const LatentTree& tree = tree_of(model);
  tree.validate();
  auto bad = [](const Edge& e, const std::string& why) {
    throw Error(ErrorKind::DegenerateParameter,
                "edge " + std::to_string(e.u) + "-" + std::to_string(e.v) + ": " + why);
  };
  if (const auto* g = std::get_if<GaussianTreeModel>(&model)) {
    for (const Edge& e : tree.edges()) {
      auto it = g->rho.find(e);
      if (it == g->rho.end()) bad(e, "missing correlation");
      const double a = std::abs(it->second);
      if (!(a > 0.0 && a < 1.0)) bad(e, "correlation must satisfy 0 < |rho| < 1");
    }
    return;
  }
  if (const auto* s = std::get_if<SymmetricDiscreteTreeModel>(&model)) {
    if (s->K < 2) throw Error(ErrorKind::DegenerateParameter, "alphabet must have at least two symbols");
    for (const Edge& e : tree.edges()) {
      auto it = s->theta.find(e);
      if (it == s->theta.end()) bad(e, "missing crossover probability");
      if (!(it->second > 0.0 && it->second < 1.0 / s->K)) bad(e, "crossover must lie in (0, 1/K)");
    }
    return;
  }
  const auto& gd = std::get<GeneralDiscreteTreeModel>(model);
  if (std::abs(gd.root_marginal.sum() - 1.0) > 1e-9) {
    throw Error(ErrorKind::DegenerateParameter, "root marginal does not sum to one");
  }
  for (const Edge& e : tree.edges()) {
    const Step dir = oriented(gd, e);
    if (!gd.conditional.count(dir)) bad(e, "missing conditional");
    const auto& C = gd.conditional.at(dir);
    if (((C.rowwise().sum().array() - 1.0).abs() > 1e-9).any()) bad(e, "conditional rows must sum to one");
  }
  for (const auto& [e, d] : all_edge_distances(model)) {
    if (!std::isfinite(d) || d <= 0.0) bad(e, "pairwise joint is singular or a permutation");
  }
}

DistanceMatrix exact_distance_matrix(const TreeModel& model, const std::vector<NodeId>& nodes) {
  validate_parameters(model);
  const LatentTree& tree = tree_of(model);
  const auto lengths = all_edge_distances(model);
  const auto* gauss = std::get_if<GaussianTreeModel>(&model);

  DistanceMatrix out(nodes);
  Eigen::MatrixXd sign = Eigen::MatrixXd::Ones(out.size(), out.size());
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    if (!tree.has_node(nodes[a])) throw Error(ErrorKind::UnknownNode, std::to_string(nodes[a]));
    const Rooting r = root_tree(tree, nodes[a]);
    std::vector<double> dist(r.order.size(), 0.0);
    std::vector<double> sgn(r.order.size(), 1.0);
    for (std::size_t p = 1; p < r.order.size(); ++p) {
      const auto par = static_cast<std::size_t>(r.parent[p]);
      const Edge e(r.order[par], r.order[p]);
      dist[p] = dist[par] + lengths.at(e);
      if (gauss) sgn[p] = sgn[par] * (gauss->rho.at(e) < 0 ? -1.0 : 1.0);
    }
    for (std::size_t b = 0; b < nodes.size(); ++b) {
      auto it = r.pos.find(nodes[b]);
      if (it == r.pos.end()) throw Error(ErrorKind::UnknownNode, std::to_string(nodes[b]));
      const auto ia = static_cast<Eigen::Index>(a);
      const auto ib = static_cast<Eigen::Index>(b);
      out.d(ia, ib) = dist[static_cast<std::size_t>(it->second)];
      sign(ia, ib) = sgn[static_cast<std::size_t>(it->second)];
    }
  }
  // Symmetrize away round-off from summing in different orders.
  out.d = 0.5 * (out.d + out.d.transpose()).eval();
  out.d.diagonal().setZero();
  if (gauss) out.sign = std::move(sign);
  out.source = DistanceSource::Exact;
  return out;
}

DistanceMatrix exact_distance_matrix(const TreeModel& model) {
  return exact_distance_matrix(model, tree_of(model).observed());
}

// --------------------------------------------------------------- sampling

SampleMatrix sample(const TreeModel& model, std::size_t n, std::uint64_t seed, bool include_hidden) {
  validate_parameters(model);
  const LatentTree& tree = tree_of(model);
  std::vector<NodeId> cols = tree.observed();
  if (include_hidden) {
    const auto h = tree.hidden();
    cols.insert(cols.end(), h.begin(), h.end());
  }

  NodeId root = tree.nodes().front();
  if (const auto* g = std::get_if<GeneralDiscreteTreeModel>(&model)) root = g->root;
  const Rooting r = root_tree(tree, root);

  SampleMatrix out;
  out.columns = cols;
  out.alphabet = alphabet_of(model);
  out.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));

  std::vector<Eigen::Index> col_of(r.order.size(), -1);
  for (std::size_t k = 0; k < cols.size(); ++k) col_of[static_cast<std::size_t>(r.pos.at(cols[k]))] = static_cast<Eigen::Index>(k);

  std::mt19937_64 rng(seed);
  std::vector<double> x(r.order.size());

  if (const auto* g = std::get_if<GaussianTreeModel>(&model)) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> rho(r.order.size(), 0.0);
    for (std::size_t p = 1; p < r.order.size(); ++p)
      rho[p] = g->rho.at(Edge(r.order[static_cast<std::size_t>(r.parent[p])], r.order[p]));
    for (std::size_t s = 0; s < n; ++s) {
      x[0] = normal(rng);
      for (std::size_t p = 1; p < r.order.size(); ++p)
        x[p] = rho[p] * x[static_cast<std::size_t>(r.parent[p])] + std::sqrt(1.0 - rho[p] * rho[p]) * normal(rng);
      for (std::size_t p = 0; p < r.order.size(); ++p)
        if (col_of[p] >= 0) out.data(static_cast<Eigen::Index>(s), col_of[p]) = x[p];
    }
    return out;
  }

  const GeneralDiscreteTreeModel gd = to_general(model);
  const Rooting rg = root_tree(gd.tree, gd.root);  // same as r for general models
  std::vector<std::vector<std::discrete_distribution<int>>> draw(rg.order.size());
  {
    std::vector<double> w(gd.root_marginal.data(), gd.root_marginal.data() + gd.K);
    draw[0].emplace_back(w.begin(), w.end());
  }
  for (std::size_t p = 1; p < rg.order.size(); ++p) {
    const auto& C = gd.conditional.at({rg.order[static_cast<std::size_t>(rg.parent[p])], rg.order[p]});
    for (int a = 0; a < gd.K; ++a) {
      std::vector<double> w(static_cast<std::size_t>(gd.K));
      for (int b = 0; b < gd.K; ++b) w[static_cast<std::size_t>(b)] = C(a, b);
      draw[p].emplace_back(w.begin(), w.end());
    }
  }
  std::vector<Eigen::Index> col_g(rg.order.size(), -1);
  for (std::size_t k = 0; k < cols.size(); ++k) col_g[static_cast<std::size_t>(rg.pos.at(cols[k]))] = static_cast<Eigen::Index>(k);
  std::vector<int> state(rg.order.size());
  for (std::size_t s = 0; s < n; ++s) {
    state[0] = draw[0][0](rng);
    for (std::size_t p = 1; p < rg.order.size(); ++p)
      state[p] = draw[p][static_cast<std::size_t>(state[static_cast<std::size_t>(rg.parent[p])])](rng);
    for (std::size_t p = 0; p < rg.order.size(); ++p)
      if (col_g[p] >= 0) out.data(static_cast<Eigen::Index>(s), col_g[p]) = state[p];
  }
  return out;
}

// ------------------------------------------------------------- covariance

Eigen::MatrixXd covariance(const GaussianTreeModel& model, const std::vector<NodeId>& ids) {
  const auto m = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd sigma(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const Rooting r = root_tree(model.tree, ids[static_cast<std::size_t>(a)]);
    std::vector<double> prod(r.order.size(), 1.0);
    for (std::size_t p = 1; p < r.order.size(); ++p) {
      const auto par = static_cast<std::size_t>(r.parent[p]);
      prod[p] = prod[par] * model.rho.at(Edge(r.order[par], r.order[p]));
    }
    for (Eigen::Index b = 0; b < m; ++b) {
      auto it = r.pos.find(ids[static_cast<std::size_t>(b)]);
      if (it == r.pos.end()) throw Error(ErrorKind::UnknownNode, std::to_string(ids[static_cast<std::size_t>(b)]));
      sigma(a, b) = prod[static_cast<std::size_t>(it->second)];
    }
  }
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd observed_covariance(const GaussianTreeModel& model) {
  return covariance(model, model.tree.observed());
}

// --------------------------------------------------------------------- KL

double kl_observed(const TreeModel& p, const TreeModel& q) {
  const auto obs = tree_of(p).observed();
  if (obs != tree_of(q).observed()) throw Error(ErrorKind::LabelMismatch, "observed node sets differ");
  const bool pg = family_of(p) == Family::Gaussian;
  const bool qg = family_of(q) == Family::Gaussian;
  if (pg != qg) throw Error(ErrorKind::InvalidSpec, "KL between Gaussian and discrete models");

  if (pg) {
    const Eigen::MatrixXd sp = observed_covariance(std::get<GaussianTreeModel>(p));
    const Eigen::MatrixXd sq = observed_covariance(std::get<GaussianTreeModel>(q));
    Eigen::LLT<Eigen::MatrixXd> lp(sp);
    Eigen::LLT<Eigen::MatrixXd> lq(sq);
    if (lp.info() != Eigen::Success || lq.info() != Eigen::Success) {
      throw Error(ErrorKind::SingularCovariance, "observed covariance is not positive definite");
    }
    const auto m = static_cast<double>(obs.size());
    const double trace = lq.solve(sp).trace();
    const double logdet_p = 2.0 * lp.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double logdet_q = 2.0 * lq.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return std::max(0.0, 0.5 * (trace - m + logdet_q - logdet_p));
  }

  const GeneralDiscreteTreeModel gp = to_general(p);
  const GeneralDiscreteTreeModel gq = to_general(q);
  if (gp.K != gq.K) throw Error(ErrorKind::InvalidSpec, "alphabet sizes differ");
  const int K = gp.K;
  const auto m = static_cast<int>(obs.size());
  const double configs = std::pow(static_cast<double>(K), m);
  if (m > kMaxExactObserved || configs > static_cast<double>(1 << 24)) {
    throw Error(ErrorKind::TooLargeForExact, std::to_string(m) + " observed nodes");
  }
  Eigen::VectorXi x = Eigen::VectorXi::Zero(m);
  double kl = 0.0;
  for (long c = 0; c < static_cast<long>(configs); ++c) {
    long rem = c;
    for (int k = 0; k < m; ++k) {
      x(k) = static_cast<int>(rem % K);
      rem /= K;
    }
    const double lp = log_probability(gp, obs, x);
    if (!std::isfinite(lp)) continue;
    const double lq = log_probability(gq, obs, x);
    if (!std::isfinite(lq)) return kInfinity;
    kl += std::exp(lp) * (lp - lq);
  }
  return std::max(0.0, kl);
}

// ------------------------------------------------------- discrete helpers

GeneralDiscreteTreeModel to_general(const SymmetricDiscreteTreeModel& model) {
  GeneralDiscreteTreeModel out;
  out.tree = model.tree;
  out.K = model.K;
  out.root = model.tree.nodes().front();
  out.root_marginal = Eigen::VectorXd::Constant(model.K, 1.0 / model.K);
  const Rooting r = root_tree(model.tree, out.root);
  for (std::size_t p = 1; p < r.order.size(); ++p) {
    const NodeId par = r.order[static_cast<std::size_t>(r.parent[p])];
    const double theta = model.theta.at(Edge(par, r.order[p]));
    Eigen::MatrixXd C = Eigen::MatrixXd::Constant(model.K, model.K, theta);
    C.diagonal().setConstant(1.0 - (model.K - 1) * theta);
    out.conditional[{par, r.order[p]}] = C;
  }
  return out;
}

GeneralDiscreteTreeModel to_general(const TreeModel& model) {
  if (const auto* s = std::get_if<SymmetricDiscreteTreeModel>(&model)) return to_general(*s);
  if (const auto* g = std::get_if<GeneralDiscreteTreeModel>(&model)) return *g;
  throw Error(ErrorKind::InvalidSpec, "Gaussian model has no discrete form");
}

namespace {

Eigen::MatrixXd row_normalize(Eigen::MatrixXd J) {
  for (Eigen::Index a = 0; a < J.rows(); ++a) {
    const double s = J.row(a).sum();
    if (s > 0) {
      J.row(a) /= s;
    } else {
      J.row(a).setConstant(1.0 / static_cast<double>(J.cols()));
    }
  }
  return J;
}

}  // namespace

GeneralDiscreteTreeModel reroot(const GeneralDiscreteTreeModel& model, NodeId new_root) {
  if (!model.tree.has_node(new_root)) throw Error(ErrorKind::UnknownNode, std::to_string(new_root));
  const auto marg = node_marginals(model);
  std::map<Edge, Eigen::MatrixXd> joints;
  for (const auto& [dir, C] : model.conditional) {
    const Eigen::MatrixXd J = marg.at(dir.first).asDiagonal() * C;
    const Edge e(dir.first, dir.second);
    joints[e] = (e.u == dir.first) ? J : Eigen::MatrixXd(J.transpose());
  }
  GeneralDiscreteTreeModel out;
  out.tree = model.tree;
  out.K = model.K;
  out.root = new_root;
  out.root_marginal = marg.at(new_root);
  const Rooting r = root_tree(model.tree, new_root);
  for (std::size_t p = 1; p < r.order.size(); ++p) {
    const NodeId par = r.order[static_cast<std::size_t>(r.parent[p])];
    const NodeId child = r.order[p];
    if (auto it = model.conditional.find({par, child}); it != model.conditional.end()) {
      out.conditional[{par, child}] = it->second;
      continue;
    }
    const Edge e(par, child);
    const Eigen::MatrixXd J = (e.u == par) ? joints.at(e) : Eigen::MatrixXd(joints.at(e).transpose());
    out.conditional[{par, child}] = row_normalize(J);
  }
  return out;
}

Eigen::MatrixXd pairwise_joint(const GeneralDiscreteTreeModel& model, NodeId i, NodeId j) {
  const GeneralDiscreteTreeModel r = reroot(model, i);
  Eigen::MatrixXd T = Eigen::MatrixXd::Identity(model.K, model.K);
  for (const auto& step : path(model.tree, i, j)) T = (T * r.conditional.at(step)).eval();
  return r.root_marginal.asDiagonal() * T;
}

std::map<Edge, Eigen::MatrixXd> edge_joints(const GeneralDiscreteTreeModel& model) {
  const auto marg = node_marginals(model);
  std::map<Edge, Eigen::MatrixXd> out;
  for (const auto& [dir, C] : model.conditional) {
    const Eigen::MatrixXd J = marg.at(dir.first).asDiagonal() * C;
    const Edge e(dir.first, dir.second);
    out[e] = (e.u == dir.first) ? J : Eigen::MatrixXd(J.transpose());
  }
  return out;
}

GeneralDiscreteTreeModel general_from_joints(const LatentTree& tree, int K, NodeId root,
                                             const std::map<Edge, Eigen::MatrixXd>& joints) {
  GeneralDiscreteTreeModel out;
  out.tree = tree;
  out.K = K;
  out.root = root;
  out.root_marginal = Eigen::VectorXd::Constant(K, 1.0 / K);
  const Rooting r = root_tree(tree, root);
  for (std::size_t p = 1; p < r.order.size(); ++p) {
    const NodeId par = r.order[static_cast<std::size_t>(r.parent[p])];
    const NodeId child = r.order[p];
    const Edge e(par, child);
    const Eigen::MatrixXd J = (e.u == par) ? joints.at(e) : Eigen::MatrixXd(joints.at(e).transpose());
    if (par == root && p == static_cast<std::size_t>(r.children[0].front())) {
      Eigen::VectorXd m = J.rowwise().sum();
      out.root_marginal = m / m.sum();
    }
    out.conditional[{par, child}] = row_normalize(J);
  }
  return out;
}

// ------------------------------------------------ learned-tree parameters

GaussianTreeModel gaussian_from_lengths(const LatentTree& tree, const DistanceMatrix* sign) {
  GaussianTreeModel out;
  out.tree = tree;
  // Each observed node takes its sign from the nearest already-signed one,
  // where the estimated correlation is strongest.
  std::map<NodeId, double> gauge;
  if (sign && sign->sign) {
    std::vector<NodeId> obs;
    for (NodeId id : sign->labels)
      if (is_observed(id) && tree.has_node(id)) obs.push_back(id);
    if (!obs.empty()) {
      LatentTree unit = tree;
      for (const Edge& e : tree.edges()) {
        auto len = tree.length(e.u, e.v);
        unit.set_length(e.u, e.v, len && std::isfinite(*len) ? std::max(*len, 0.0) : 50.0);
      }
      const DistanceMatrix P = path_distances(unit, obs);
      const auto m = static_cast<std::size_t>(P.size());
      std::vector<double> best(m, kInfinity);
      std::vector<int> from(m, -1);
      std::vector<bool> done(m, false);
      gauge[obs[0]] = 1.0;
      done[0] = true;
      for (std::size_t k = 1; k < m; ++k) {
        best[k] = P.d(0, static_cast<Eigen::Index>(k));
        from[k] = 0;
      }
      for (std::size_t step = 1; step < m; ++step) {
        std::size_t v = m;
        for (std::size_t k = 0; k < m; ++k)
          if (!done[k] && (v == m || best[k] < best[v])) v = k;
        done[v] = true;
        const NodeId u = obs[static_cast<std::size_t>(from[v])];
        gauge[obs[v]] = gauge[u] * (sign->sign_of(u, obs[v]) < 0 ? -1.0 : 1.0);
        for (std::size_t k = 0; k < m; ++k)
          if (!done[k] && P.d(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(k)) < best[k]) {
            best[k] = P.d(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(k));
            from[k] = static_cast<int>(v);
          }
      }
    }
  }
  for (const Edge& e : tree.edges()) {
    auto len = tree.length(e.u, e.v);
    if (!len) throw Error(ErrorKind::InvalidTree, "learned tree lacks edge lengths");
    const double d = std::isfinite(*len) ? std::max(*len, kMinEdgeLength) : 50.0;
    const double s = (gauge.count(e.u) ? gauge[e.u] : 1.0) * (gauge.count(e.v) ? gauge[e.v] : 1.0);
    out.rho[e] = s * std::exp(-d);
  }
  return out;
}

SymmetricDiscreteTreeModel symmetric_from_lengths(const LatentTree& tree, int K) {
  SymmetricDiscreteTreeModel out;
  out.tree = tree;
  out.K = K;
  const double max_theta = (1.0 / K) * (1.0 - 1e-9);
  for (const Edge& e : tree.edges()) {
    auto len = tree.length(e.u, e.v);
    if (!len) throw Error(ErrorKind::InvalidTree, "learned tree lacks edge lengths");
    out.theta[e] = std::min(theta_from_distance(std::max(*len, kMinEdgeLength), K), max_theta);
  }
  return out;
}

}  // namespace latree
