// Acceptance run: one PASS/FAIL line per criterion. The exit status is 0 once
// every criterion has been evaluated; the verdicts are in the output.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "latree/bench.hpp"
#include "latree/clgrouping.hpp"
#include "latree/distances.hpp"
#include "latree/generators.hpp"
#include "latree/inference.hpp"
#include "latree/neighbor_joining.hpp"
#include "latree/recursive_grouping.hpp"
#include "latree/reg_clgrouping.hpp"
#include "support.hpp"

using namespace latree;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

LatentTree with_lengths(const GaussianTreeModel& g) {
  LatentTree t = g.tree;
  for (const auto& [e, r] : g.rho) t.set_length(e.u, e.v, -std::log(std::abs(r)));
  return t;
}

DistanceMatrix oracle_distances(const GaussianTreeModel& g, const std::vector<NodeId>& ids) {
  DistanceMatrix D(ids);
  for (NodeId a : ids)
    for (NodeId b : ids) D.set(a, b, a == b ? 0.0 : -std::log(std::abs(oracle::path_product(g, a, b))));
  return D;
}

// Random minimal trees with 3..30 observed nodes and correlations in [0.2, 0.8].
std::vector<GaussianTreeModel> minimal_suite(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::vector<GaussianTreeModel> out;
  while (static_cast<int>(out.size()) < count) {
    auto t = gen::random_minimal(rng, 50, 0.45);
    const auto m = t.observed().size();
    if (m >= 3 && m <= 30) out.push_back(gen::gaussian(t, rng));
  }
  return out;
}

LatentTree worked_example() {
  LatentTree t;
  t.add_edge(5, -1, 0.1);
  t.add_edge(-1, -2, 0.1);
  t.add_edge(-2, 1, 0.5);
  t.add_edge(-2, 4, 0.6);
  t.add_edge(-1, -3, 0.4);
  t.add_edge(-3, 3, 0.1);
  t.add_edge(-3, 2, 0.5);
  t.add_edge(-3, 6, 0.6);
  return t;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) mx += x[k], my += y[k];
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double num = 0, den = 0;
  for (std::size_t k = 0; k < x.size(); ++k) num += (x[k] - mx) * (y[k] - my), den += (x[k] - mx) * (x[k] - mx);
  return num / den;
}

// ------------------------------------------------------------------ criteria

Verdict exact_rg() {
  const auto t0 = Clock::now();
  int ok = 0;
  const auto suite = minimal_suite(101, 200);
  for (const auto& g : suite)
    if (trees_equal_up_to_hidden_relabel(rg_exact(oracle_distances(g, g.tree.observed())), g.tree)) ++ok;
  const double s = seconds_since(t0);
  return {ok == 200 && s < 60, fmt("%.0f/200 recovered in %.2f s", ok, s)};
}

Verdict exact_clg() {
  int rg = 0, nj = 0;
  for (const auto& g : minimal_suite(101, 200)) {
    const auto D = oracle_distances(g, g.tree.observed());
    ClgOptions opt;
    if (trees_equal_up_to_hidden_relabel(clgrouping(D, opt), g.tree)) ++rg;
    opt.sub = Subroutine::NJ;
    if (trees_equal_up_to_hidden_relabel(clgrouping(D, opt), g.tree)) ++nj;
  }
  const auto truth = worked_example();
  DistanceMatrix D({1, 2, 3, 4, 5, 6});
  for (NodeId a : D.labels)
    for (NodeId b : D.labels)
      if (a != b) D.set(a, b, path_length(truth, a, b));
  ClgOptions opt;
  opt.visit_order = std::vector<NodeId>{5, 3};
  const auto res = clgrouping_detailed(D, opt);
  const bool walk = res.trace.size() == 2 && res.trace[0].neighborhood == std::vector<NodeId>{1, 3, 4, 5} &&
                    res.trace[0].introduced.size() == 2 && res.trace[1].introduced.size() == 1 &&
                    trees_equal_up_to_hidden_relabel(res.tree, truth);
  return {rg == 200 && nj == 200 && walk,
          fmt("CLRG %.0f/200, CLNJ %.0f/200, worked example ", rg, nj) + (walk ? "reproduced" : "differs")};
}

Verdict blind() {
  int ok = 0;
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Blind;
  for (std::uint64_t s = 0; s < 50; ++s) {
    spec.seed = s;
    spec.observed = 10 + static_cast<int>(s % 30);
    spec.hidden = 2 + static_cast<int>(s % 8);
    const auto model = generate(spec);
    if (trees_equal_up_to_hidden_relabel(cl_blind(mst_observed(exact_distance_matrix(model))), tree_of(model))) ++ok;
  }
  return {ok == 50, fmt("%.0f/50 recovered", ok)};
}

Verdict lemma6() {
  int violations = 0;
  for (const auto& g : minimal_suite(202, 100)) {
    const auto t = with_lengths(g);
    const auto all = oracle_distances(g, t.nodes());
    // Oracle surrogates: nearest observed node, ties to the smaller id.
    std::map<NodeId, NodeId> sg;
    for (NodeId v : t.nodes()) {
      NodeId best = v;
      if (v < 0) {
        double bd = kInfinity;
        for (NodeId j : t.observed())
          if (all(v, j) < bd) best = j, bd = all(v, j);
      }
      sg[v] = best;
    }
    const auto mst = mst_observed(all.subset(t.observed()));
    for (const auto& e : t.edges())
      if (sg[e.u] != sg[e.v] && !mst.has_edge(sg[e.u], sg[e.v])) ++violations;
    for (const auto& [h, j] : sg)
      for (NodeId x : oracle::path_nodes(t, j, h))
        if (sg[x] != j) ++violations;
    double lo = kInfinity, hi = 0;
    for (const auto& e : t.edges()) lo = std::min(lo, *t.length(e.u, e.v)), hi = std::max(hi, *t.length(e.u, e.v));
    const double bound =
        std::pow(static_cast<double>(max_degree(t)), 1 + hi / lo * static_cast<double>(oracle::effective_depth(t)));
    if (static_cast<double>(max_degree(mst)) > bound + 1e-9) ++violations;
  }
  return {violations == 0, fmt("%.0f violations over 100 trees", violations)};
}

Verdict lemma2() {
  int wrong = 0;
  long pairs = 0;
  auto expect_rel = [](const LatentTree& t, NodeId i, NodeId j) {
    auto adj = oracle::adjacency(t);
    const bool li = adj[i].size() == 1, lj = adj[j].size() == 1;
    if (li && adj[i][0] == j) return std::pair{RelationKind::ParentChild, i};
    if (lj && adj[j][0] == i) return std::pair{RelationKind::ParentChild, j};
    if (li && lj && adj[i][0] == adj[j][0]) return std::pair{RelationKind::Siblings, NodeId{0}};
    return std::pair{RelationKind::Inconclusive, NodeId{0}};
  };
  auto audit = [&](const GaussianTreeModel& g) {
    const auto obs = g.tree.observed();
    const auto rel = test_node_relationships(oracle_distances(g, obs), obs);
    for (std::size_t a = 0; a < obs.size(); ++a)
      for (std::size_t b = a + 1; b < obs.size(); ++b) {
        const auto [kind, child] = expect_rel(g.tree, obs[a], obs[b]);
        const auto& r = rel.relation(obs[a], obs[b]);
        if (r.kind != kind || (kind == RelationKind::ParentChild && r.child != child)) ++wrong;
        ++pairs;
      }
  };
  for (const auto& g : minimal_suite(303, 200)) audit(g);

  // The five cases of the relationship test, each around the pair (0, 1).
  std::vector<std::vector<std::pair<NodeId, NodeId>>> catalogue = {
      {{0, 1}, {0, 4}, {0, -1}, {-1, 2}, {-1, 3}},                      // 1 is a leaf child of 0
      {{-1, 0}, {-1, 1}, {-1, -2}, {-2, 2}, {-2, 3}},                   // leaf siblings
      {{-1, 0}, {-1, 4}, {-1, -2}, {-2, 2}, {-2, -3}, {-3, 1}, {-3, 5}},  // far apart
      {{-1, 0}, {-1, 1}, {-1, 2}, {1, 5}, {1, 6}},                      // siblings, 1 not a leaf
      {{0, 1}, {0, 2}, {0, 3}, {1, 4}, {1, 5}},                         // parent and non-leaf child
  };
  std::mt19937_64 rng(7);
  for (const auto& edges : catalogue) {
    LatentTree t;
    for (const auto& [u, v] : edges) t.add_edge(u, v);
    audit(gen::gaussian(t, rng));
  }
  return {wrong == 0, fmt("%.0f misclassified of %.0f pairs (200 trees + 5 case fixtures)", wrong,
                          static_cast<double>(pairs))};
}

Verdict double_star() {
  const auto t0 = Clock::now();
  Grid grid;
  GeneratorSpec spec;
  spec.kind = GeneratorKind::DoubleStar;
  spec.observed = 20;
  grid.specs = {spec};
  grid.methods = {"rg"};
  grid.sample_sizes = {1000};
  grid.trials = 20;
  const auto report = run_experiment(grid);
  int ok = 0;
  for (const auto& r : report.rows) ok += r.recovered ? 1 : 0;
  const double s = seconds_since(t0);
  return {ok >= 18 && s < 120, fmt("%.0f/20 recovered in %.2f s (need 18)", ok, s)};
}

Verdict hmm_ordering() {
  Grid grid;
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Hmm;
  spec.hidden = 18;
  grid.specs = {spec};
  grid.methods = {"rg", "nj", "clrg", "clnj"};
  grid.sample_sizes = {2000};
  grid.trials = 20;
  const auto report = run_experiment(grid);
  std::map<std::string, double> rf;
  for (const auto& s : report.summary) rf[s.method] = s.mean_rf;
  const bool pass = rf["clnj"] < rf["nj"] && rf["clrg"] <= rf["rg"] && report.failures() == 0;
  return {pass, fmt("mean RF: RG %.2f, CLRG %.2f, NJ %.2f, CLNJ %.2f", rf["rg"], rf["clrg"], rf["nj"], rf["clnj"])};
}

Verdict runtime_ratio() {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Hmm;
  spec.hidden = 78;
  const auto D = exact_distance_matrix(generate(spec));
  auto t0 = Clock::now();
  const auto rg = rg_exact(D);
  const double rg_s = seconds_since(t0);
  t0 = Clock::now();
  const auto clrg = clgrouping(D, {});
  const double clrg_s = seconds_since(t0);
  const double ratio = rg_s / std::max(clrg_s, 1e-9);
  const bool same = trees_equal_up_to_hidden_relabel(rg, clrg);
  return {ratio >= 5 && same, fmt("RG %.3f s, CLRG %.4f s, ratio %.1f", rg_s, clrg_s, ratio) +
                                  (same ? "" : ", outputs differ")};
}

Verdict estimator_rate() {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::DoubleStar;
  spec.observed = 12;
  spec.lo = 0.5;
  spec.seed = 5;
  std::string detail;
  bool pass = true;
  for (Family f : {Family::Gaussian, Family::Symmetric}) {
    spec.family = f;
    const auto model = generate(spec);
    const auto truth = exact_distance_matrix(model);
    std::vector<double> lx, ly;
    for (std::size_t n : {1000u, 10000u, 100000u}) {
      double err = 0;
      for (std::uint64_t rep = 0; rep < 5; ++rep) {
        const auto D = estimate_distances(sample(model, n, 77 + rep), f, spec.K);
        err += (D.d - truth.d).cwiseAbs().maxCoeff();
      }
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(err / 5));
    }
    const double s = slope(lx, ly);
    pass = pass && s >= -0.65 && s <= -0.35;
    detail += std::string(detail.empty() ? "" : ", ") + to_string(f) + fmt(" slope %.3f", s);
  }
  return {pass, detail};
}

Verdict inference_oracle() {
  std::mt19937_64 rng(9);
  double worst = 0;
  int models = 0;
  while (models < 60) {
    auto t = gen::random_minimal(rng, 10, 0.5);
    const int K = 2 + models % 2;
    auto m = gen::discrete(t, K, rng);
    const auto j = oracle::enumerate(m);
    const auto obs = t.observed();
    std::uniform_int_distribution<int> val(0, K - 1);
    for (int rep = 0; rep < 3; ++rep) {
      Eigen::VectorXi x(static_cast<Eigen::Index>(obs.size()));
      for (Eigen::Index c = 0; c < x.size(); ++c) x(c) = val(rng);
      const auto post = posteriors(m, obs, x);
      worst = std::max(worst, std::abs(post.log_likelihood - std::log(oracle::evidence(j, obs, x))));
      for (NodeId v : t.nodes())
        worst = std::max(worst, (post.node.at(v) - oracle::node_posterior(j, K, v, obs, x)).cwiseAbs().maxCoeff());
      for (const auto& [st, C] : m.conditional)
        worst = std::max(worst, (post.edge.at(st) - oracle::pair_posterior(j, K, st.first, st.second, obs, x))
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    ++models;
  }
  double gworst = 0;
  for (int trial = 0; trial < 30; ++trial) {
    auto t = gen::random_minimal(rng, 20, 0.4);
    auto g = gen::gaussian(t, rng);
    auto x = sample(g, 50, static_cast<std::uint64_t>(trial));
    gworst = std::max(gworst, std::abs(loglikelihood(g, x) - oracle::mvn_loglik(oracle::covariance(g, t.observed()), x.data)));
  }
  return {worst < 1e-9 && gworst < 1e-9,
          fmt("max discrete deviation %.2e over 60 models, max Gaussian loglik deviation %.2e", worst, gworst)};
}

Verdict em_monotone() {
  std::mt19937_64 rng(10);
  int violations = 0;
  for (int run = 0; run < 50; ++run) {
    auto t = gen::random_minimal(rng, 14, 0.5);
    auto m = gen::discrete(t, 2 + run % 2, rng);
    std::vector<NodeId> obs = t.observed();
    auto x = sample(m, 300, static_cast<std::uint64_t>(run)).select(obs);
    EmOptions opt;
    opt.K = m.K;
    opt.seed = static_cast<std::uint64_t>(run);
    const auto res = em_fit(t, x, opt);
    for (std::size_t k = 1; k < res.loglik_trace.size(); ++k)
      if (res.loglik_trace[k] < res.loglik_trace[k - 1] - 1e-8) ++violations;
  }
  return {violations == 0, fmt("%.0f decreasing steps over 50 runs", violations)};
}

Verdict reg_sanity() {
  GaussianTreeModel chain;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  for (NodeId v = 0; v < 9; ++v) {
    chain.tree.add_edge(v, v + 1);
    chain.rho[Edge(v, v + 1)] = u(rng);
  }
  const auto flat = reg_clgrouping(sample(chain, 1000, 1), {});
  GeneratorSpec spec;
  spec.kind = GeneratorKind::DoubleStar;
  spec.observed = 20;
  spec.seed = 1;
  const auto ds = reg_clgrouping(sample(generate(spec), 10000, 2), {});
  const bool pass = flat.tree.hidden_count() == 0 && ds.tree.hidden_count() >= 1 && ds.final.bic > ds.chow_liu.bic;
  return {pass, fmt("chain: %.0f hidden; double star: %.0f hidden, BIC %.1f vs Chow-Liu %.1f",
                    static_cast<double>(flat.tree.hidden_count()), static_cast<double>(ds.tree.hidden_count()),
                    ds.final.bic, ds.chow_liu.bic)};
}

Verdict kl_trend() {
  Grid grid;
  GeneratorSpec spec;
  spec.kind = GeneratorKind::DoubleStar;
  spec.observed = 20;
  grid.specs = {spec};
  grid.methods = {"clnj"};
  grid.sample_sizes = {100, 1000, 10000};
  grid.trials = 10;
  const auto report = run_experiment(grid);
  std::vector<double> kl;
  for (const auto& s : report.summary) kl.push_back(s.mean_kl.value_or(kInfinity));
  int inversions = 0;
  for (std::size_t k = 1; k < kl.size(); ++k)
    if (kl[k] > kl[k - 1]) ++inversions;
  return {kl.size() == 3 && inversions <= 1 && std::isfinite(kl.back()),
          fmt("mean KL at n=1e2, 1e3, 1e4: %.4f, %.4f, %.4f", kl[0], kl[1], kl[2])};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"exact RG recovery", exact_rg},
      {"exact CLGrouping recovery", exact_clg},
      {"CLBlind recovery", blind},
      {"surrogate and MST properties", lemma6},
      {"node relationship test", lemma2},
      {"double star, relaxed RG, n=1000", double_star},
      {"HMM ordering of RF", hmm_ordering},
      {"RG vs CLRG runtime on HMM", runtime_ratio},
      {"estimator convergence rate", estimator_rate},
      {"inference against enumeration", inference_oracle},
      {"EM monotonicity", em_monotone},
      {"regCLGrouping sanity", reg_sanity},
      {"CLNJ KL trend", kl_trend},
  };
  int passed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    passed += v.pass ? 1 : 0;
    std::printf("%s  %2zu  %s: %s\n", v.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", passed, criteria.size());
  return 0;
}
