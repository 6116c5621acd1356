#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "latree/bench.hpp"
#include "latree/clgrouping.hpp"
#include "latree/distances.hpp"
#include "latree/error.hpp"
#include "latree/generators.hpp"
#include "latree/inference.hpp"
#include "latree/io.hpp"
#include "latree/reg_clgrouping.hpp"

using namespace latree;
using nlohmann::json;

namespace {

const std::vector<std::string> kMethods{"rg", "nj", "clrg", "clnj", "clblind", "cl", "regclrg", "regclnj"};
const std::vector<std::string> kFamilies{"gaussian", "symmetric", "discrete"};

json bic_json(const BicReport& r) { return {{"loglik", r.loglik}, {"kappa", r.kappa}, {"n", r.n}, {"bic", r.bic}}; }

TreeModel load_model_or_tree(const std::string& path, bool& is_model, LatentTree& tree) {
  const std::string text = read_file(path);
  is_model = json_has_model(text);
  if (is_model) {
    TreeModel m = model_from_json(text);
    tree = tree_of(m);
    return m;
  }
  tree = tree_from_json(text);
  return GaussianTreeModel{};
}

struct LearnArgs {
  std::string method, input, input_type = "auto", family = "gaussian", out, newick, emit_mst, model_out;
  std::string epsilon = "auto";
  std::optional<double> tau;
  double epsilon_prime = kDefaultEpsilonPrime;
  double cluster_floor = 0.2;
  int K = 0;
  bool center = false, exact = false;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  int em_iters = 200;
  double em_tol = 1e-6;
  std::optional<std::size_t> max_hidden;
};

int run_learn(const LearnArgs& a) {
  const Family family = family_from_string(a.family);
  const bool reg = a.method == "regclrg" || a.method == "regclnj";
  const bool distances_in =
      a.input_type == "distances" || (a.input_type == "auto" && looks_like_distance_csv(a.input));
  if (reg && distances_in) throw Error(ErrorKind::InvalidSpec, a.method + " needs samples, not distances");

  std::optional<SampleMatrix> samples;
  DistanceMatrix D;
  if (distances_in) {
    D = read_distance_csv(a.input);
    D.sample_count = a.n;
  } else {
    samples = ingest_csv(a.input, family, a.center, a.K);
    D = estimate_distances(*samples, family, samples->alphabet);
  }

  RelaxationConfig config;
  const std::size_t n = samples ? static_cast<std::size_t>(samples->n()) : a.n;
  config.tau = a.tau ? *a.tau : (n > 0 ? default_tau(n) : kInfinity);
  if (a.epsilon != "auto") config.epsilon = std::stod(a.epsilon);
  config.epsilon_prime = a.epsilon_prime;
  config.cluster_floor = a.cluster_floor;
  config.seed = a.seed;

  LatentTree tree;
  std::optional<TreeModel> model;
  json summary;
  if (reg) {
    RegOptions ro;
    ro.sub = a.method == "regclrg" ? Subroutine::RG : Subroutine::NJ;
    ro.family = family;
    ro.K = samples->alphabet > 0 ? samples->alphabet : 2;
    ro.config = config;
    ro.max_hidden = a.max_hidden;
    ro.em.max_iters = a.em_iters;
    ro.em.tol = a.em_tol;
    ro.em.seed = a.seed;
    ro.seed = a.seed;
    RegResult r = reg_clgrouping(*samples, ro);
    tree = r.tree;
    model = r.model;
    summary["chow_liu"] = bic_json(r.chow_liu);
    summary["final"] = bic_json(r.final);
    summary["steps"] = json::array();
    for (const auto& s : r.steps)
      summary["steps"].push_back({{"center", s.center}, {"introduced", s.introduced}, {"bic", s.bic}});
  } else {
    tree = learn_structure(a.method, D, a.exact, config);
  }
  if (samples && !samples->names.empty())
    for (std::size_t k = 0; k < samples->names.size(); ++k) tree.set_label(samples->columns[k], samples->names[k]);
  if (!samples && !D.names.empty())
    for (std::size_t k = 0; k < D.names.size(); ++k) tree.set_label(D.labels[k], D.names[k]);

  write_file(a.out, tree_to_json(tree));
  if (!a.newick.empty()) write_file(a.newick, to_newick(tree) + "\n");
  if (!a.emit_mst.empty()) write_file(a.emit_mst, tree_to_json(mst_observed(D)));
  if (!a.model_out.empty()) {
    if (!model && tree.has_all_lengths()) {
      if (family == Family::Gaussian) model = gaussian_from_lengths(tree, &D);
      if (family == Family::Symmetric) model = symmetric_from_lengths(tree, samples ? samples->alphabet : std::max(2, a.K));
      if (family == Family::Discrete && samples) {
        EmOptions em;
        em.K = samples->alphabet;
        em.max_iters = a.em_iters;
        em.tol = a.em_tol;
        em.seed = a.seed;
        model = em_fit(tree, *samples, em).model;
      }
    }
    if (!model) throw Error(ErrorKind::InvalidSpec, "no parameters can be fitted for this output");
    write_file(a.model_out, model_to_json(*model));
  }
  summary["method"] = a.method;
  summary["nodes"] = tree.node_count();
  summary["hidden"] = tree.hidden_count();
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent tree structure learning"};
  app.require_subcommand(1);

  LearnArgs la;
  auto* learn = app.add_subcommand("learn", "Learn a latent tree from samples or a distance matrix");
  learn->add_option("--method", la.method, "Algorithm")->required()->check(CLI::IsMember(kMethods));
  learn->add_option("--input", la.input, "Samples CSV or distance CSV")->required()->check(CLI::ExistingFile);
  learn->add_option("--input-type", la.input_type, "auto, samples or distances")
      ->check(CLI::IsMember({"auto", "samples", "distances"}));
  learn->add_option("--family", la.family, "Model family")->check(CLI::IsMember(kFamilies));
  learn->add_option("--K", la.K, "Alphabet size (discrete; 0 infers it)");
  learn->add_flag("--center", la.center, "Standardize Gaussian columns");
  learn->add_flag("--exact", la.exact, "Treat distances as exact (no relaxation)");
  learn->add_option("--n", la.n, "Sample count behind a distance CSV (sets the default tau)");
  learn->add_option("--tau", la.tau, "Witness distance gate");
  learn->add_option("--epsilon", la.epsilon, "Sibling threshold or 'auto'");
  learn->add_option("--epsilon-prime", la.epsilon_prime, "NJ contraction threshold");
  learn->add_option("--cluster-floor", la.cluster_floor, "Lambda level below which nodes form one family");
  learn->add_option("--seed", la.seed);
  learn->add_option("--em-iters", la.em_iters);
  learn->add_option("--em-tol", la.em_tol);
  learn->add_option("--max-hidden", la.max_hidden);
  learn->add_option("--out", la.out, "Tree JSON output")->required();
  learn->add_option("--newick", la.newick, "Also write Newick here");
  learn->add_option("--emit-mst", la.emit_mst, "Write the observed MST here");
  learn->add_option("--model-out", la.model_out, "Write fitted model JSON here");

  std::string spec_path, sim_out, truth_out;
  std::size_t sim_n = 1000;
  std::uint64_t sim_seed = 0;
  bool include_hidden = false;
  auto* simulate = app.add_subcommand("simulate", "Sample from a generator spec or a model JSON");
  simulate->add_option("--spec", spec_path, "Generator spec or model JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--n", sim_n)->required();
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--out", sim_out, "Samples CSV")->required();
  simulate->add_option("--truth", truth_out, "Write the generated model here");
  simulate->add_flag("--include-hidden", include_hidden);

  std::string grid_path, bench_out, svg_dir, summary_out;
  int threads = 0;
  bool no_timing = false;
  auto* bench = app.add_subcommand("bench", "Run an experiment grid");
  bench->add_option("--grid", grid_path)->required()->check(CLI::ExistingFile);
  bench->add_option("--out", bench_out, "Per-run CSV")->required();
  bench->add_option("--summary", summary_out, "Aggregate CSV (default <out>_summary.csv)");
  bench->add_option("--svg", svg_dir, "Directory for SVG charts");
  bench->add_option("--threads", threads, "Overrides the grid's thread count");
  bench->add_flag("--no-timing", no_timing, "Write zero wall times for reproducible output");

  std::string truth_path, learned_path, eval_samples;
  std::string eval_family = "gaussian";
  bool eval_center = false;
  auto* eval = app.add_subcommand("eval", "Compare a learned tree or model with the truth");
  eval->add_option("--truth", truth_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--learned", learned_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--samples", eval_samples)->check(CLI::ExistingFile);
  eval->add_flag("--center", eval_center);

  std::string score_model, score_samples;
  bool score_center = false;
  auto* score = app.add_subcommand("score", "BIC of a model on samples");
  score->add_option("--model", score_model)->required()->check(CLI::ExistingFile);
  score->add_option("--samples", score_samples)->required()->check(CLI::ExistingFile);
  score->add_flag("--center", score_center);

  std::string dist_samples, dist_out, dist_family = "gaussian";
  int dist_K = 0;
  bool dist_center = false;
  auto* dist = app.add_subcommand("distances", "Estimate information distances from samples");
  dist->add_option("--samples", dist_samples)->required()->check(CLI::ExistingFile);
  dist->add_option("--family", dist_family)->check(CLI::IsMember(kFamilies));
  dist->add_option("--K", dist_K);
  dist->add_flag("--center", dist_center);
  dist->add_option("--out", dist_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*learn) return run_learn(la);

    if (*simulate) {
      const std::string text = read_file(spec_path);
      TreeModel model = json_has_model(text) ? model_from_json(text) : generate(generator_spec_from_json(text));
      write_samples_csv(sample(model, sim_n, sim_seed, include_hidden), sim_out);
      if (!truth_out.empty()) write_file(truth_out, model_to_json(model));
      return 0;
    }

    if (*bench) {
      Grid grid = grid_from_json(read_file(grid_path));
      if (threads > 0) grid.threads = threads;
      if (no_timing) grid.timing = false;
      const ExperimentReport report = run_experiment(grid);
      write_file(bench_out, rows_csv(report));
      if (summary_out.empty()) {
        std::filesystem::path p(bench_out);
        summary_out = (p.parent_path() / (p.stem().string() + "_summary.csv")).string();
      }
      write_file(summary_out, summary_csv(report));
      if (!svg_dir.empty()) write_svg_charts(report, svg_dir);
      if (report.failures() > 0) {
        std::cerr << report.failures() << " of " << report.rows.size() << " runs failed\n";
        return 2;
      }
      return 0;
    }

    if (*eval) {
      bool truth_is_model = false, learned_is_model = false;
      LatentTree truth_tree, learned_tree;
      TreeModel truth = load_model_or_tree(truth_path, truth_is_model, truth_tree);
      TreeModel learned = load_model_or_tree(learned_path, learned_is_model, learned_tree);
      json out;
      out["recovered"] = trees_equal_up_to_hidden_relabel(learned_tree, truth_tree);
      out["rf"] = robinson_foulds(learned_tree, truth_tree);
      out["hidden_count_error"] =
          std::abs(static_cast<long>(learned_tree.hidden_count()) - static_cast<long>(truth_tree.hidden_count()));
      out["kl"] = nullptr;
      if (truth_is_model && !learned_is_model && learned_tree.has_all_lengths()) {
        if (family_of(truth) == Family::Gaussian) {
          DistanceMatrix sign = exact_distance_matrix(truth);
          learned = gaussian_from_lengths(learned_tree, &sign);
          learned_is_model = true;
        } else if (family_of(truth) == Family::Symmetric) {
          learned = symmetric_from_lengths(learned_tree, alphabet_of(truth));
          learned_is_model = true;
        }
      }
      if (truth_is_model && learned_is_model) {
        try {
          out["kl"] = kl_observed(truth, learned);
        } catch (const Error& e) {
          out["kl_error"] = e.what();
        }
      }
      if (learned_is_model && !eval_samples.empty()) {
        const SampleMatrix s = ingest_csv(eval_samples, family_of(learned), eval_center, alphabet_of(learned));
        out["bic"] = bic_json(bic(learned, s));
      }
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*score) {
      const TreeModel model = model_from_json(read_file(score_model));
      const SampleMatrix s = ingest_csv(score_samples, family_of(model), score_center, alphabet_of(model));
      std::cout << bic_json(bic(model, s)).dump(2) << "\n";
      return 0;
    }

    if (*dist) {
      const Family family = family_from_string(dist_family);
      const SampleMatrix s = ingest_csv(dist_samples, family, dist_center, dist_K);
      write_distance_csv(estimate_distances(s, family, s.alphabet), dist_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
