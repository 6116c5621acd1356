#include "latree/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "latree/clgrouping.hpp"
#include "latree/distances.hpp"
#include "latree/error.hpp"
#include "latree/io.hpp"
#include "latree/neighbor_joining.hpp"
#include "latree/reg_clgrouping.hpp"

namespace latree {

using nlohmann::json;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool is_reg(const std::string& method) { return method == "regclrg" || method == "regclnj"; }

const std::vector<std::string> kMethods{"rg", "nj", "clrg", "clnj", "clblind", "cl", "regclrg", "regclnj"};

std::optional<TreeModel> model_from_lengths(const LatentTree& tree, const TreeModel& truth, const DistanceMatrix& D) {
  if (!tree.has_all_lengths()) return std::nullopt;
  switch (family_of(truth)) {
    case Family::Gaussian: return gaussian_from_lengths(tree, &D);
    case Family::Symmetric: return symmetric_from_lengths(tree, alphabet_of(truth));
    case Family::Discrete: return std::nullopt;
  }
  return std::nullopt;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string n_text(std::size_t n) { return n == 0 ? "inf" : std::to_string(n); }

struct Job {
  std::size_t spec;
  int trial;
  std::size_t n;
};

std::vector<ExperimentRow> run_job(const Grid& grid, const Job& job) {
  const GeneratorSpec& base = grid.specs[job.spec];
  GeneratorSpec spec = base;
  spec.seed = mix(mix(grid.seed, job.spec), static_cast<std::uint64_t>(job.trial));
  const std::uint64_t sample_seed = mix(spec.seed, job.n);

  std::vector<ExperimentRow> rows;
  auto blank = [&](const std::string& method) {
    ExperimentRow r;
    r.spec = job.spec;
    r.kind = to_string(base.kind);
    r.family = to_string(base.family);
    r.method = method;
    r.n = job.n;
    r.trial = job.trial;
    r.seed = spec.seed;
    return r;
  };

  TreeModel truth;
  SampleMatrix samples;
  DistanceMatrix D;
  try {
    truth = generate(spec);
    if (job.n == 0) {
      D = exact_distance_matrix(truth);
    } else {
      samples = sample(truth, job.n, sample_seed);
      D = estimate_distances(samples, base.family, base.K);
    }
  } catch (const std::exception& e) {
    for (const auto& m : grid.methods) {
      rows.push_back(blank(m));
      rows.back().error = e.what();
    }
    return rows;
  }

  RelaxationConfig config = grid.config;
  config.tau = grid.tau ? *grid.tau : (job.n == 0 ? kInfinity : default_tau(job.n));
  config.seed = mix(spec.seed, 7);
  const LatentTree& true_tree = tree_of(truth);

  for (const auto& method : grid.methods) {
    ExperimentRow row = blank(method);
    try {
      LatentTree learned;
      std::optional<TreeModel> fitted;
      const auto t0 = std::chrono::steady_clock::now();
      if (is_reg(method)) {
        if (job.n == 0) throw Error(ErrorKind::InvalidSpec, method + " needs samples");
        RegOptions ro;
        ro.sub = method == "regclrg" ? Subroutine::RG : Subroutine::NJ;
        ro.family = base.family;
        ro.K = base.K;
        ro.config = config;
        ro.seed = config.seed;
        ro.em.seed = config.seed;
        RegResult rr = reg_clgrouping(samples, ro);
        learned = rr.tree;
        fitted = rr.model;
      } else {
        learned = learn_structure(method, D, job.n == 0, config);
      }
      const auto t1 = std::chrono::steady_clock::now();
      if (grid.timing) row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
      row.recovered = trees_equal_up_to_hidden_relabel(learned, true_tree);
      row.rf = static_cast<int>(robinson_foulds(learned, true_tree));
      row.hidden_count_error =
          std::abs(static_cast<int>(learned.hidden_count()) - static_cast<int>(true_tree.hidden_count()));
      if (!fitted) fitted = model_from_lengths(learned, truth, D);
      if (fitted) {
        try {
          row.kl = kl_observed(truth, *fitted);
        } catch (const Error&) {
        }
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

std::size_t ExperimentReport::failures() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.error.empty(); }));
}

LatentTree learn_structure(const std::string& method, const DistanceMatrix& D, bool exact,
                           const RelaxationConfig& config) {
  if (method == "rg") return exact ? rg_exact(D) : rg_relaxed(D, config);
  if (method == "nj")
    return exact ? contract_short_edges(nj(D), kExactContraction) : nj_relaxed(D, config.epsilon_prime);
  if (method == "clrg" || method == "clnj") {
    ClgOptions o;
    o.sub = method == "clrg" ? Subroutine::RG : Subroutine::NJ;
    o.mode = exact ? Mode::Exact : Mode::Relaxed;
    o.config = config;
    return clgrouping(D, o);
  }
  if (method == "clblind") return cl_blind(mst_observed(D));
  if (method == "cl") return mst_observed(D);
  throw Error(ErrorKind::InvalidSpec, "unknown method '" + method + "'");
}

ExperimentReport run_experiment(const Grid& grid) {
  for (const auto& m : grid.methods)
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end())
      throw Error(ErrorKind::InvalidSpec, "unknown method '" + m + "'");
  if (grid.trials < 1) throw Error(ErrorKind::InvalidSpec, "trials must be positive");

  std::vector<Job> jobs;
  for (std::size_t s = 0; s < grid.specs.size(); ++s)
    for (std::size_t n : grid.sample_sizes)
      for (int t = 0; t < grid.trials; ++t) jobs.push_back({s, t, n});

  std::vector<std::vector<ExperimentRow>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) results[k] = run_job(grid, jobs[k]);
  };
  const int threads = std::max(1, grid.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  ExperimentReport report;
  for (auto& r : results)
    for (auto& row : r) report.rows.push_back(std::move(row));
  std::map<std::string, std::size_t> method_rank;
  for (std::size_t k = 0; k < grid.methods.size(); ++k) method_rank.emplace(grid.methods[k], k);
  std::stable_sort(report.rows.begin(), report.rows.end(), [&](const ExperimentRow& a, const ExperimentRow& b) {
    return std::tuple(a.spec, method_rank[a.method], a.n == 0 ? SIZE_MAX : a.n, a.trial) <
           std::tuple(b.spec, method_rank[b.method], b.n == 0 ? SIZE_MAX : b.n, b.trial);
  });
  report.summary = summarize(report.rows);
  return report;
}

std::vector<ExperimentSummary> summarize(const std::vector<ExperimentRow>& rows) {
  std::vector<ExperimentSummary> out;
  for (const auto& r : rows) {
    if (out.empty() || out.back().spec != r.spec || out.back().method != r.method || out.back().n != r.n) {
      ExperimentSummary s;
      s.spec = r.spec;
      s.kind = r.kind;
      s.family = r.family;
      s.method = r.method;
      s.n = r.n;
      out.push_back(s);
    }
    auto& s = out.back();
    ++s.runs;
    if (!r.error.empty()) {
      ++s.failures;
      continue;
    }
    const int ok = s.runs - s.failures;
    auto update = [ok](double& mean, double x) { mean += (x - mean) / ok; };
    update(s.recovery_rate, r.recovered ? 1.0 : 0.0);
    update(s.mean_rf, r.rf);
    update(s.mean_hidden_count_error, r.hidden_count_error);
    update(s.mean_wall_ms, static_cast<double>(r.wall_ms));
  }
  for (auto& s : out) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : rows)
      if (r.spec == s.spec && r.method == s.method && r.n == s.n && r.error.empty() && r.kl) {
        sum += *r.kl;
        ++count;
      }
    if (count) s.mean_kl = sum / count;
  }
  return out;
}

std::string rows_csv(const ExperimentReport& report) {
  std::string out = "spec,kind,family,method,n,trial,seed,status,recovered,rf,hidden_count_error,kl,wall_ms\n";
  for (const auto& r : report.rows) {
    const bool ok = r.error.empty();
    out += std::to_string(r.spec) + ',' + r.kind + ',' + r.family + ',' + r.method + ',' + n_text(r.n) + ',' +
           std::to_string(r.trial) + ',' + std::to_string(r.seed) + ',' + (ok ? "ok" : csv_field(r.error)) + ',';
    if (ok)
      out += std::string(r.recovered ? "1" : "0") + ',' + std::to_string(r.rf) + ',' +
             std::to_string(r.hidden_count_error) + ',' + (r.kl ? fmt(*r.kl) : "NA") + ',' + std::to_string(r.wall_ms);
    else
      out += "NA,NA,NA,NA,NA";
    out += '\n';
  }
  return out;
}

std::string summary_csv(const ExperimentReport& report) {
  std::string out = "spec,kind,family,method,n,runs,failures,recovery_rate,mean_rf,mean_hidden_count_error,mean_kl,mean_wall_ms\n";
  for (const auto& s : report.summary) {
    out += std::to_string(s.spec) + ',' + s.kind + ',' + s.family + ',' + s.method + ',' + n_text(s.n) + ',' +
           std::to_string(s.runs) + ',' + std::to_string(s.failures) + ',' + fmt(s.recovery_rate) + ',' + fmt(s.mean_rf) +
           ',' + fmt(s.mean_hidden_count_error) + ',' + (s.mean_kl ? fmt(*s.mean_kl) : "NA") + ',' +
           fmt(s.mean_wall_ms) + '\n';
  }
  return out;
}

void write_svg_charts(const ExperimentReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  struct Metric {
    const char* name;
    std::optional<double> (*get)(const ExperimentSummary&);
  };
  const Metric metrics[] = {
      {"recovery_rate", [](const ExperimentSummary& s) -> std::optional<double> { return s.recovery_rate; }},
      {"mean_rf", [](const ExperimentSummary& s) -> std::optional<double> { return s.mean_rf; }},
      {"mean_hidden_count_error",
       [](const ExperimentSummary& s) -> std::optional<double> { return s.mean_hidden_count_error; }},
      {"mean_kl", [](const ExperimentSummary& s) { return s.mean_kl; }},
      {"mean_wall_ms", [](const ExperimentSummary& s) -> std::optional<double> { return s.mean_wall_ms; }},
  };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  const double W = 560, H = 360, L = 70, R = 130, T = 30, B = 50;

  std::map<std::size_t, std::vector<const ExperimentSummary*>> by_spec;
  for (const auto& s : report.summary)
    if (s.n > 0 && s.runs > s.failures) by_spec[s.spec].push_back(&s);

  for (const auto& [spec, items] : by_spec) {
    for (const auto& metric : metrics) {
      std::map<std::string, std::vector<std::pair<double, double>>> lines;
      double xmin = INFINITY, xmax = -INFINITY, ymin = 0.0, ymax = -INFINITY;
      for (const auto* s : items) {
        auto y = metric.get(*s);
        if (!y) continue;
        const double x = std::log10(static_cast<double>(s->n));
        lines[s->method].push_back({x, *y});
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, *y);
        ymax = std::max(ymax, *y);
      }
      if (lines.empty()) continue;
      if (xmax <= xmin) xmax = xmin + 1;
      if (ymax <= ymin) ymax = ymin + 1;
      auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
      auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

      std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) +
                        "\" font-family=\"sans-serif\" font-size=\"12\">\n";
      svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
      svg += "<text x=\"" + fmt(L) + "\" y=\"18\">" + items.front()->kind + " / " + items.front()->family + ": " +
             metric.name + "</text>\n";
      svg += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(H - B) + "\" x2=\"" + fmt(W - R) + "\" y2=\"" + fmt(H - B) +
             "\" stroke=\"black\"/>\n";
      svg += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(T) + "\" x2=\"" + fmt(L) + "\" y2=\"" + fmt(H - B) +
             "\" stroke=\"black\"/>\n";
      for (int k = 0; k <= 4; ++k) {
        const double y = ymin + (ymax - ymin) * k / 4;
        svg += "<text x=\"" + fmt(L - 6) + "\" y=\"" + fmt(py(y) + 4) + "\" text-anchor=\"end\">" + fmt(y) +
               "</text>\n";
      }
      for (const auto* s : items) {
        const double x = std::log10(static_cast<double>(s->n));
        svg += "<text x=\"" + fmt(px(x)) + "\" y=\"" + fmt(H - B + 16) + "\" text-anchor=\"middle\">" +
               std::to_string(s->n) + "</text>\n";
      }
      svg += "<text x=\"" + fmt((L + W - R) / 2) + "\" y=\"" + fmt(H - 12) + "\" text-anchor=\"middle\">n</text>\n";
      int c = 0;
      for (const auto& [method, pts] : lines) {
        const char* color = colors[c % 8];
        std::string poly;
        for (const auto& [x, y] : pts) poly += fmt(px(x)) + "," + fmt(py(y)) + " ";
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + poly +
               "\"/>\n";
        for (const auto& [x, y] : pts)
          svg += "<circle cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
        svg += "<text x=\"" + fmt(W - R + 10) + "\" y=\"" + fmt(T + 16 * (c + 1)) + "\" fill=\"" + color + "\">" +
               method + "</text>\n";
        ++c;
      }
      svg += "</svg>\n";
      write_file((std::filesystem::path(dir) / ("spec" + std::to_string(spec) + "_" + metric.name + ".svg")).string(),
                 svg);
    }
  }
}

namespace {

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("field '") + key + "': " + e.what());
  }
}

GeneratorSpec spec_of(const json& j) {
  GeneratorSpec s;
  if (!j.is_object()) throw Error(ErrorKind::InvalidSpec, "generator spec must be an object");
  std::string kind = to_string(s.kind), family = to_string(s.family);
  maybe(j, "kind", kind);
  maybe(j, "family", family);
  s.kind = generator_kind_from_string(kind);
  s.family = family_from_string(family);
  maybe(j, "observed", s.observed);
  maybe(j, "hidden", s.hidden);
  maybe(j, "arity", s.arity);
  maybe(j, "levels", s.levels);
  maybe(j, "K", s.K);
  maybe(j, "lo", s.lo);
  maybe(j, "hi", s.hi);
  maybe(j, "hidden_prob", s.hidden_prob);
  maybe(j, "seed", s.seed);
  return s;
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
}

}  // namespace

GeneratorSpec generator_spec_from_json(const std::string& text) { return spec_of(parse(text)); }

Grid grid_from_json(const std::string& text) {
  const json j = parse(text);
  Grid g;
  if (!j.contains("specs") || !j["specs"].is_array()) throw Error(ErrorKind::InvalidSpec, "grid needs a 'specs' array");
  for (const json& s : j["specs"]) g.specs.push_back(spec_of(s));
  maybe(j, "methods", g.methods);
  if (j.contains("sample_sizes")) {
    for (const json& n : j["sample_sizes"]) {
      if (n.is_string() && n.get<std::string>() == "inf")
        g.sample_sizes.push_back(0);
      else if (n.is_number_unsigned())
        g.sample_sizes.push_back(n.get<std::size_t>());
      else
        throw Error(ErrorKind::InvalidSpec, "sample sizes must be positive integers or \"inf\"");
    }
  }
  maybe(j, "trials", g.trials);
  maybe(j, "seed", g.seed);
  maybe(j, "timing", g.timing);
  maybe(j, "threads", g.threads);
  if (j.contains("config")) {
    const json& c = j["config"];
    if (c.contains("tau") && !(c["tau"].is_string() && c["tau"] == "default")) {
      double tau = 0;
      maybe(c, "tau", tau);
      g.tau = tau;
    }
    if (c.contains("epsilon") && !(c["epsilon"].is_string() && c["epsilon"] == "auto")) {
      double eps = 0;
      maybe(c, "epsilon", eps);
      g.config.epsilon = eps;
    }
    maybe(c, "epsilon_prime", g.config.epsilon_prime);
    maybe(c, "cluster_floor", g.config.cluster_floor);
  }
  if (g.methods.empty() || g.sample_sizes.empty() || g.specs.empty())
    throw Error(ErrorKind::InvalidSpec, "grid needs specs, methods and sample_sizes");
  return g;
}

}  // namespace latree
