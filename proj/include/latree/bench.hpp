#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latree/generators.hpp"
#include "latree/recursive_grouping.hpp"

namespace latree {

struct Grid {
  std::vector<GeneratorSpec> specs;
  /// Any of rg, nj, clrg, clnj, clblind, cl, regclrg, regclnj.
  std::vector<std::string> methods;
  /// 0 stands for exact distances (n = infinity).
  std::vector<std::size_t> sample_sizes;
  int trials = 1;
  std::uint64_t seed = 0;
  /// tau is taken from `tau` when set, else default_tau(n) per cell.
  RelaxationConfig config;
  std::optional<double> tau;
  /// Record wall-clock times; off makes the CSV byte-reproducible.
  bool timing = true;
  int threads = 1;
};

struct ExperimentRow {
  std::size_t spec = 0;
  std::string kind;
  std::string family;
  std::string method;
  std::size_t n = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string error;  // empty on success
  bool recovered = false;
  int rf = 0;
  int hidden_count_error = 0;
  std::optional<double> kl;
  long long wall_ms = 0;
};

struct ExperimentSummary {
  std::size_t spec = 0;
  std::string kind;
  std::string family;
  std::string method;
  std::size_t n = 0;
  int runs = 0;
  int failures = 0;
  double recovery_rate = 0.0;
  double mean_rf = 0.0;
  double mean_hidden_count_error = 0.0;
  std::optional<double> mean_kl;
  double mean_wall_ms = 0.0;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentSummary> summary;
  std::size_t failures() const;
};

/// Learns one structure from `D` (and `samples` for the reg methods).
/// `exact` selects the exact algorithms where the method has one.
LatentTree learn_structure(const std::string& method, const DistanceMatrix& D, bool exact,
                           const RelaxationConfig& config);

ExperimentReport run_experiment(const Grid& grid);
std::vector<ExperimentSummary> summarize(const std::vector<ExperimentRow>& rows);

std::string rows_csv(const ExperimentReport& report);
std::string summary_csv(const ExperimentReport& report);
/// One line chart per (spec, metric): x = n on a log axis, one line per method.
void write_svg_charts(const ExperimentReport& report, const std::string& dir);

GeneratorSpec generator_spec_from_json(const std::string& text);
Grid grid_from_json(const std::string& text);

}  // namespace latree
