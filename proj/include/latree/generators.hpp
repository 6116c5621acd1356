#pragma once

#include <cstdint>
#include <string>

#include "latree/models.hpp"

namespace latree {

enum class GeneratorKind { DoubleStar, Hmm, KComplete, RandomMinimal, Blind };

const char* to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(const std::string& name);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::RandomMinimal;
  /// DoubleStar: observed count. RandomMinimal: upper bound on observed nodes.
  int observed = 20;
  /// Hmm: hidden chain length. Blind: hidden node count.
  int hidden = 18;
  /// KComplete: root degree (every other internal node has degree `arity`).
  int arity = 5;
  /// KComplete: number of hidden levels.
  int levels = 2;
  Family family = Family::Gaussian;
  int K = 2;
  /// Edge correlations are drawn uniformly from [lo, hi].
  double lo = 0.2;
  double hi = 0.8;
  /// RandomMinimal: chance that an internal node of degree >= 3 is hidden.
  double hidden_prob = 0.6;
  std::uint64_t seed = 0;
};

/// Tree topology only (no parameters).
LatentTree generate_topology(const GeneratorSpec& spec);
/// Topology plus parameters for the requested family.
TreeModel generate(const GeneratorSpec& spec);

/// Smallest and largest edge information distance of a model.
std::pair<double, double> edge_distance_range(const TreeModel& model);

}  // namespace latree
