#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "latree/clgrouping.hpp"
#include "latree/inference.hpp"
#include "latree/models.hpp"

namespace latree {

struct RegOptions {
  Subroutine sub = Subroutine::RG;
  Family family = Family::Gaussian;
  int K = 2;
  RelaxationConfig config;
  std::optional<std::size_t> max_hidden;
  /// Used for local fits and the final refinement of general discrete models.
  EmOptions em;
  std::uint64_t seed = 0;
};

struct RegStep {
  NodeId center = 0;
  std::vector<NodeId> introduced;
  /// Score on the augmented samples that ranked this candidate.
  double approx_bic = 0.0;
  /// Score on the observed samples with every hidden node summed out.
  double bic = 0.0;
};

struct RegResult {
  LatentTree tree;
  TreeModel model;
  BicReport chow_liu;
  BicReport final;
  std::vector<RegStep> steps;
};

/// Grows hidden structure on the Chow-Liu tree one neighbourhood at a time,
/// keeping only splices that raise BIC.
RegResult reg_clgrouping(const SampleMatrix& samples, const RegOptions& options);

}  // namespace latree
