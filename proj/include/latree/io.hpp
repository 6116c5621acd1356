#pragma once

#include <string>

#include "latree/distance_matrix.hpp"
#include "latree/models.hpp"
#include "latree/tree.hpp"

namespace latree {

// JSON tree: {"nodes":[{"id","kind","label"?}],"edges":[{"u","v","d"?}]}.
// Model JSON adds "family" plus the parameters of that family.
std::string tree_to_json(const LatentTree& tree);
LatentTree tree_from_json(const std::string& text);
std::string model_to_json(const TreeModel& model);
TreeModel model_from_json(const std::string& text);
/// True when the document carries model parameters, not just a tree.
bool json_has_model(const std::string& text);

/// Rooted at the smallest id; hidden nodes are written as H<k> for id -k.
/// Internal observed nodes become zero-length pendant leaves.
std::string to_newick(const LatentTree& tree);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

/// Header row of labels, square body, "inf" for +inf. Gaussian signs go to
/// the companion <stem>.sign.csv.
void write_distance_csv(const DistanceMatrix& D, const std::string& path);
/// Reads the companion sign file too when it exists.
DistanceMatrix read_distance_csv(const std::string& path);
std::string sign_path(const std::string& path);

/// Header row of node labels, one sample per row.
void write_samples_csv(const SampleMatrix& samples, const std::string& path);

/// Reads a rectangular CSV with a header. Integer headers become node ids,
/// anything else is kept as a name with ids 0..m-1. Gaussian data is
/// standardized per column when `center` is set; discrete data must hold
/// integers in 0..K-1 (K = 0 infers it from the largest entry).
/// Throws RaggedRows, NonNumeric, AlphabetViolation, Parse.
SampleMatrix ingest_csv(const std::string& path, Family family, bool center = false, int K = 0);
SampleMatrix parse_csv(const std::string& text, Family family, bool center = false, int K = 0);

/// True when the CSV at `path` looks like a distance matrix (square body,
/// zero diagonal, symmetric).
bool looks_like_distance_csv(const std::string& path);

}  // namespace latree
