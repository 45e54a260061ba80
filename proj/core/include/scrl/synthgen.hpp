#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "scrl/dataset.hpp"

namespace scrl {

// Synthetic dataset with planted cell-type and spatial structure: each type
// owns a prototype expression/feature pair and 1-3 Gaussian spatial patches;
// type prevalence decays geometrically so the tail types are rare.
struct SynthConfig {
  int n_spots = 2000;
  int slides = 8;
  int genes = 300;
  int feature_dim = 64;
  int embedding_dim = 32;
  int cell_types = 8;
  int reference_cells = 5000;
  double noise = 0.1;
  double type_skew = 0.5;  // prevalence of type k proportional to skew^k
  // Overrides the geometric prevalence when non-empty; one positive weight
  // per type, normalized internally.
  std::vector<double> type_weights;
  std::uint64_t seed = 42;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct SynthOutput {
  Dataset dataset;
  std::vector<int> planted_types;  // per spot row
};

// Deterministic in-memory generation. Invalid config -> ConfigError.
SynthOutput generate_dataset(const SynthConfig& cfg);

// Writes the dataset directory (features.scrm, expressions.scrm,
// expr_embeddings.scrm, spots.csv, reference_embeddings.scrm,
// reference_types.csv) plus planted_types.csv with the generator's
// ground-truth labels. Same config -> byte-identical directory.
void generate_files(const SynthConfig& cfg, const std::filesystem::path& dir);

// Reads planted_types.csv written by generate_files.
std::vector<int> load_planted_types(const std::filesystem::path& dir);

}  // namespace scrl
