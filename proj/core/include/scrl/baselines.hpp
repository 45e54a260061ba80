#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scrl/dataset.hpp"
#include "scrl/predictor.hpp"

namespace scrl {

struct UncertaintyConfig {
  double dropout_rate = 0.1;
  int passes = 20;        // stochastic forward passes per candidate
  double warm_ratio = 0.05;  // random warm-start the scored predictor trains on

  friend bool operator==(const UncertaintyConfig&, const UncertaintyConfig&) = default;
};

struct DiversityConfig {
  int pca_dim = 128;
  int dbscan_min_pts = 5;

  friend bool operator==(const DiversityConfig&, const DiversityConfig&) = default;
};

// Uniform sample of `budget` distinct ids, seed-deterministic, returned in
// ascending order. budget > |ids| -> BudgetError.
std::vector<std::int64_t> random_sampler(std::span<const std::int64_t> ids,
                                         std::size_t budget,
                                         std::uint64_t seed);

// MC-dropout acquisition: per candidate, `passes` stochastic passes through
// the regression net with the post-feature dropout site active; the score is
// the across-pass output variance averaged over genes. Top-budget scores win,
// ties to the lower id. Per-candidate rng streams derive from (seed, id, pass)
// so scoring is order-independent.
std::vector<std::int64_t> uncertainty_sampler(
    const PredictorModel& model, const Dataset& ds,
    std::span<const std::int64_t> candidate_ids, std::size_t budget,
    const UncertaintyConfig& cfg, std::uint64_t seed);

// Feature-space diversity: standardize, PCA, DBSCAN (radius = median 5-NN
// distance); when DBSCAN yields fewer than ceil(sqrt(N)/5) clusters fall back
// to k-means with exactly that many. Budget fills round-robin across
// clusters.
std::vector<std::int64_t> diversity_sampler(
    const Dataset& ds, std::span<const std::int64_t> candidate_ids,
    std::size_t budget, const DiversityConfig& cfg, std::uint64_t seed);

// ceil(sqrt(n)/5), the adaptive minimum cluster count.
std::size_t diversity_min_clusters(std::size_t n);

// Warm-start orchestration for the uncertainty strategy: reveals a random
// warm pool (counted against the budget), trains the predictor on it, then
// fills the rest by uncertainty scores over the remaining candidates.
std::vector<std::int64_t> run_uncertainty_strategy(
    Dataset& ds, std::span<const std::int64_t> candidate_ids,
    std::size_t budget, const TrainConfig& train_cfg,
    const UncertaintyConfig& cfg, std::uint64_t seed);

}  // namespace scrl
