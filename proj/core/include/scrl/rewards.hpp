#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scrl/dataset.hpp"
#include "scrl/kmeans.hpp"
#include "scrl/matrix.hpp"
#include "scrl/pca.hpp"

namespace scrl {

struct RewardWeights {
  double w_sc = 20.0;
  double w_type = 5.0;
  double w_spa = 0.05;

  friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

struct RewardBreakdown {
  double r_sc = 0.0;
  double r_type = 0.0;
  double r_spa = 0.0;
  double combined = 0.0;
};

// The coverage term of the spatial reward enters with either sign: verbatim
// adds the mean nearest-sample distance as-is, corrected flips it so that
// tighter coverage scores higher (sqrt(2) bounds the distance on [0,1]^2).
enum class SpatialMode { kVerbatim, kCorrected };

// Whether rewards are evaluated on the cumulative pool or the new batch only.
enum class RewardScope { kPool, kBatch };

struct RewardConfig {
  int cluster_count = 100;
  int pca_dim = 50;
  double eps = 1e-8;
  SpatialMode spatial_mode = SpatialMode::kVerbatim;
  RewardScope scope = RewardScope::kPool;
  bool disp_exclude_self = false;
  int kmeans_batch = 1024;
  int kmeans_iters = 100;
  std::uint64_t seed = 42;

  friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

// Fraction of clusters reached by the rows of Z (already in the cluster
// space). Ties in the nearest-center assignment go to the lowest index.
double cluster_coverage_reward(const Matrix& Z, const KmeansModel& km);

// Cell type of the most cosine-similar reference cell, per row of Z.
std::vector<int> assign_cell_types(const Matrix& Z,
                                   const SingleCellReference& ref);

// Normalized entropy of the label distribution.
double type_diversity_reward(std::span<const int> labels, double eps);

double spatial_reward(std::span<const Point2> all_coords,
                      std::span<const Point2> sampled_coords, SpatialMode mode,
                      bool disp_exclude_self = false);

RewardBreakdown combined_reward(double r_sc, double r_type, double r_spa,
                                const RewardWeights& w);

// Embedding rows for revealed spots: the dataset's expression embeddings
// when present, otherwise expression rows padded/truncated to the reference
// embedding width.
Matrix spot_embeddings(const Dataset& ds, std::span<const std::int64_t> ids);

// Precomputed reward machinery for one dataset: PCA basis and k-means
// clusters over the single-cell reference, plus the embedding fallback when
// the dataset ships no expression embeddings (revealed expression rows are
// padded/truncated to the reference width).
class RewardContext {
 public:
  RewardContext(const Dataset& ds, const RewardConfig& cfg);

  // Evaluates the three components over the sampled ids. `candidate_ids` is
  // the sampling universe the coverage distance runs over. All sampled ids
  // must already be revealed.
  RewardBreakdown evaluate(const Dataset& ds,
                           std::span<const std::int64_t> sampled_ids,
                           std::span<const std::int64_t> candidate_ids,
                           const RewardWeights& weights) const;

  // Embedding rows (true or fallback) for the given revealed ids.
  Matrix embeddings_for(const Dataset& ds,
                        std::span<const std::int64_t> ids) const;

  std::vector<int> cell_types_for(const Dataset& ds,
                                  std::span<const std::int64_t> ids) const;

  bool uses_fallback_embeddings() const { return fallback_; }
  const KmeansModel& clusters() const { return km_; }
  const PcaModel& pca() const { return pca_; }

 private:
  RewardConfig cfg_;
  PcaModel pca_;
  KmeansModel km_;
  bool fallback_ = false;
  std::size_t embed_dim_ = 0;
};

}  // namespace scrl
