#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scrl/matrix.hpp"

namespace scrl {

struct KmeansModel {
  Matrix centers;  // C x r
  std::size_t cluster_count() const { return centers.rows; }
};

struct KmeansResult {
  KmeansModel model;
  std::vector<int> assignments;  // nearest center per input row
};

// Index of the nearest center in Euclidean metric, ties to the lowest index.
int nearest_center(std::span<const float> x, const Matrix& centers);

// Mini-batch k-means: k-means++ initialization, then `iters` rounds of
// streaming center updates with per-center learning rate 1/(visit count).
// Centers left empty by the init are re-seeded from the farthest point.
// Final assignments are exact nearest-center over the full input.
// C > n -> DimensionError. Deterministic for a given seed.
KmeansResult minibatch_kmeans(const Matrix& X, int C, int batch, int iters,
                              std::uint64_t seed);

}  // namespace scrl
