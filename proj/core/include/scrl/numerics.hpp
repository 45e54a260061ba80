#pragma once

#include <span>
#include <vector>

namespace scrl {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Exp-normalize with max subtraction. Output sums to 1 and preserves the
// ordering of the scores. Empty input -> DimensionError.
std::vector<double> softmax(std::span<const double> scores);

// a.b / (|a||b|); 0 when either norm is below 1e-12 so all-zero rows of
// sparse data cannot poison retrieval. Length mismatch -> DimensionError.
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const double> a, std::span<const double> b);

// Entropy of the distribution over the K nonzero categories, divided by
// log(K + eps). K == 1 returns 0. All-zero or negative counts -> ValueError.
double normalized_entropy(std::span<const double> counts, double eps);

// (1/|P|^2) * sum over ordered pairs (i, j) of |p_i - p_j|, self-pairs
// included; exclude_self drops them and divides by |P|*(|P|-1) instead.
// Empty input -> ValueError.
double mean_pairwise_distance(std::span<const Point2> pts,
                              bool exclude_self = false);

// Mean over all candidates of the distance to the nearest sampled point.
// Empty sample -> ValueError.
double mean_coverage_distance(std::span<const Point2> all,
                              std::span<const Point2> sampled);

}  // namespace scrl
