#include "scrl/kmeans.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "scrl/errors.hpp"
#include "scrl/rng.hpp"

namespace scrl {

namespace {

double sq_dist(std::span<const float> x, const double* c, std::size_t dim) {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double diff = static_cast<double>(x[j]) - c[j];
    s += diff * diff;
  }
  return s;
}

}  // namespace

int nearest_center(std::span<const float> x, const Matrix& centers) {
  if (x.size() != centers.cols)
    throw DimensionError("nearest_center: point width " +
                         std::to_string(x.size()) + " != center width " +
                         std::to_string(centers.cols));
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows; ++c) {
    double s = 0.0;
    const auto row = centers.row(c);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = static_cast<double>(x[j]) - static_cast<double>(row[j]);
      s += diff * diff;
    }
    if (s < best_d) {  // strict: ties keep the lowest index
      best_d = s;
      best = static_cast<int>(c);
    }
  }
  return best;
}

KmeansResult minibatch_kmeans(const Matrix& X, int C, int batch, int iters,
                              std::uint64_t seed) {
  const std::size_t n = X.rows;
  const std::size_t dim = X.cols;
  if (C < 1 || static_cast<std::size_t>(C) > n)
    throw DimensionError("minibatch_kmeans: C=" + std::to_string(C) +
                         " out of range for n=" + std::to_string(n));
  if (batch < 1 || iters < 0)
    throw ValueError("minibatch_kmeans: batch must be >= 1, iters >= 0");

  Prng rng(seed);
  std::vector<std::vector<double>> centers(
      C, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> chosen;

  // k-means++ seeding.
  {
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    const std::size_t first = static_cast<std::size_t>(rng.below(n));
    chosen.push_back(first);
    for (std::size_t j = 0; j < dim; ++j)
      centers[0][j] = static_cast<double>(X.at(first, j));
    for (int c = 1; c < C; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sq_dist(X.row(i), centers[c - 1].data(), dim);
        if (d < d2[i]) d2[i] = d;
        total += d2[i];
      }
      std::size_t pick = 0;
      if (total <= 0.0) {
        // All remaining points coincide with chosen centers; take the lowest
        // index not already used.
        std::vector<bool> used(n, false);
        for (std::size_t u : chosen) used[u] = true;
        while (pick < n && used[pick]) ++pick;
        if (pick == n) pick = 0;
      } else {
        const double u = rng.uniform01() * total;
        double cum = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          cum += d2[i];
          if (cum > u) {
            pick = i;
            break;
          }
        }
      }
      chosen.push_back(pick);
      for (std::size_t j = 0; j < dim; ++j)
        centers[c][j] = static_cast<double>(X.at(pick, j));
    }
  }

  auto nearest_dbl = [&](std::span<const float> x) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      const double s = sq_dist(x, centers[c].data(), dim);
      if (s < best_d) {
        best_d = s;
        best = c;
      }
    }
    return best;
  };

  // Re-seed centers that capture no points after init.
  for (int attempt = 0; attempt < C; ++attempt) {
    std::vector<int> count(C, 0);
    std::vector<double> dist_to_nearest(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = nearest_dbl(X.row(i));
      ++count[c];
      dist_to_nearest[i] = sq_dist(X.row(i), centers[c].data(), dim);
    }
    int empty = -1;
    for (int c = 0; c < C; ++c) {
      if (count[c] == 0) {
        empty = c;
        break;
      }
    }
    if (empty < 0) break;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (dist_to_nearest[i] > far_d) {
        far_d = dist_to_nearest[i];
        far = i;
      }
    }
    for (std::size_t j = 0; j < dim; ++j)
      centers[empty][j] = static_cast<double>(X.at(far, j));
  }

  // Streaming mini-batch updates, per-center learning rate 1/(visit count).
  // Batches draw without replacement (a full shuffled pass when batch >= n),
  // so with C=1 the center is the exact running mean of the data.
  std::vector<std::int64_t> visits(C, 0);
  const std::size_t batch_size = std::min<std::size_t>(batch, n);
  std::vector<int> batch_assign(batch_size);
  for (int it = 0; it < iters; ++it) {
    const std::vector<std::size_t> batch_idx = rng.sample_indices(n, batch_size);
    // Assign the whole batch against frozen centers, then update.
    for (std::size_t b = 0; b < batch_size; ++b)
      batch_assign[b] = nearest_dbl(X.row(batch_idx[b]));
    for (std::size_t b = 0; b < batch_size; ++b) {
      const int c = batch_assign[b];
      const double eta = 1.0 / static_cast<double>(++visits[c]);
      const auto row = X.row(batch_idx[b]);
      for (std::size_t j = 0; j < dim; ++j)
        centers[c][j] += eta * (static_cast<double>(row[j]) - centers[c][j]);
    }
  }

  KmeansResult result;
  result.model.centers = Matrix(C, dim);
  for (int c = 0; c < C; ++c)
    for (std::size_t j = 0; j < dim; ++j)
      result.model.centers.at(c, j) = static_cast<float>(centers[c][j]);

  result.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    result.assignments[i] = nearest_center(X.row(i), result.model.centers);
  return result;
}

}  // namespace scrl
