#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

#include "scrl/matrix.hpp"

namespace scrl {

// Principal directions of a centered sample, ordered by descending explained
// variance. Columns follow a fixed sign convention (largest-magnitude
// component positive) so bases are comparable across implementations.
struct PcaModel {
  Eigen::VectorXd mean;            // d
  Eigen::MatrixXd basis;           // d x r, orthonormal columns
  Eigen::VectorXd explained;       // r, descending variances
  int r = 0;

  Eigen::VectorXd transform_row(std::span<const float> x) const;
  // Projects every row of X; result is n x r.
  Eigen::MatrixXd transform(const Matrix& X) const;
  // Maps a projected row back into the original space.
  Eigen::VectorXd inverse_transform(const Eigen::VectorXd& z) const;
};

// Eigendecomposition of the covariance of centered X. Requires n >= 2 and
// r <= min(n, d); DimensionError otherwise. The seed is accepted for
// interface uniformity; the solver itself is exact and deterministic.
PcaModel pca_fit(const Matrix& X, int r, std::uint64_t seed);

}  // namespace scrl
