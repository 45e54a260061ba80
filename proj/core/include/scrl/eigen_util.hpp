#pragma once

#include <Eigen/Dense>
#include <span>

#include "scrl/matrix.hpp"

namespace scrl {

using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(m.at(i, j));
  return out;
}

inline Eigen::MatrixXd rows_to_eigen(const Matrix& m,
                                     std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(m.at(rows[i], j));
  return out;
}

inline Matrix to_matrix(const Eigen::MatrixXd& m) {
  Matrix out(static_cast<std::size_t>(m.rows()),
             static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
          static_cast<float>(m(i, j));
  return out;
}

// Rows scaled to unit L2 norm; rows with norm under 1e-12 become zero so a
// degenerate vector has cosine 0 against everything.
inline Eigen::MatrixXd normalize_rows(Eigen::MatrixXd m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n < 1e-12)
      m.row(i).setZero();
    else
      m.row(i) /= n;
  }
  return m;
}

}  // namespace scrl
