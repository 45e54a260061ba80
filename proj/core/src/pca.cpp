#include "scrl/pca.hpp"

#include <cmath>
#include <string>

#include "scrl/errors.hpp"

namespace scrl {

Eigen::VectorXd PcaModel::transform_row(std::span<const float> x) const {
  if (static_cast<int>(x.size()) != mean.size())
    throw DimensionError("PcaModel: row width " + std::to_string(x.size()) +
                         " != " + std::to_string(mean.size()));
  Eigen::VectorXd v(mean.size());
  for (int i = 0; i < mean.size(); ++i) v[i] = static_cast<double>(x[i]);
  return basis.transpose() * (v - mean);
}

Eigen::MatrixXd PcaModel::transform(const Matrix& X) const {
  if (static_cast<int>(X.cols) != mean.size())
    throw DimensionError("PcaModel: matrix width mismatch");
  Eigen::MatrixXd out(X.rows, r);
  for (std::size_t i = 0; i < X.rows; ++i)
    out.row(i) = transform_row(X.row(i)).transpose();
  return out;
}

Eigen::VectorXd PcaModel::inverse_transform(const Eigen::VectorXd& z) const {
  return basis * z + mean;
}

PcaModel pca_fit(const Matrix& X, int r, std::uint64_t /*seed*/) {
  const int n = static_cast<int>(X.rows);
  const int d = static_cast<int>(X.cols);
  if (n < 2) throw DimensionError("pca_fit: need at least 2 rows");
  if (r < 1 || r > std::min(n, d))
    throw DimensionError("pca_fit: r=" + std::to_string(r) +
                         " exceeds min(n,d)=" + std::to_string(std::min(n, d)));

  Eigen::MatrixXd Xd(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) Xd(i, j) = static_cast<double>(X.at(i, j));

  PcaModel model;
  model.mean = Xd.colwise().mean();
  Xd.rowwise() -= model.mean.transpose();
  const Eigen::MatrixXd cov = (Xd.transpose() * Xd) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw NumericError("pca_fit: eigendecomposition failed");

  // Eigen returns ascending eigenvalues; take the top r in descending order.
  model.r = r;
  model.basis.resize(d, r);
  model.explained.resize(r);
  for (int k = 0; k < r; ++k) {
    const int src = d - 1 - k;
    Eigen::VectorXd col = solver.eigenvectors().col(src);
    int arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0.0) col = -col;
    model.basis.col(k) = col;
    model.explained[k] = std::max(0.0, solver.eigenvalues()[src]);
  }
  return model;
}

}  // namespace scrl
