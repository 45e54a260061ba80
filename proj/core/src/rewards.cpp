#include "scrl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <unordered_set>

#include "scrl/eigen_util.hpp"
#include "scrl/errors.hpp"
#include "scrl/numerics.hpp"
#include "scrl/rng.hpp"

namespace scrl {

double cluster_coverage_reward(const Matrix& Z, const KmeansModel& km) {
  if (Z.rows == 0) throw ValueError("cluster_coverage_reward: empty sample");
  if (Z.cols != km.centers.cols)
    throw DimensionError("cluster_coverage_reward: width mismatch with centers");
  std::unordered_set<int> reached;
  for (std::size_t i = 0; i < Z.rows; ++i)
    reached.insert(nearest_center(Z.row(i), km.centers));
  return static_cast<double>(reached.size()) /
         static_cast<double>(km.cluster_count());
}

std::vector<int> assign_cell_types(const Matrix& Z,
                                   const SingleCellReference& ref) {
  if (ref.embeddings.rows == 0)
    throw ValueError("assign_cell_types: empty reference");
  if (Z.cols != ref.embeddings.cols)
    throw DimensionError("assign_cell_types: embedding width mismatch");

  const Eigen::MatrixXd zn = normalize_rows(to_eigen(Z));
  const Eigen::MatrixXd qn = normalize_rows(to_eigen(ref.embeddings));
  const Eigen::MatrixXd sims = zn * qn.transpose();  // |S| x M

  std::vector<int> labels(Z.rows);
  for (Eigen::Index i = 0; i < sims.rows(); ++i) {
    Eigen::Index best = 0;
    double best_sim = sims(i, 0);
    for (Eigen::Index j = 1; j < sims.cols(); ++j) {
      if (sims(i, j) > best_sim) {  // ties keep the lowest reference index
        best_sim = sims(i, j);
        best = j;
      }
    }
    labels[static_cast<std::size_t>(i)] =
        ref.cell_types[static_cast<std::size_t>(best)];
  }
  return labels;
}

double type_diversity_reward(std::span<const int> labels, double eps) {
  if (labels.empty()) throw ValueError("type_diversity_reward: empty labels");
  std::map<int, double> counts;
  for (int l : labels) counts[l] += 1.0;
  std::vector<double> vec;
  vec.reserve(counts.size());
  for (const auto& [label, c] : counts) vec.push_back(c);
  return normalized_entropy(vec, eps);
}

double spatial_reward(std::span<const Point2> all_coords,
                      std::span<const Point2> sampled_coords, SpatialMode mode,
                      bool disp_exclude_self) {
  if (sampled_coords.empty()) throw ValueError("spatial_reward: empty sample");
  const double disp = mean_pairwise_distance(sampled_coords, disp_exclude_self);
  const double cover = mean_coverage_distance(all_coords, sampled_coords);
  if (mode == SpatialMode::kVerbatim) return (disp + cover) / 2.0;
  return (disp + (std::sqrt(2.0) - cover)) / 2.0;
}

RewardBreakdown combined_reward(double r_sc, double r_type, double r_spa,
                                const RewardWeights& w) {
  RewardBreakdown b;
  b.r_sc = r_sc;
  b.r_type = r_type;
  b.r_spa = r_spa;
  b.combined = w.w_sc * r_sc + w.w_type * r_type + w.w_spa * r_spa;
  return b;
}

RewardContext::RewardContext(const Dataset& ds, const RewardConfig& cfg)
    : cfg_(cfg) {
  const Matrix& q = ds.reference().embeddings;
  const int m = static_cast<int>(q.rows);
  const int d_z = static_cast<int>(q.cols);
  if (m < 2) throw ValueError("RewardContext: reference needs >= 2 cells");

  const int r = std::min({cfg.pca_dim, d_z, m});
  pca_ = pca_fit(q, r, cfg.seed);

  Matrix projected(q.rows, static_cast<std::size_t>(r));
  for (std::size_t i = 0; i < q.rows; ++i) {
    const Eigen::VectorXd z = pca_.transform_row(q.row(i));
    for (int j = 0; j < r; ++j)
      projected.at(i, static_cast<std::size_t>(j)) = static_cast<float>(z[j]);
  }

  const int c = std::min(cfg.cluster_count, m);
  km_ = minibatch_kmeans(projected, c, cfg.kmeans_batch, cfg.kmeans_iters,
                         derive_seed({cfg.seed, 0x6b6dU}))
            .model;

  fallback_ = !ds.has_expr_embeddings();
  embed_dim_ = static_cast<std::size_t>(d_z);
  if (fallback_) {
    std::cerr << "[rewards] dataset has no expression embeddings; falling back"
                 " to expression rows padded/truncated to width "
              << embed_dim_ << "\n";
  }
}

Matrix spot_embeddings(const Dataset& ds, std::span<const std::int64_t> ids) {
  const std::size_t width = ds.reference().embeddings.cols;
  const bool fallback = !ds.has_expr_embeddings();
  Matrix Z(ids.size(), width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!fallback) {
      const auto row = ds.revealed_embedding(ids[i]);
      std::copy(row.begin(), row.end(), Z.row(i).begin());
    } else {
      const auto expr = ds.revealed_expression(ids[i]);
      const std::size_t n = std::min(width, expr.size());
      auto dst = Z.row(i);
      std::copy(expr.begin(), expr.begin() + n, dst.begin());
      // remaining entries stay zero-padded
    }
  }
  return Z;
}

Matrix RewardContext::embeddings_for(const Dataset& ds,
                                     std::span<const std::int64_t> ids) const {
  return spot_embeddings(ds, ids);
}

std::vector<int> RewardContext::cell_types_for(
    const Dataset& ds, std::span<const std::int64_t> ids) const {
  return assign_cell_types(embeddings_for(ds, ids), ds.reference());
}

RewardBreakdown RewardContext::evaluate(
    const Dataset& ds, std::span<const std::int64_t> sampled_ids,
    std::span<const std::int64_t> candidate_ids,
    const RewardWeights& weights) const {
  if (sampled_ids.empty())
    throw ValueError("RewardContext::evaluate: empty sample set");

  const Matrix Z = embeddings_for(ds, sampled_ids);
  const std::vector<int> labels = assign_cell_types(Z, ds.reference());

  Matrix Zp(Z.rows, static_cast<std::size_t>(pca_.r));
  for (std::size_t i = 0; i < Z.rows; ++i) {
    const Eigen::VectorXd p = pca_.transform_row(Z.row(i));
    for (int j = 0; j < pca_.r; ++j)
      Zp.at(i, static_cast<std::size_t>(j)) = static_cast<float>(p[j]);
  }

  std::vector<Point2> sampled_pts;
  sampled_pts.reserve(sampled_ids.size());
  for (std::int64_t id : sampled_ids) sampled_pts.push_back(ds.coords_of(id));
  std::vector<Point2> all_pts;
  all_pts.reserve(candidate_ids.size());
  for (std::int64_t id : candidate_ids) all_pts.push_back(ds.coords_of(id));

  const double r_sc = cluster_coverage_reward(Zp, km_);
  const double r_type = type_diversity_reward(labels, cfg_.eps);
  const double r_spa = spatial_reward(all_pts, sampled_pts, cfg_.spatial_mode,
                                      cfg_.disp_exclude_self);
  return combined_reward(r_sc, r_type, r_spa, weights);
}

}  // namespace scrl
