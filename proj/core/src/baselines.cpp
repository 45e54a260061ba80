#include "scrl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>

#include "scrl/eigen_util.hpp"
#include "scrl/errors.hpp"
#include "scrl/kmeans.hpp"
#include "scrl/pca.hpp"
#include "scrl/rng.hpp"

namespace scrl {

std::vector<std::int64_t> random_sampler(std::span<const std::int64_t> ids,
                                         std::size_t budget,
                                         std::uint64_t seed) {
  std::vector<std::int64_t> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (budget > sorted.size())
    throw BudgetError("random_sampler: budget " + std::to_string(budget) +
                      " exceeds candidate count " +
                      std::to_string(sorted.size()));
  Prng rng(seed);
  const std::vector<std::size_t> picks =
      rng.sample_indices(sorted.size(), budget);
  std::vector<std::int64_t> out;
  out.reserve(budget);
  for (std::size_t p : picks) out.push_back(sorted[p]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::int64_t> uncertainty_sampler(
    const PredictorModel& model, const Dataset& ds,
    std::span<const std::int64_t> candidate_ids, std::size_t budget,
    const UncertaintyConfig& cfg, std::uint64_t seed) {
  if (!model.trained)
    throw StateError("uncertainty_sampler: predictor has not been trained");
  if (budget > candidate_ids.size())
    throw BudgetError("uncertainty_sampler: budget exceeds candidates");
  if (cfg.passes < 1) throw ValueError("uncertainty_sampler: passes must be >= 1");

  struct Scored {
    std::int64_t id;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(candidate_ids.size());

  const int g = model.reg.out_dim();
  for (std::int64_t id : candidate_ids) {
    const auto frow = ds.feature_row(id);
    Eigen::MatrixXd f(1, frow.size());
    for (std::size_t j = 0; j < frow.size(); ++j)
      f(0, static_cast<Eigen::Index>(j)) = static_cast<double>(frow[j]);

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(g);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(g);
    for (int t = 0; t < cfg.passes; ++t) {
      Prng pass_rng(derive_seed({seed, static_cast<std::uint64_t>(id),
                                 static_cast<std::uint64_t>(t)}));
      const Eigen::VectorXd y =
          regress_with_dropout(model.reg, f, cfg.dropout_rate, pass_rng)
              .row(0)
              .transpose();
      sum += y;
      sum_sq += y.cwiseProduct(y);
    }
    const double inv_t = 1.0 / static_cast<double>(cfg.passes);
    // Population variance across passes, averaged over genes.
    const Eigen::VectorXd mean = sum * inv_t;
    const Eigen::VectorXd var = sum_sq * inv_t - mean.cwiseProduct(mean);
    scored.push_back({id, var.cwiseMax(0.0).mean()});
  }

  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  std::vector<std::int64_t> out;
  out.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) out.push_back(scored[i].id);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t diversity_min_clusters(std::size_t n) {
  return static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(n)) / 5.0));
}

namespace {

// Plain O(n^2) DBSCAN; n here is desk-scale. Returns cluster id per point,
// -1 for noise.
std::vector<int> dbscan(const Eigen::MatrixXd& x, double eps, int min_pts,
                        int* cluster_count) {
  const Eigen::Index n = x.rows();
  const double eps_sq = eps * eps;
  std::vector<std::vector<int>> neighbors(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if ((x.row(i) - x.row(j)).squaredNorm() <= eps_sq)
        neighbors[i].push_back(static_cast<int>(j));
    }
  }
  std::vector<int> label(n, -2);  // -2 unvisited, -1 noise
  int cluster = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (label[i] != -2) continue;
    if (neighbors[i].size() < static_cast<std::size_t>(min_pts)) {
      label[i] = -1;
      continue;
    }
    label[i] = cluster;
    std::vector<int> frontier = neighbors[i];
    for (std::size_t f = 0; f < frontier.size(); ++f) {
      const int p = frontier[f];
      if (label[p] == -1) label[p] = cluster;  // border point
      if (label[p] != -2) continue;
      label[p] = cluster;
      if (neighbors[p].size() >= static_cast<std::size_t>(min_pts))
        frontier.insert(frontier.end(), neighbors[p].begin(),
                        neighbors[p].end());
    }
    ++cluster;
  }
  *cluster_count = cluster;
  return label;
}

double median_knn_distance(const Eigen::MatrixXd& x, int k) {
  const Eigen::Index n = x.rows();
  std::vector<double> kth(n, 0.0);
  std::vector<double> dists;
  for (Eigen::Index i = 0; i < n; ++i) {
    dists.clear();
    dists.reserve(n - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      dists.push_back((x.row(i) - x.row(j)).norm());
    }
    const std::size_t kk =
        std::min<std::size_t>(static_cast<std::size_t>(k), dists.size()) - 1;
    std::nth_element(dists.begin(), dists.begin() + kk, dists.end());
    kth[i] = dists[kk];
  }
  std::nth_element(kth.begin(), kth.begin() + kth.size() / 2, kth.end());
  return kth[kth.size() / 2];
}

}  // namespace

std::vector<std::int64_t> diversity_sampler(
    const Dataset& ds, std::span<const std::int64_t> candidate_ids,
    std::size_t budget, const DiversityConfig& cfg, std::uint64_t seed) {
  std::vector<std::int64_t> ids(candidate_ids.begin(), candidate_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t n = ids.size();
  if (budget > n)
    throw BudgetError("diversity_sampler: budget exceeds candidates");
  if (budget == 0) return {};

  // Standardize features over the candidate set.
  std::vector<std::size_t> rows;
  rows.reserve(n);
  for (std::int64_t id : ids) rows.push_back(ds.row_of(id));
  Eigen::MatrixXd f =
      rows_to_eigen(ds.features(), std::span<const std::size_t>(rows));
  const Eigen::RowVectorXd mean = f.colwise().mean();
  f.rowwise() -= mean;
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const double sd =
        std::sqrt(f.col(j).squaredNorm() / static_cast<double>(f.rows()));
    if (sd > 1e-12) f.col(j) /= sd;
  }

  // PCA to the configured dimension (bounded by the data shape).
  const int target = std::min<int>(
      {cfg.pca_dim, static_cast<int>(f.cols()), static_cast<int>(n) - 1});
  Eigen::MatrixXd reduced;
  if (target >= 1 && static_cast<int>(n) >= 2) {
    Matrix fm = to_matrix(f);
    const PcaModel pca = pca_fit(fm, target, seed);
    reduced = pca.transform(fm);
  } else {
    reduced = f;
  }

  const std::size_t min_clusters = std::max<std::size_t>(
      1, std::min<std::size_t>(diversity_min_clusters(n), n));

  int found = 0;
  std::vector<int> labels;
  if (n >= 2) {
    const double radius = median_knn_distance(reduced, 5);
    if (radius > 1e-12)
      labels = dbscan(reduced, radius, cfg.dbscan_min_pts, &found);
  }
  if (found > 0) {
    // Attach noise points to the cluster of the nearest labeled point.
    for (Eigen::Index i = 0; i < reduced.rows(); ++i) {
      if (labels[i] >= 0) continue;
      double best = std::numeric_limits<double>::infinity();
      int best_label = 0;
      for (Eigen::Index j = 0; j < reduced.rows(); ++j) {
        if (labels[j] < 0) continue;
        const double d = (reduced.row(i) - reduced.row(j)).squaredNorm();
        if (d < best) {
          best = d;
          best_label = labels[j];
        }
      }
      labels[i] = best_label;
    }
  }
  if (found < static_cast<int>(min_clusters)) {
    // Too coarse (or fully degenerate): enforce the cluster count via k-means.
    const KmeansResult km = minibatch_kmeans(
        to_matrix(reduced), static_cast<int>(min_clusters), 1024, 100,
        derive_seed({seed, 0x6476ull}));
    labels = km.assignments;
    found = static_cast<int>(min_clusters);
  }

  // Round-robin uniform draw per cluster until the budget is filled.
  std::vector<std::vector<std::size_t>> members(found);
  for (std::size_t i = 0; i < n; ++i)
    members[labels[i]].push_back(i);
  Prng rng(derive_seed({seed, 0x7272ull}));
  for (auto& m : members) rng.shuffle(m);

  std::vector<std::int64_t> out;
  out.reserve(budget);
  std::vector<std::size_t> cursor(members.size(), 0);
  while (out.size() < budget) {
    bool advanced = false;
    for (std::size_t c = 0; c < members.size() && out.size() < budget; ++c) {
      if (cursor[c] < members[c].size()) {
        out.push_back(ids[members[c][cursor[c]++]]);
        advanced = true;
      }
    }
    if (!advanced) break;  // unreachable while budget <= n
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::int64_t> run_uncertainty_strategy(
    Dataset& ds, std::span<const std::int64_t> candidate_ids,
    std::size_t budget, const TrainConfig& train_cfg,
    const UncertaintyConfig& cfg, std::uint64_t seed) {
  std::vector<std::int64_t> ids(candidate_ids.begin(), candidate_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (budget > ids.size())
    throw BudgetError("uncertainty strategy: budget exceeds candidates");

  // The warm-start is sequenced too, so it counts against the budget.
  const std::size_t warm_target = static_cast<std::size_t>(
      std::ceil(cfg.warm_ratio * static_cast<double>(ids.size())));
  const std::size_t warm_size =
      std::max<std::size_t>(1, std::min(warm_target, budget));
  std::vector<std::int64_t> warm =
      random_sampler(ids, warm_size, derive_seed({seed, 0x7761ull}));
  ds.reveal(warm);

  if (warm.size() == budget) return warm;

  TrainConfig warm_cfg = train_cfg;
  warm_cfg.seed = derive_seed({seed, 0x7774ull});
  const PredictorModel model = train_predictor(ds, warm, warm_cfg);

  std::vector<std::int64_t> rest;
  rest.reserve(ids.size() - warm.size());
  std::set_difference(ids.begin(), ids.end(), warm.begin(), warm.end(),
                      std::back_inserter(rest));
  const std::vector<std::int64_t> scored = uncertainty_sampler(
      model, ds, rest, budget - warm.size(), cfg, derive_seed({seed, 0x7573ull}));

  std::vector<std::int64_t> out = warm;
  out.insert(out.end(), scored.begin(), scored.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace scrl
