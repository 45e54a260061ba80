#include <doctest.h>

#include <cmath>
#include <vector>

#include "scrl/errors.hpp"
#include "scrl/numerics.hpp"
#include "scrl/rewards.hpp"
#include "scrl/rng.hpp"
#include "scrl/synthgen.hpp"
#include "test_util.hpp"

using namespace scrl;

namespace {

KmeansModel centers_from(std::vector<std::vector<float>> rows) {
  KmeansModel km;
  km.centers = Matrix(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), km.centers.row(i).begin());
  return km;
}

Matrix matrix_from(std::vector<std::vector<float>> rows) {
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

SingleCellReference ref_from(std::vector<std::vector<float>> embs,
                             std::vector<int> types, int n_labels) {
  SingleCellReference ref;
  ref.embeddings = matrix_from(std::move(embs));
  ref.cell_types = std::move(types);
  for (int i = 0; i < n_labels; ++i)
    ref.label_names.push_back("t" + std::to_string(i));
  return ref;
}

}  // namespace

TEST_CASE("cluster coverage: single cluster reached") {
  const KmeansModel km = centers_from(
      {{0.0f, 0.0f}, {10.0f, 10.0f}, {-10.0f, 0.0f}, {0.0f, 10.0f}});
  const Matrix z = matrix_from({{0.1f, 0.0f}, {0.0f, 0.2f}, {-0.1f, 0.0f}});
  CHECK(cluster_coverage_reward(z, km) == doctest::Approx(0.25));
}

TEST_CASE("cluster coverage: rows at every center reach full coverage") {
  const KmeansModel km =
      centers_from({{0.0f, 0.0f}, {10.0f, 10.0f}, {-10.0f, 0.0f}});
  const Matrix z =
      matrix_from({{0.0f, 0.0f}, {10.0f, 10.0f}, {-10.0f, 0.0f}});
  CHECK(cluster_coverage_reward(z, km) == doctest::Approx(1.0));
}

TEST_CASE("cluster coverage: 2/3 fixture") {
  const KmeansModel km =
      centers_from({{0.0f, 0.0f}, {10.0f, 10.0f}, {-10.0f, -10.0f}});
  const Matrix z = matrix_from({{0.0f, 0.0f}, {0.0f, 0.0f}, {9.0f, 9.0f}});
  CHECK(cluster_coverage_reward(z, km) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("cluster coverage: monotone under adding rows") {
  Prng rng(5);
  const Matrix centers_data = test::random_matrix(6, 3, 2, 5.0);
  KmeansModel km;
  km.centers = centers_data;
  Matrix z(0, 3);
  double prev = 0.0;
  for (int add = 0; add < 12; ++add) {
    Matrix bigger(z.rows + 1, 3);
    std::copy(z.data.begin(), z.data.end(), bigger.data.begin());
    for (std::size_t j = 0; j < 3; ++j)
      bigger.at(z.rows, j) = static_cast<float>(rng.normal() * 5.0);
    z = bigger;
    const double cur = cluster_coverage_reward(z, km);
    CHECK(cur >= prev - 1e-12);
    prev = cur;
  }
}

TEST_CASE("cluster coverage: width mismatch raises DimensionError") {
  const KmeansModel km = centers_from({{0.0f, 0.0f}});
  CHECK_THROWS_AS(cluster_coverage_reward(matrix_from({{1.0f}}), km),
                  DimensionError);
}

TEST_CASE("assign_cell_types: exact match retrieves the cell's type") {
  const auto ref = ref_from({{1.0f, 0.0f}, {0.0f, 1.0f}}, {0, 1}, 2);
  const auto labels = assign_cell_types(matrix_from({{0.0f, 1.0f}}), ref);
  CHECK(labels == std::vector<int>{1});
}

TEST_CASE("assign_cell_types: cosine 1 beats cosine -1") {
  // Reference holds q and -q with different types; query -q matches -q.
  const auto ref = ref_from({{2.0f, 1.0f}, {-2.0f, -1.0f}}, {0, 1}, 2);
  const auto labels = assign_cell_types(matrix_from({{-2.0f, -1.0f}}), ref);
  CHECK(labels == std::vector<int>{1});
}

TEST_CASE("assign_cell_types: agrees with the exhaustive cosine oracle") {
  Prng rng(9);
  for (int iter = 0; iter < 30; ++iter) {
    const std::size_t m = 3 + rng.below(8);
    const std::size_t d = 2 + rng.below(5);
    const Matrix embs = test::random_matrix(m, d, 100 + iter);
    SingleCellReference ref;
    ref.embeddings = embs;
    for (std::size_t j = 0; j < m; ++j)
      ref.cell_types.push_back(static_cast<int>(rng.below(3)));
    ref.label_names = {"a", "b", "c"};
    const Matrix queries = test::random_matrix(5, d, 200 + iter);

    const auto labels = assign_cell_types(queries, ref);
    for (std::size_t i = 0; i < queries.rows; ++i) {
      double best = -2.0;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < m; ++j) {
        const double c = cosine(queries.row(i), embs.row(j));
        if (c > best) {
          best = c;
          best_j = j;
        }
      }
      CHECK(labels[i] == ref.cell_types[best_j]);
    }
  }
}

TEST_CASE("assign_cell_types: empty reference raises ValueError") {
  SingleCellReference ref;
  ref.embeddings = Matrix(0, 2);
  CHECK_THROWS_AS(assign_cell_types(matrix_from({{1.0f, 0.0f}}), ref),
                  ValueError);
}

TEST_CASE("type diversity fixtures") {
  CHECK(type_diversity_reward(std::vector<int>{4, 4, 4}, 1e-8) ==
        doctest::Approx(0.0));
  CHECK(type_diversity_reward(std::vector<int>{0, 1, 2, 3}, 1e-8) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(type_diversity_reward(std::vector<int>{0, 0, 0, 1}, 1e-8) ==
        doctest::Approx(0.8113).epsilon(1e-3));
}

TEST_CASE("type diversity is invariant to relabeling") {
  Prng rng(23);
  for (int iter = 0; iter < 30; ++iter) {
    const std::size_t n = 2 + rng.below(20);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(5));
    std::vector<int> relabeled(n);
    const int perm[5] = {3, 0, 4, 1, 2};
    for (std::size_t i = 0; i < n; ++i) relabeled[i] = perm[labels[i]];
    CHECK(type_diversity_reward(labels, 1e-8) ==
          doctest::Approx(type_diversity_reward(relabeled, 1e-8))
              .epsilon(1e-12));
  }
}

TEST_CASE("spatial reward: verbatim fixtures") {
  const std::vector<Point2> two{{0.0, 0.0}, {1.0, 0.0}};

  // D_disp = 0 for a single point; the mean distance term remains.
  const std::vector<Point2> all{{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  const std::vector<Point2> centroid{{1.0, 0.0}};
  CHECK(spatial_reward(all, centroid, SpatialMode::kVerbatim) ==
        doctest::Approx((0.0 + (1.0 + 0.0 + 1.0) / 3.0) / 2.0));

  CHECK(spatial_reward(two, two, SpatialMode::kVerbatim) ==
        doctest::Approx(0.25));
}

TEST_CASE("spatial reward: corrected mode rewards tight coverage") {
  const std::vector<Point2> two{{0.0, 0.0}, {1.0, 0.0}};
  CHECK(spatial_reward(two, two, SpatialMode::kCorrected) ==
        doctest::Approx((0.5 + std::sqrt(2.0)) / 2.0));
}

TEST_CASE("spatial reward: corrected mode strictly improves when a point "
          "moves to the farthest uncovered candidate") {
  const std::vector<Point2> all{{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  const std::vector<Point2> before{{0.0, 0.0}, {1.0, 0.0}};
  const std::vector<Point2> after{{0.0, 0.0}, {2.0, 0.0}};
  CHECK(spatial_reward(all, after, SpatialMode::kCorrected) >
        spatial_reward(all, before, SpatialMode::kCorrected));
}

TEST_CASE("spatial reward: empty sample raises ValueError") {
  const std::vector<Point2> all{{0.0, 0.0}};
  CHECK_THROWS_AS(
      spatial_reward(all, std::vector<Point2>{}, SpatialMode::kVerbatim),
      ValueError);
}

TEST_CASE("combined reward fixtures") {
  const RewardWeights w;  // defaults 20, 5, 0.05
  CHECK(combined_reward(0.5, 1.0, 0.2, w).combined == doctest::Approx(15.01));

  const RewardWeights zero{0.0, 0.0, 0.0};
  CHECK(combined_reward(0.9, 0.8, 0.7, zero).combined == doctest::Approx(0.0));

  const RewardWeights proj{1.0, 0.0, 0.0};
  CHECK(combined_reward(0.37, 0.9, 0.1, proj).combined ==
        doctest::Approx(0.37));
}

TEST_CASE("combined reward is linear in each component") {
  Prng rng(29);
  for (int iter = 0; iter < 20; ++iter) {
    RewardWeights w{rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0),
                    rng.uniform(0.0, 10.0)};
    const double a = rng.uniform01(), b = rng.uniform01(), c = rng.uniform01();
    const double base = combined_reward(a, b, c, w).combined;
    const double bumped = combined_reward(a + 1.0, b, c, w).combined;
    CHECK(bumped - base == doctest::Approx(w.w_sc).epsilon(1e-9));
    const RewardBreakdown br = combined_reward(a, b, c, w);
    CHECK(br.combined ==
          doctest::Approx(w.w_sc * br.r_sc + w.w_type * br.r_type +
                          w.w_spa * br.r_spa)
              .epsilon(1e-9));
  }
}

TEST_CASE("reward context: evaluates a pool on a synthetic dataset") {
  SynthConfig cfg;
  cfg.n_spots = 120;
  cfg.slides = 2;
  cfg.genes = 20;
  cfg.feature_dim = 8;
  cfg.embedding_dim = 8;
  cfg.cell_types = 4;
  cfg.reference_cells = 60;
  SynthOutput out = generate_dataset(cfg);
  Dataset& ds = out.dataset;

  RewardConfig rc;
  rc.cluster_count = 8;
  rc.pca_dim = 4;
  const RewardContext ctx(ds, rc);
  CHECK(!ctx.uses_fallback_embeddings());

  const auto ids = ds.all_ids();
  const std::vector<std::int64_t> pool(ids.begin(), ids.begin() + 30);
  ds.reveal(pool);
  const RewardBreakdown r = ctx.evaluate(ds, pool, ids, RewardWeights{});
  CHECK(r.r_sc > 0.0);
  CHECK(r.r_sc <= 1.0);
  CHECK(r.r_type >= 0.0);
  CHECK(r.r_type <= 1.0);
  CHECK(r.r_spa >= 0.0);
  CHECK(std::isfinite(r.combined));

  // Unrevealed pool member trips the simulator gate.
  const std::vector<std::int64_t> hidden{ids[50]};
  CHECK_THROWS_AS(ctx.evaluate(ds, hidden, ids, RewardWeights{}), StateError);
}

TEST_CASE("reward context: expression fallback when embeddings are absent") {
  SynthConfig cfg;
  cfg.n_spots = 60;
  cfg.slides = 2;
  cfg.genes = 16;
  cfg.feature_dim = 6;
  cfg.embedding_dim = 6;
  cfg.cell_types = 3;
  cfg.reference_cells = 40;
  test::TempDir tmp("fallback");
  generate_files(cfg, tmp.path());
  std::filesystem::remove(tmp.path() / "expr_embeddings.scrm");
  Dataset ds = Dataset::load(tmp.path());

  RewardConfig rc;
  rc.cluster_count = 6;
  rc.pca_dim = 3;
  const RewardContext ctx(ds, rc);
  CHECK(ctx.uses_fallback_embeddings());

  const auto ids = ds.all_ids();
  const std::vector<std::int64_t> pool(ids.begin(), ids.begin() + 10);
  ds.reveal(pool);
  const RewardBreakdown r = ctx.evaluate(ds, pool, ids, RewardWeights{});
  CHECK(std::isfinite(r.combined));
  // Fallback rows are expressions truncated to the reference width.
  const Matrix z = spot_embeddings(ds, pool);
  CHECK(z.cols == ds.reference().embeddings.cols);
  CHECK(z.at(0, 0) == ds.revealed_expression(pool[0])[0]);
}
