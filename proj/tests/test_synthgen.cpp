#include <doctest.h>

#include <Eigen/Dense>
#include <fstream>
#include <vector>

#include "scrl/eigen_util.hpp"
#include "scrl/errors.hpp"
#include "scrl/rewards.hpp"
#include "scrl/synthgen.hpp"
#include "test_util.hpp"

using namespace scrl;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("synthgen: zero noise collapses each type to its prototype") {
  SynthConfig cfg;
  cfg.n_spots = 80;
  cfg.slides = 2;
  cfg.genes = 10;
  cfg.feature_dim = 4;
  cfg.embedding_dim = 4;
  cfg.cell_types = 3;
  cfg.reference_cells = 30;
  cfg.noise = 0.0;
  const SynthOutput out = generate_dataset(cfg);
  const Matrix& expr = out.dataset.oracle_expressions();
  for (std::size_t i = 1; i < out.dataset.n_spots(); ++i) {
    for (std::size_t j = 0; j < out.dataset.n_spots(); ++j) {
      if (out.planted_types[i] != out.planted_types[j]) continue;
      const auto a = expr.row(i);
      const auto b = expr.row(j);
      CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
  }
}

TEST_CASE("synthgen: planted types recoverable via the reference prior") {
  SynthConfig cfg;
  cfg.n_spots = 300;
  cfg.slides = 2;
  cfg.genes = 40;
  cfg.feature_dim = 8;
  cfg.embedding_dim = 12;
  cfg.cell_types = 2;
  cfg.reference_cells = 200;
  cfg.noise = 0.1;
  cfg.type_skew = 1.0;  // balanced so both types appear often
  SynthOutput out = generate_dataset(cfg);

  Dataset& ds = out.dataset;
  const auto ids = ds.all_ids();
  ds.reveal(ids);
  const std::vector<int> matched =
      assign_cell_types(spot_embeddings(ds, ids), ds.reference());

  std::size_t hits = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    // In-memory reference labels are the planted ids directly.
    if (matched[i] == out.planted_types[ds.row_of(ids[i])]) ++hits;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(ids.size()) > 0.99);
}

TEST_CASE("synthgen: same seed gives byte-identical directories") {
  test::TempDir a("synth_a"), b("synth_b");
  SynthConfig cfg;
  cfg.n_spots = 50;
  cfg.slides = 2;
  cfg.genes = 8;
  cfg.feature_dim = 4;
  cfg.embedding_dim = 4;
  cfg.cell_types = 2;
  cfg.reference_cells = 20;
  generate_files(cfg, a.path());
  generate_files(cfg, b.path());
  for (const char* name :
       {"features.scrm", "expressions.scrm", "expr_embeddings.scrm",
        "reference_embeddings.scrm", "spots.csv", "reference_types.csv",
        "planted_types.csv"}) {
    CHECK(slurp(a.path() / name) == slurp(b.path() / name));
  }
  CHECK(load_planted_types(a.path()).size() == 50);
}

TEST_CASE("synthgen: a linear regressor finds feature-expression signal") {
  SynthConfig cfg;
  cfg.n_spots = 400;
  cfg.slides = 2;
  cfg.genes = 20;
  cfg.feature_dim = 16;
  cfg.embedding_dim = 8;
  cfg.cell_types = 4;
  cfg.reference_cells = 50;
  const SynthOutput out = generate_dataset(cfg);

  const Eigen::MatrixXd f = to_eigen(out.dataset.features());
  const Eigen::MatrixXd y = to_eigen(out.dataset.oracle_expressions());
  const Eigen::Index n = f.rows();

  // Ridge fit on centered data.
  const Eigen::RowVectorXd fm = f.colwise().mean();
  const Eigen::RowVectorXd ym = y.colwise().mean();
  const Eigen::MatrixXd fc = f.rowwise() - fm;
  const Eigen::MatrixXd yc = y.rowwise() - ym;
  const Eigen::MatrixXd gram =
      fc.transpose() * fc +
      1e-3 * Eigen::MatrixXd::Identity(f.cols(), f.cols());
  const Eigen::MatrixXd w = gram.ldlt().solve(fc.transpose() * yc);
  const Eigen::MatrixXd resid = yc - fc * w;

  const double mse_model =
      resid.array().square().sum() / static_cast<double>(n * y.cols());
  const double var_y =
      yc.array().square().sum() / static_cast<double>(n * y.cols());
  CHECK(mse_model < var_y);          // strictly below the variance of Y
  CHECK(mse_model < 0.5 * var_y);    // and by a wide margin on this fixture
}

TEST_CASE("synthgen: invalid configs raise ConfigError") {
  SynthConfig cfg;
  cfg.n_spots = 3;
  cfg.cell_types = 8;
  CHECK_THROWS_AS(generate_dataset(cfg), ConfigError);
  SynthConfig bad_noise;
  bad_noise.noise = -1.0;
  CHECK_THROWS_AS(generate_dataset(bad_noise), ConfigError);
  SynthConfig bad_skew;
  bad_skew.type_skew = 0.0;
  CHECK_THROWS_AS(generate_dataset(bad_skew), ConfigError);
}
