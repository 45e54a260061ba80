#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <vector>

#include "scrl/dataset.hpp"
#include "scrl/errors.hpp"
#include "scrl/synthgen.hpp"
#include "test_util.hpp"

using namespace scrl;

namespace {

SynthConfig small_cfg() {
  SynthConfig cfg;
  cfg.n_spots = 60;
  cfg.slides = 4;
  cfg.genes = 12;
  cfg.feature_dim = 6;
  cfg.embedding_dim = 5;
  cfg.cell_types = 3;
  cfg.reference_cells = 40;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("dataset: generated directory loads with empty revealed set") {
  test::TempDir tmp("ds");
  generate_files(small_cfg(), tmp.path());
  Dataset ds = Dataset::load(tmp.path());
  CHECK(ds.n_spots() == 60);
  CHECK(ds.gene_count() == 12);
  CHECK(ds.feature_dim() == 6);
  CHECK(ds.has_expr_embeddings());
  CHECK(ds.revealed_count() == 0);
  CHECK(ds.reference().embeddings.rows == 40);
  CHECK(ds.reference().label_names.size() == 3);
}

TEST_CASE("dataset: row-count mismatch raises SchemaError") {
  test::TempDir tmp("ds");
  generate_files(small_cfg(), tmp.path());
  // Rewrite features with one row fewer.
  Matrix f = load_matrix(tmp.path() / "features.scrm");
  Matrix shorter(f.rows - 1, f.cols);
  std::copy(f.data.begin(), f.data.begin() + shorter.data.size(),
            shorter.data.begin());
  save_matrix(shorter, tmp.path() / "features.scrm");
  CHECK_THROWS_AS(Dataset::load(tmp.path()), SchemaError);
}

TEST_CASE("dataset: out-of-range coordinates raise ValueError") {
  test::TempDir tmp("ds");
  generate_files(small_cfg(), tmp.path());
  // Patch one coordinate outside [0,1].
  std::ifstream in(tmp.path() / "spots.csv");
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  lines[3] = "3,3,1.5,0.5";
  std::ofstream out(tmp.path() / "spots.csv", std::ios::trunc);
  out << header << "\n";
  for (const auto& l : lines) out << l << "\n";
  out.close();
  CHECK_THROWS_AS(Dataset::load(tmp.path()), ValueError);
}

TEST_CASE("dataset: missing expr_embeddings is an accepted absence") {
  test::TempDir tmp("ds");
  generate_files(small_cfg(), tmp.path());
  std::filesystem::remove(tmp.path() / "expr_embeddings.scrm");
  Dataset ds = Dataset::load(tmp.path());
  CHECK(!ds.has_expr_embeddings());
}

TEST_CASE("dataset: reveal semantics") {
  test::TempDir tmp("ds");
  generate_files(small_cfg(), tmp.path());
  Dataset ds = Dataset::load(tmp.path());

  SUBCASE("empty reveal changes nothing") {
    const ExpressionBatch b = ds.reveal(std::vector<std::int64_t>{});
    CHECK(b.ids.empty());
    CHECK(ds.revealed_count() == 0);
  }

  SUBCASE("idempotent reveal") {
    const ExpressionBatch a = ds.reveal(std::vector<std::int64_t>{3});
    const ExpressionBatch b = ds.reveal(std::vector<std::int64_t>{3});
    CHECK(a.expressions.data == b.expressions.data);
    CHECK(ds.revealed_count() == 1);
    CHECK(ds.is_revealed(3));
  }

  SUBCASE("revealing everything returns the expression matrix") {
    const auto ids = ds.all_ids();
    const ExpressionBatch b = ds.reveal(ids);
    const Matrix all = load_matrix(tmp.path() / "expressions.scrm");
    CHECK(b.expressions.data == all.data);
    CHECK(ds.revealed_count() == ds.n_spots());
  }

  SUBCASE("unknown id raises KeyError and leaves state untouched") {
    CHECK_THROWS_AS(ds.reveal(std::vector<std::int64_t>{3, 424242}), KeyError);
    CHECK(ds.revealed_count() == 0);
  }

  SUBCASE("expression access is gated on reveal") {
    CHECK_THROWS_AS(ds.revealed_expression(5), StateError);
    ds.reveal(std::vector<std::int64_t>{5});
    CHECK(ds.revealed_expression(5).size() == ds.gene_count());
    CHECK(ds.oracle_expression(7).size() == ds.gene_count());  // eval path
  }
}

TEST_CASE("dataset: load is deterministic") {
  test::TempDir tmp("ds");
  generate_files(small_cfg(), tmp.path());
  Dataset a = Dataset::load(tmp.path());
  Dataset b = Dataset::load(tmp.path());
  CHECK(a.features().data == b.features().data);
  CHECK(a.reference().cell_types == b.reference().cell_types);
  CHECK(a.spots().size() == b.spots().size());
  for (std::size_t i = 0; i < a.spots().size(); ++i) {
    CHECK(a.spots()[i].spot_id == b.spots()[i].spot_id);
    CHECK(a.spots()[i].x == b.spots()[i].x);
  }
}

TEST_CASE("dataset: per-slide min-max coordinate normalization") {
  std::vector<SpotRecord> spots;
  spots.push_back({0, 0, 100.0f, 200.0f, 0});
  spots.push_back({1, 0, 300.0f, 600.0f, 1});
  spots.push_back({2, 1, -50.0f, 10.0f, 2});
  spots.push_back({3, 1, 150.0f, 10.0f, 3});  // slide 1 has zero y-extent
  normalize_coordinates_per_slide(spots);
  CHECK(spots[0].x == doctest::Approx(0.0f));
  CHECK(spots[0].y == doctest::Approx(0.0f));
  CHECK(spots[1].x == doctest::Approx(1.0f));
  CHECK(spots[1].y == doctest::Approx(1.0f));
  CHECK(spots[2].x == doctest::Approx(0.0f));
  CHECK(spots[3].x == doctest::Approx(1.0f));
  CHECK(spots[2].y == doctest::Approx(0.0f));
  CHECK(spots[3].y == doctest::Approx(0.0f));
}

TEST_CASE("dataset: embedding width must match the reference") {
  test::TempDir tmp("ds");
  generate_files(small_cfg(), tmp.path());
  Matrix e = load_matrix(tmp.path() / "expr_embeddings.scrm");
  Matrix wider(e.rows, e.cols + 1);
  save_matrix(wider, tmp.path() / "expr_embeddings.scrm");
  CHECK_THROWS_AS(Dataset::load(tmp.path()), SchemaError);
}
