#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "scrl/matrix.hpp"
#include "scrl/numerics.hpp"

namespace scrl {

// One candidate sequencing location. `row` is the shared index into the
// feature/expression/embedding matrices.
struct SpotRecord {
  std::int64_t spot_id = 0;
  std::int64_t slide_id = 0;
  float x = 0.0f;
  float y = 0.0f;
  std::size_t row = 0;
};

// External single-cell prior: embeddings plus per-cell type labels.
struct SingleCellReference {
  Matrix embeddings;                     // M x d_z
  std::vector<int> cell_types;           // M, values in [0, label_names.size())
  std::vector<std::string> label_names;  // first-appearance order
};

// Rows revealed by a reveal() call, in the requested id order.
struct ExpressionBatch {
  std::vector<std::int64_t> ids;
  Matrix expressions;       // |ids| x G
  Matrix expr_embeddings;   // |ids| x d_z, empty when the dataset has none
  bool has_embeddings = false;
};

// The sequencing simulator. Feature vectors and coordinates are always
// visible; expression rows stay hidden until the spot is revealed
// ("sequenced"). The revealed set is the only mutable state.
class Dataset {
 public:
  Dataset() = default;

  // Reads features.scrm, expressions.scrm, spots.csv, reference_embeddings.scrm,
  // reference_types.csv and the optional expr_embeddings.scrm. Row counts are
  // cross-checked (SchemaError) and coordinates validated (ValueError).
  static Dataset load(const std::filesystem::path& dir);

  // In-memory assembly used by the generator and the tests. Performs the same
  // validation as load().
  static Dataset assemble(std::vector<SpotRecord> spots, Matrix features,
                          Matrix expressions, std::optional<Matrix> expr_embeddings,
                          SingleCellReference reference);

  Dataset(const Dataset& other);
  Dataset& operator=(const Dataset& other);
  Dataset(Dataset&&) = default;
  Dataset& operator=(Dataset&&) = default;

  std::size_t n_spots() const { return spots_.size(); }
  std::size_t feature_dim() const { return features_.cols; }
  std::size_t gene_count() const { return expressions_.cols; }
  bool has_expr_embeddings() const { return expr_embeddings_.has_value(); }
  std::size_t embedding_dim() const {
    return expr_embeddings_ ? expr_embeddings_->cols : 0;
  }

  const std::vector<SpotRecord>& spots() const { return spots_; }
  const Matrix& features() const { return features_; }
  const SingleCellReference& reference() const { return reference_; }

  std::size_t row_of(std::int64_t spot_id) const;  // KeyError when unknown
  const SpotRecord& spot(std::int64_t spot_id) const;
  Point2 coords_of(std::int64_t spot_id) const;
  std::vector<std::int64_t> all_ids() const;
  std::vector<std::int64_t> slide_ids() const;  // distinct, ascending

  std::span<const float> feature_row(std::int64_t spot_id) const;

  // Simulated sequencing. Adds ids to the revealed set (idempotent) and
  // returns their expression rows. Unknown id -> KeyError.
  ExpressionBatch reveal(std::span<const std::int64_t> ids);

  bool is_revealed(std::int64_t spot_id) const;
  std::size_t revealed_count() const;

  // Expression access gated on reveal(); StateError when still hidden.
  std::span<const float> revealed_expression(std::int64_t spot_id) const;
  std::span<const float> revealed_embedding(std::int64_t spot_id) const;

  // Ground-truth access for held-out evaluation. Bypasses the simulator gate
  // on purpose; never use it inside a sampling or training path.
  std::span<const float> oracle_expression(std::int64_t spot_id) const;
  const Matrix& oracle_expressions() const { return expressions_; }

 private:
  void build_index();
  void validate() const;

  std::vector<SpotRecord> spots_;
  Matrix features_;
  Matrix expressions_;
  std::optional<Matrix> expr_embeddings_;
  SingleCellReference reference_;
  std::unordered_map<std::int64_t, std::size_t> id_to_row_;
  std::unordered_set<std::int64_t> revealed_;
  mutable std::mutex reveal_mu_;
};

// Min-max normalization of coordinates to [0,1]^2 per slide, for ingesting
// raw scanner coordinates. A slide whose extent is zero along an axis maps
// to 0 on that axis.
void normalize_coordinates_per_slide(std::vector<SpotRecord>& spots);

}  // namespace scrl
