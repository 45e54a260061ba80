#include "scrl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "scrl/errors.hpp"

namespace scrl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               const std::string& expected_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw SchemaError(path.string() + ": empty file, expected header " +
                      expected_header);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header)
    throw SchemaError(path.string() + ": bad header '" + line + "', expected '" +
                      expected_header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

std::int64_t parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError(where + ": bad integer '" + s + "'");
  }
}

float parse_float(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const float v = std::stof(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError(where + ": bad number '" + s + "'");
  }
}

}  // namespace

Dataset::Dataset(const Dataset& other)
    : spots_(other.spots_),
      features_(other.features_),
      expressions_(other.expressions_),
      expr_embeddings_(other.expr_embeddings_),
      reference_(other.reference_),
      id_to_row_(other.id_to_row_),
      revealed_(other.revealed_) {}

Dataset& Dataset::operator=(const Dataset& other) {
  if (this == &other) return *this;
  spots_ = other.spots_;
  features_ = other.features_;
  expressions_ = other.expressions_;
  expr_embeddings_ = other.expr_embeddings_;
  reference_ = other.reference_;
  id_to_row_ = other.id_to_row_;
  revealed_ = other.revealed_;
  return *this;
}

void Dataset::build_index() {
  id_to_row_.clear();
  id_to_row_.reserve(spots_.size());
  for (const SpotRecord& s : spots_) {
    if (!id_to_row_.emplace(s.spot_id, s.row).second)
      throw SchemaError("duplicate spot_id " + std::to_string(s.spot_id));
  }
}

void Dataset::validate() const {
  const std::size_t n = spots_.size();
  if (features_.rows != n)
    throw SchemaError("features row count " + std::to_string(features_.rows) +
                      " != spot count " + std::to_string(n));
  if (expressions_.rows != n)
    throw SchemaError("expressions row count " +
                      std::to_string(expressions_.rows) + " != spot count " +
                      std::to_string(n));
  if (expr_embeddings_ && expr_embeddings_->rows != n)
    throw SchemaError("expr_embeddings row count " +
                      std::to_string(expr_embeddings_->rows) +
                      " != spot count " + std::to_string(n));
  if (expr_embeddings_ &&
      expr_embeddings_->cols != reference_.embeddings.cols)
    throw SchemaError("expr_embeddings width " +
                      std::to_string(expr_embeddings_->cols) +
                      " != reference embedding width " +
                      std::to_string(reference_.embeddings.cols));
  if (reference_.cell_types.size() != reference_.embeddings.rows)
    throw SchemaError("reference type count " +
                      std::to_string(reference_.cell_types.size()) +
                      " != reference embedding rows " +
                      std::to_string(reference_.embeddings.rows));
  for (int t : reference_.cell_types) {
    if (t < 0 || static_cast<std::size_t>(t) >= reference_.label_names.size())
      throw SchemaError("reference label id " + std::to_string(t) +
                        " out of range");
  }
  for (const SpotRecord& s : spots_) {
    if (!(s.x >= 0.0f && s.x <= 1.0f && s.y >= 0.0f && s.y <= 1.0f))
      throw ValueError("spot " + std::to_string(s.spot_id) +
                       ": coordinates (" + std::to_string(s.x) + ", " +
                       std::to_string(s.y) + ") outside [0,1]^2");
    if (s.row >= n) throw SchemaError("spot row index out of range");
  }
}

Dataset Dataset::assemble(std::vector<SpotRecord> spots, Matrix features,
                          Matrix expressions,
                          std::optional<Matrix> expr_embeddings,
                          SingleCellReference reference) {
  Dataset ds;
  ds.spots_ = std::move(spots);
  ds.features_ = std::move(features);
  ds.expressions_ = std::move(expressions);
  ds.expr_embeddings_ = std::move(expr_embeddings);
  ds.reference_ = std::move(reference);
  ds.build_index();
  ds.validate();
  return ds;
}

Dataset Dataset::load(const std::filesystem::path& dir) {
  Dataset ds;
  ds.features_ = load_matrix(dir / "features.scrm");
  ds.expressions_ = load_matrix(dir / "expressions.scrm");
  if (std::filesystem::exists(dir / "expr_embeddings.scrm"))
    ds.expr_embeddings_ = load_matrix(dir / "expr_embeddings.scrm");
  ds.reference_.embeddings = load_matrix(dir / "reference_embeddings.scrm");

  const auto spot_rows = read_csv(dir / "spots.csv", "spot_id,slide_id,x,y");
  ds.spots_.reserve(spot_rows.size());
  for (std::size_t i = 0; i < spot_rows.size(); ++i) {
    const auto& cells = spot_rows[i];
    const std::string where = "spots.csv row " + std::to_string(i + 2);
    if (cells.size() != 4) throw SchemaError(where + ": expected 4 columns");
    SpotRecord s;
    s.spot_id = parse_int(cells[0], where);
    s.slide_id = parse_int(cells[1], where);
    s.x = parse_float(cells[2], where);
    s.y = parse_float(cells[3], where);
    s.row = i;  // row order in the csv defines matrix row order
    ds.spots_.push_back(s);
  }

  const auto type_rows =
      read_csv(dir / "reference_types.csv", "cell_id,type_name");
  std::map<std::string, int> label_ids;
  ds.reference_.cell_types.reserve(type_rows.size());
  for (std::size_t i = 0; i < type_rows.size(); ++i) {
    const auto& cells = type_rows[i];
    const std::string where = "reference_types.csv row " + std::to_string(i + 2);
    if (cells.size() != 2) throw SchemaError(where + ": expected 2 columns");
    const auto it = label_ids.find(cells[1]);
    int id;
    if (it == label_ids.end()) {
      id = static_cast<int>(ds.reference_.label_names.size());
      label_ids.emplace(cells[1], id);
      ds.reference_.label_names.push_back(cells[1]);
    } else {
      id = it->second;
    }
    ds.reference_.cell_types.push_back(id);
  }

  ds.build_index();
  ds.validate();
  return ds;
}

std::size_t Dataset::row_of(std::int64_t spot_id) const {
  const auto it = id_to_row_.find(spot_id);
  if (it == id_to_row_.end())
    throw KeyError("unknown spot_id " + std::to_string(spot_id));
  return it->second;
}

const SpotRecord& Dataset::spot(std::int64_t spot_id) const {
  return spots_[row_of(spot_id)];
}

Point2 Dataset::coords_of(std::int64_t spot_id) const {
  const SpotRecord& s = spot(spot_id);
  return {static_cast<double>(s.x), static_cast<double>(s.y)};
}

std::vector<std::int64_t> Dataset::all_ids() const {
  std::vector<std::int64_t> ids;
  ids.reserve(spots_.size());
  for (const SpotRecord& s : spots_) ids.push_back(s.spot_id);
  return ids;
}

std::vector<std::int64_t> Dataset::slide_ids() const {
  std::vector<std::int64_t> ids;
  for (const SpotRecord& s : spots_) ids.push_back(s.slide_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::span<const float> Dataset::feature_row(std::int64_t spot_id) const {
  return features_.row(row_of(spot_id));
}

ExpressionBatch Dataset::reveal(std::span<const std::int64_t> ids) {
  ExpressionBatch batch;
  batch.ids.assign(ids.begin(), ids.end());
  batch.has_embeddings = has_expr_embeddings();
  batch.expressions = Matrix(ids.size(), expressions_.cols);
  if (batch.has_embeddings)
    batch.expr_embeddings = Matrix(ids.size(), expr_embeddings_->cols);

  // Validate before mutating so a bad id leaves the revealed set unchanged.
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (std::int64_t id : ids) rows.push_back(row_of(id));

  {
    std::lock_guard<std::mutex> lock(reveal_mu_);
    for (std::int64_t id : ids) revealed_.insert(id);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = expressions_.row(rows[i]);
    std::copy(src.begin(), src.end(), batch.expressions.row(i).begin());
    if (batch.has_embeddings) {
      const auto esrc = expr_embeddings_->row(rows[i]);
      std::copy(esrc.begin(), esrc.end(), batch.expr_embeddings.row(i).begin());
    }
  }
  return batch;
}

bool Dataset::is_revealed(std::int64_t spot_id) const {
  std::lock_guard<std::mutex> lock(reveal_mu_);
  return revealed_.contains(spot_id);
}

std::size_t Dataset::revealed_count() const {
  std::lock_guard<std::mutex> lock(reveal_mu_);
  return revealed_.size();
}

std::span<const float> Dataset::revealed_expression(std::int64_t spot_id) const {
  const std::size_t row = row_of(spot_id);
  if (!is_revealed(spot_id))
    throw StateError("expression of spot " + std::to_string(spot_id) +
                     " is hidden; reveal() it first");
  return expressions_.row(row);
}

std::span<const float> Dataset::revealed_embedding(std::int64_t spot_id) const {
  if (!expr_embeddings_)
    throw StateError("dataset has no expression embeddings");
  const std::size_t row = row_of(spot_id);
  if (!is_revealed(spot_id))
    throw StateError("embedding of spot " + std::to_string(spot_id) +
                     " is hidden; reveal() it first");
  return expr_embeddings_->row(row);
}

std::span<const float> Dataset::oracle_expression(std::int64_t spot_id) const {
  return expressions_.row(row_of(spot_id));
}

void normalize_coordinates_per_slide(std::vector<SpotRecord>& spots) {
  std::map<std::int64_t, std::array<float, 4>> extent;  // minx,maxx,miny,maxy
  for (const SpotRecord& s : spots) {
    auto it = extent.find(s.slide_id);
    if (it == extent.end()) {
      extent[s.slide_id] = {s.x, s.x, s.y, s.y};
    } else {
      auto& e = it->second;
      e[0] = std::min(e[0], s.x);
      e[1] = std::max(e[1], s.x);
      e[2] = std::min(e[2], s.y);
      e[3] = std::max(e[3], s.y);
    }
  }
  for (SpotRecord& s : spots) {
    const auto& e = extent[s.slide_id];
    s.x = (e[1] > e[0]) ? (s.x - e[0]) / (e[1] - e[0]) : 0.0f;
    s.y = (e[3] > e[2]) ? (s.y - e[2]) / (e[3] - e[2]) : 0.0f;
  }
}

}  // namespace scrl
