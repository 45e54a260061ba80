#include "scrl/synthgen.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "scrl/errors.hpp"
#include "scrl/matrix.hpp"
#include "scrl/rng.hpp"

namespace scrl {

namespace {

void validate(const SynthConfig& c) {
  if (c.n_spots < c.cell_types)
    throw ConfigError("synth: n_spots must be >= cell_types");
  if (c.cell_types < 1 || c.cell_types > c.reference_cells)
    throw ConfigError("synth: cell_types must be in [1, reference_cells]");
  if (c.slides < 1) throw ConfigError("synth: slides must be >= 1");
  if (c.genes < 2) throw ConfigError("synth: genes must be >= 2");
  if (c.feature_dim < 1 || c.embedding_dim < 1)
    throw ConfigError("synth: dimensions must be >= 1");
  if (c.noise < 0.0) throw ConfigError("synth: noise must be >= 0");
  if (!(c.type_skew > 0.0 && c.type_skew <= 1.0))
    throw ConfigError("synth: type_skew must be in (0, 1]");
  if (!c.type_weights.empty()) {
    if (c.type_weights.size() != static_cast<std::size_t>(c.cell_types))
      throw ConfigError("synth: type_weights must have one entry per type");
    for (double w : c.type_weights)
      if (!(w > 0.0)) throw ConfigError("synth: type_weights must be positive");
  }
  if (c.reference_cells < 2)
    throw ConfigError("synth: reference_cells must be >= 2");
}

struct Patch {
  int type;
  double cx, cy, sigma, weight;
};

std::string float_str(float v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Generated {
  std::vector<SpotRecord> spots;
  Matrix features, expressions, expr_embeddings;
  Matrix reference_embeddings;
  std::vector<int> reference_types;
  std::vector<int> planted;
  std::vector<std::string> label_names;
};

Generated run_generation(const SynthConfig& cfg) {
  validate(cfg);
  Prng rng(cfg.seed);
  const int k_types = cfg.cell_types;
  const int g = cfg.genes;
  const int d = cfg.feature_dim;
  const int dz = cfg.embedding_dim;

  // Per-type prototypes.
  Eigen::MatrixXd expr_proto(k_types, g), feat_proto(k_types, d);
  for (int k = 0; k < k_types; ++k) {
    for (int j = 0; j < g; ++j) expr_proto(k, j) = rng.normal();
    for (int j = 0; j < d; ++j) feat_proto(k, j) = rng.normal();
  }

  // Shared linear map from expression space to embedding space.
  Eigen::MatrixXd emb_map(dz, g);
  const double scale = 1.0 / std::sqrt(static_cast<double>(g));
  for (int i = 0; i < dz; ++i)
    for (int j = 0; j < g; ++j) emb_map(i, j) = rng.normal() * scale;

  // 1-3 Gaussian patches per type; prevalence decays geometrically with the
  // type index so the tail types are spatially small and rare.
  std::vector<Patch> patches;
  double total_weight = 0.0;
  for (int k = 0; k < k_types; ++k) {
    const int n_patches = 1 + static_cast<int>(rng.below(3));
    const double type_weight = cfg.type_weights.empty()
                                   ? std::pow(cfg.type_skew, k)
                                   : cfg.type_weights[k];
    for (int p = 0; p < n_patches; ++p) {
      Patch patch;
      patch.type = k;
      patch.cx = rng.uniform(0.15, 0.85);
      patch.cy = rng.uniform(0.15, 0.85);
      patch.sigma = rng.uniform(0.03, 0.08);
      patch.weight = type_weight / n_patches;
      total_weight += patch.weight;
      patches.push_back(patch);
    }
  }

  Generated out;
  out.features = Matrix(cfg.n_spots, d);
  out.expressions = Matrix(cfg.n_spots, g);
  out.expr_embeddings = Matrix(cfg.n_spots, dz);
  out.planted.resize(cfg.n_spots);

  Eigen::VectorXd expr_row(g);
  for (int i = 0; i < cfg.n_spots; ++i) {
    // Patch choice by weight, then a clipped Gaussian position.
    const double u = rng.uniform01() * total_weight;
    double cum = 0.0;
    const Patch* chosen = &patches.back();
    for (const Patch& p : patches) {
      cum += p.weight;
      if (cum > u) {
        chosen = &p;
        break;
      }
    }
    double x = 0.5, y = 0.5;
    for (int attempt = 0; attempt < 100; ++attempt) {
      x = chosen->cx + chosen->sigma * rng.normal();
      y = chosen->cy + chosen->sigma * rng.normal();
      if (x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0) break;
      x = std::clamp(x, 0.0, 1.0);
      y = std::clamp(y, 0.0, 1.0);
    }
    const int type = chosen->type;
    out.planted[i] = type;

    SpotRecord s;
    s.spot_id = i;
    s.slide_id = i % cfg.slides;
    s.x = static_cast<float>(x);
    s.y = static_cast<float>(y);
    s.row = static_cast<std::size_t>(i);
    out.spots.push_back(s);

    for (int j = 0; j < g; ++j) {
      expr_row[j] = expr_proto(type, j) + cfg.noise * rng.normal();
      out.expressions.at(i, j) = static_cast<float>(expr_row[j]);
    }
    for (int j = 0; j < d; ++j)
      out.features.at(i, j) =
          static_cast<float>(feat_proto(type, j) + cfg.noise * rng.normal());
    const Eigen::VectorXd z = emb_map * expr_row;
    for (int j = 0; j < dz; ++j)
      out.expr_embeddings.at(i, j) =
          static_cast<float>(z[j] + cfg.noise * rng.normal());
  }

  // Reference cells draw types uniformly so every type, however rare in the
  // tissue, is well represented in the prior.
  out.reference_embeddings = Matrix(cfg.reference_cells, dz);
  out.reference_types.resize(cfg.reference_cells);
  for (int j = 0; j < cfg.reference_cells; ++j) {
    const int type = static_cast<int>(rng.below(k_types));
    out.reference_types[j] = type;
    for (int a = 0; a < g; ++a)
      expr_row[a] = expr_proto(type, a) + cfg.noise * rng.normal();
    const Eigen::VectorXd q = emb_map * expr_row;
    for (int a = 0; a < dz; ++a)
      out.reference_embeddings.at(j, a) =
          static_cast<float>(q[a] + cfg.noise * rng.normal());
  }

  out.label_names.reserve(k_types);
  for (int k = 0; k < k_types; ++k)
    out.label_names.push_back("type_" + std::to_string(k));
  return out;
}

}  // namespace

SynthOutput generate_dataset(const SynthConfig& cfg) {
  Generated gen = run_generation(cfg);
  SingleCellReference ref;
  ref.embeddings = std::move(gen.reference_embeddings);
  ref.cell_types = std::move(gen.reference_types);
  ref.label_names = std::move(gen.label_names);
  SynthOutput out{Dataset::assemble(std::move(gen.spots),
                                    std::move(gen.features),
                                    std::move(gen.expressions),
                                    std::move(gen.expr_embeddings),
                                    std::move(ref)),
                  std::move(gen.planted)};
  return out;
}

void generate_files(const SynthConfig& cfg, const std::filesystem::path& dir) {
  Generated gen = run_generation(cfg);
  std::filesystem::create_directories(dir);

  save_matrix(gen.features, dir / "features.scrm");
  save_matrix(gen.expressions, dir / "expressions.scrm");
  save_matrix(gen.expr_embeddings, dir / "expr_embeddings.scrm");
  save_matrix(gen.reference_embeddings, dir / "reference_embeddings.scrm");

  {
    std::ofstream out(dir / "spots.csv", std::ios::trunc);
    if (!out) throw IoError("synth: cannot write spots.csv");
    out << "spot_id,slide_id,x,y\n";
    for (const SpotRecord& s : gen.spots)
      out << s.spot_id << "," << s.slide_id << "," << float_str(s.x) << ","
          << float_str(s.y) << "\n";
  }
  {
    std::ofstream out(dir / "reference_types.csv", std::ios::trunc);
    if (!out) throw IoError("synth: cannot write reference_types.csv");
    out << "cell_id,type_name\n";
    for (std::size_t j = 0; j < gen.reference_types.size(); ++j)
      out << j << "," << gen.label_names[gen.reference_types[j]] << "\n";
  }
  {
    std::ofstream out(dir / "planted_types.csv", std::ios::trunc);
    if (!out) throw IoError("synth: cannot write planted_types.csv");
    out << "spot_id,type_id\n";
    for (std::size_t i = 0; i < gen.planted.size(); ++i)
      out << i << "," << gen.planted[i] << "\n";
  }
}

std::vector<int> load_planted_types(const std::filesystem::path& dir) {
  std::ifstream in(dir / "planted_types.csv");
  if (!in) throw IoError("missing planted_types.csv in " + dir.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("spot_id,type_id", 0) != 0)
    throw SchemaError("planted_types.csv: bad header");
  std::vector<int> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw SchemaError("planted_types.csv: bad row '" + line + "'");
    out.push_back(std::stoi(line.substr(comma + 1)));
  }
  return out;
}

}  // namespace scrl
