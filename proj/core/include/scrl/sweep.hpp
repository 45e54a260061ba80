#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scrl/baselines.hpp"
#include "scrl/dataset.hpp"
#include "scrl/metrics.hpp"
#include "scrl/policy.hpp"
#include "scrl/predictor.hpp"
#include "scrl/rewards.hpp"

namespace scrl {

struct SweepConfig {
  std::vector<std::string> strategies{"scrl", "random", "uncertainty",
                                      "diversity"};
  std::vector<double> ratios{0.10, 0.25, 0.50, 0.75};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int> folds{0, 1, 2, 3};
  int cv_folds = 4;
  std::uint64_t split_seed = 42;
  TrainConfig train;
  SamplerConfig sampler;  // budget fields are filled per cell
  RewardConfig reward;
  RewardWeights weights;
  UncertaintyConfig uncertainty;
  DiversityConfig diversity;
  std::string config_hash;  // keys the resumable cell log
  int threads = 1;
};

struct SweepCellKey {
  std::string strategy;
  double ratio = 0.0;
  int fold = 0;
  std::uint64_t seed = 0;
};

struct SweepRow {
  SweepCellKey key;
  MetricTriple metric;
  double final_reward = 0.0;  // NaN for strategies without a reward trace
  std::string status = "ok";
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::string config_hash;
};

// Runs one (strategy, ratio, fold, seed) cell end to end on a fresh copy of
// the dataset: split, sample on the training folds, train, evaluate on the
// held-out fold.
SweepRow run_sweep_cell(const Dataset& base, const SweepCellKey& key,
                        const SweepConfig& cfg);

// The full grid. Cells append to out_dir/cells.jsonl as they complete, and a
// re-run with the same config hash skips cells already present there. Failed
// cells are recorded and the sweep continues.
SweepReport budget_sweep(const Dataset& base, const SweepConfig& cfg,
                         const std::filesystem::path& out_dir);

// report.csv (fixed column order) and summary.json with per-(strategy, ratio)
// means and standard deviations. Empty report -> ConfigError.
void write_report(const SweepReport& report,
                  const std::filesystem::path& out_dir);

// Re-parses report.csv; used by tests and downstream tooling.
std::vector<SweepRow> read_report_csv(const std::filesystem::path& path);

}  // namespace scrl
