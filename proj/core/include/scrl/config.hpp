#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "scrl/baselines.hpp"
#include "scrl/policy.hpp"
#include "scrl/predictor.hpp"
#include "scrl/rewards.hpp"
#include "scrl/synthgen.hpp"

namespace scrl {

// Minimal TOML-style table: [section] headers, key = value lines, scalar
// values (integer, float, bool, quoted string) and flat arrays of them.
using ConfigScalarArray = std::variant<std::vector<std::int64_t>,
                                       std::vector<double>,
                                       std::vector<std::string>>;
using ConfigValue = std::variant<std::int64_t, double, bool, std::string,
                                 ConfigScalarArray>;

class ConfigTable {
 public:
  static ConfigTable parse(const std::string& text);
  static ConfigTable parse_file(const std::filesystem::path& path);

  // Canonical form: sections and keys in sorted order, shortest round-trip
  // number formatting. parse(serialize(t)) reproduces the table.
  std::string serialize() const;

  bool has(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, ConfigValue v);

  std::int64_t get_int(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section,
                         const std::string& key) const;
  std::vector<double> get_double_array(const std::string& section,
                                       const std::string& key) const;
  std::vector<std::int64_t> get_int_array(const std::string& section,
                                          const std::string& key) const;
  std::vector<std::string> get_string_array(const std::string& section,
                                            const std::string& key) const;

  const std::map<std::string, std::map<std::string, ConfigValue>>& sections()
      const {
    return sections_;
  }

 private:
  const ConfigValue& at(const std::string& section, const std::string& key) const;
  std::map<std::string, std::map<std::string, ConfigValue>> sections_;
};

// The full run configuration: one struct per pipeline stage, loadable from a
// single file with flag overrides applied on top. Every command writes the
// resolved table and its content hash next to its outputs.
struct RunConfig {
  std::string data_dir;

  SynthConfig synth;
  std::string synth_out = "synth_data";

  std::string sample_strategy = "scrl";
  double sample_budget = 0.1;  // ratio of the candidate set
  int sample_fold = -1;        // -1: no fold restriction
  std::string sample_out = "pool.json";
  std::uint64_t sample_seed = 42;

  SamplerConfig policy;
  RewardConfig rewards;
  RewardWeights weights;
  UncertaintyConfig uncertainty;
  DiversityConfig diversity;

  TrainConfig train;
  std::string train_pool = "pool.json";
  std::string train_out = "ckpt";

  std::string eval_ckpt = "ckpt";
  int eval_fold = 0;
  std::string eval_out;

  int cv_folds = 4;
  std::uint64_t cv_split_seed = 42;

  std::vector<std::string> sweep_strategies{"scrl", "random", "uncertainty",
                                            "diversity"};
  std::vector<double> sweep_ratios{0.10, 0.25, 0.50, 0.75};
  std::vector<std::uint64_t> sweep_seeds{1, 2, 3};
  std::vector<int> sweep_folds{0, 1, 2, 3};
  std::string sweep_out = "report";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  // Unknown sections or keys raise ConfigError naming them; enum-valued
  // strings are validated.
  static RunConfig from_table(const ConfigTable& t);
  ConfigTable to_table() const;

  std::string serialize() const { return to_table().serialize(); }
  std::string content_hash() const;

  // Writes <stem>.config.toml and <stem>.config.hash next to an output.
  void write_resolved(const std::filesystem::path& stem) const;
};

}  // namespace scrl
