#include "scrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "scrl/errors.hpp"
#include "scrl/text.hpp"

namespace scrl {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string parse_quoted(const std::string& raw, const std::string& where) {
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"')
    throw ConfigError(where + ": malformed string " + raw);
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 2 < raw.size()) {
      const char next = raw[i + 1];
      if (next == '"' || next == '\\') {
        out += next;
        ++i;
        continue;
      }
    }
    out += raw[i];
  }
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

bool looks_like_double(const std::string& s) {
  return s.find_first_of(".eE") != std::string::npos || s == "inf" ||
         s == "-inf" || s == "nan";
}

ConfigValue parse_scalar(const std::string& raw, const std::string& where) {
  if (raw.empty()) throw ConfigError(where + ": empty value");
  if (raw.front() == '"') return parse_quoted(raw, where);
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (looks_like_double(raw)) {
    double v = 0.0;
    const auto res = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (res.ec != std::errc() || res.ptr != raw.data() + raw.size())
      throw ConfigError(where + ": bad number " + raw);
    return v;
  }
  std::int64_t v = 0;
  const auto res = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (res.ec != std::errc() || res.ptr != raw.data() + raw.size())
    throw ConfigError(where + ": bad number " + raw);
  return v;
}

ConfigValue parse_array(const std::string& raw, const std::string& where) {
  const std::string inner = trim(raw.substr(1, raw.size() - 2));
  std::vector<std::string> parts;
  std::string cur;
  bool in_string = false;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const char c = inner[i];
    if (c == '"' && (i == 0 || inner[i - 1] != '\\')) in_string = !in_string;
    if (c == ',' && !in_string) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) parts.push_back(trim(cur));

  if (parts.empty()) return ConfigScalarArray{std::vector<double>{}};

  // The first element settles the array type; ints promote to double in a
  // double array.
  const ConfigValue first = parse_scalar(parts[0], where);
  if (std::holds_alternative<std::string>(first)) {
    std::vector<std::string> out;
    for (const auto& p : parts) {
      const ConfigValue v = parse_scalar(p, where);
      if (!std::holds_alternative<std::string>(v))
        throw ConfigError(where + ": mixed array types");
      out.push_back(std::get<std::string>(v));
    }
    return ConfigScalarArray{std::move(out)};
  }
  bool any_double = false;
  for (const auto& p : parts) {
    const ConfigValue v = parse_scalar(p, where);
    if (std::holds_alternative<double>(v)) any_double = true;
    else if (!std::holds_alternative<std::int64_t>(v))
      throw ConfigError(where + ": mixed array types");
  }
  if (any_double) {
    std::vector<double> out;
    for (const auto& p : parts) {
      const ConfigValue v = parse_scalar(p, where);
      out.push_back(std::holds_alternative<double>(v)
                        ? std::get<double>(v)
                        : static_cast<double>(std::get<std::int64_t>(v)));
    }
    return ConfigScalarArray{std::move(out)};
  }
  std::vector<std::int64_t> out;
  for (const auto& p : parts)
    out.push_back(std::get<std::int64_t>(parse_scalar(p, where)));
  return ConfigScalarArray{std::move(out)};
}

std::string scalar_to_string(const ConfigValue& v) {
  if (std::holds_alternative<std::int64_t>(v))
    return std::to_string(std::get<std::int64_t>(v));
  if (std::holds_alternative<double>(v)) return double_str(std::get<double>(v));
  if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "true" : "false";
  return quote(std::get<std::string>(v));
}

std::string value_to_string(const ConfigValue& v) {
  if (!std::holds_alternative<ConfigScalarArray>(v)) return scalar_to_string(v);
  const auto& arr = std::get<ConfigScalarArray>(v);
  std::string out = "[";
  bool first = true;
  auto add = [&](const std::string& s) {
    if (!first) out += ", ";
    out += s;
    first = false;
  };
  if (std::holds_alternative<std::vector<std::int64_t>>(arr)) {
    for (auto x : std::get<std::vector<std::int64_t>>(arr))
      add(std::to_string(x));
  } else if (std::holds_alternative<std::vector<double>>(arr)) {
    for (auto x : std::get<std::vector<double>>(arr)) add(double_str(x));
  } else {
    for (const auto& x : std::get<std::vector<std::string>>(arr)) add(quote(x));
  }
  out += "]";
  return out;
}

}  // namespace

ConfigTable ConfigTable::parse(const std::string& text) {
  ConfigTable t;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "config line " + std::to_string(lineno);
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(where + ": malformed section header " + line);
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key = value, got " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty())
      throw ConfigError(where + ": key outside any [section]");
    if (t.sections_[section].contains(key))
      throw ConfigError(where + ": duplicate key " + section + "." + key);
    t.sections_[section][key] = (raw.size() >= 2 && raw.front() == '[')
                                    ? parse_array(raw, where)
                                    : parse_scalar(raw, where);
  }
  return t;
}

ConfigTable ConfigTable::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string ConfigTable::serialize() const {
  std::string out;
  bool first = true;
  for (const auto& [section, kv] : sections_) {
    if (!first) out += "\n";
    first = false;
    out += "[" + section + "]\n";
    for (const auto& [key, value] : kv)
      out += key + " = " + value_to_string(value) + "\n";
  }
  return out;
}

bool ConfigTable::has(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  return it != sections_.end() && it->second.contains(key);
}

void ConfigTable::set(const std::string& section, const std::string& key,
                      ConfigValue v) {
  sections_[section][key] = std::move(v);
}

const ConfigValue& ConfigTable::at(const std::string& section,
                                   const std::string& key) const {
  const auto sit = sections_.find(section);
  if (sit == sections_.end())
    throw ConfigError("missing config section [" + section + "]");
  const auto kit = sit->second.find(key);
  if (kit == sit->second.end())
    throw ConfigError("missing config key " + section + "." + key);
  return kit->second;
}

std::int64_t ConfigTable::get_int(const std::string& section,
                                  const std::string& key) const {
  const ConfigValue& v = at(section, key);
  if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
  throw ConfigError(section + "." + key + ": expected an integer");
}

double ConfigTable::get_double(const std::string& section,
                               const std::string& key) const {
  const ConfigValue& v = at(section, key);
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<std::int64_t>(v))
    return static_cast<double>(std::get<std::int64_t>(v));
  throw ConfigError(section + "." + key + ": expected a number");
}

bool ConfigTable::get_bool(const std::string& section,
                           const std::string& key) const {
  const ConfigValue& v = at(section, key);
  if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
  throw ConfigError(section + "." + key + ": expected true/false");
}

std::string ConfigTable::get_string(const std::string& section,
                                    const std::string& key) const {
  const ConfigValue& v = at(section, key);
  if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
  throw ConfigError(section + "." + key + ": expected a string");
}

std::vector<double> ConfigTable::get_double_array(const std::string& section,
                                                  const std::string& key) const {
  const ConfigValue& v = at(section, key);
  if (!std::holds_alternative<ConfigScalarArray>(v))
    throw ConfigError(section + "." + key + ": expected an array");
  const auto& arr = std::get<ConfigScalarArray>(v);
  if (std::holds_alternative<std::vector<double>>(arr))
    return std::get<std::vector<double>>(arr);
  if (std::holds_alternative<std::vector<std::int64_t>>(arr)) {
    std::vector<double> out;
    for (auto x : std::get<std::vector<std::int64_t>>(arr))
      out.push_back(static_cast<double>(x));
    return out;
  }
  throw ConfigError(section + "." + key + ": expected a numeric array");
}

std::vector<std::int64_t> ConfigTable::get_int_array(
    const std::string& section, const std::string& key) const {
  const ConfigValue& v = at(section, key);
  if (!std::holds_alternative<ConfigScalarArray>(v))
    throw ConfigError(section + "." + key + ": expected an array");
  const auto& arr = std::get<ConfigScalarArray>(v);
  if (std::holds_alternative<std::vector<std::int64_t>>(arr))
    return std::get<std::vector<std::int64_t>>(arr);
  if (std::holds_alternative<std::vector<double>>(arr)) {
    const auto& d = std::get<std::vector<double>>(arr);
    if (d.empty()) return {};
  }
  throw ConfigError(section + "." + key + ": expected an integer array");
}

std::vector<std::string> ConfigTable::get_string_array(
    const std::string& section, const std::string& key) const {
  const ConfigValue& v = at(section, key);
  if (!std::holds_alternative<ConfigScalarArray>(v))
    throw ConfigError(section + "." + key + ": expected an array");
  const auto& arr = std::get<ConfigScalarArray>(v);
  if (std::holds_alternative<std::vector<std::string>>(arr))
    return std::get<std::vector<std::string>>(arr);
  if (std::holds_alternative<std::vector<double>>(arr) &&
      std::get<std::vector<double>>(arr).empty())
    return {};
  throw ConfigError(section + "." + key + ": expected a string array");
}

// --- RunConfig ------------------------------------------------------------

namespace {

std::string baseline_name(BaselineMode m) {
  return m == BaselineMode::kNone ? "none" : "running_mean";
}
BaselineMode baseline_from(const std::string& s) {
  if (s == "none") return BaselineMode::kNone;
  if (s == "running_mean") return BaselineMode::kRunningMean;
  throw ConfigError("policy.baseline: unknown value '" + s + "'");
}
std::string spatial_name(SpatialMode m) {
  return m == SpatialMode::kVerbatim ? "verbatim" : "corrected";
}
SpatialMode spatial_from(const std::string& s) {
  if (s == "verbatim") return SpatialMode::kVerbatim;
  if (s == "corrected") return SpatialMode::kCorrected;
  throw ConfigError("rewards.spatial_mode: unknown value '" + s + "'");
}
std::string scope_name(RewardScope m) {
  return m == RewardScope::kPool ? "pool" : "batch";
}
RewardScope scope_from(const std::string& s) {
  if (s == "pool") return RewardScope::kPool;
  if (s == "batch") return RewardScope::kBatch;
  throw ConfigError("rewards.scope: unknown value '" + s + "'");
}

}  // namespace

ConfigTable RunConfig::to_table() const {
  ConfigTable t;
  t.set("data", "dir", data_dir);

  t.set("synth", "out", synth_out);
  t.set("synth", "n", static_cast<std::int64_t>(synth.n_spots));
  t.set("synth", "slides", static_cast<std::int64_t>(synth.slides));
  t.set("synth", "genes", static_cast<std::int64_t>(synth.genes));
  t.set("synth", "feature_dim", static_cast<std::int64_t>(synth.feature_dim));
  t.set("synth", "embedding_dim",
        static_cast<std::int64_t>(synth.embedding_dim));
  t.set("synth", "cell_types", static_cast<std::int64_t>(synth.cell_types));
  t.set("synth", "reference_cells",
        static_cast<std::int64_t>(synth.reference_cells));
  t.set("synth", "noise", synth.noise);
  t.set("synth", "type_skew", synth.type_skew);
  t.set("synth", "seed", static_cast<std::int64_t>(synth.seed));

  t.set("sample", "strategy", sample_strategy);
  t.set("sample", "budget", sample_budget);
  t.set("sample", "fold", static_cast<std::int64_t>(sample_fold));
  t.set("sample", "out", sample_out);
  t.set("sample", "seed", static_cast<std::int64_t>(sample_seed));

  t.set("policy", "rounds", static_cast<std::int64_t>(policy.rounds));
  t.set("policy", "warmup_random", policy.warmup_random);
  t.set("policy", "lr", policy.lr);
  t.set("policy", "momentum", policy.momentum);
  t.set("policy", "baseline", baseline_name(policy.baseline));
  t.set("policy", "interleave_epochs",
        static_cast<std::int64_t>(policy.interleave_epochs));

  t.set("rewards", "w_sc", weights.w_sc);
  t.set("rewards", "w_type", weights.w_type);
  t.set("rewards", "w_spa", weights.w_spa);
  t.set("rewards", "cluster_count",
        static_cast<std::int64_t>(rewards.cluster_count));
  t.set("rewards", "pca_dim", static_cast<std::int64_t>(rewards.pca_dim));
  t.set("rewards", "eps", rewards.eps);
  t.set("rewards", "spatial_mode", spatial_name(rewards.spatial_mode));
  t.set("rewards", "scope", scope_name(rewards.scope));
  t.set("rewards", "disp_exclude_self", rewards.disp_exclude_self);
  t.set("rewards", "kmeans_batch",
        static_cast<std::int64_t>(rewards.kmeans_batch));
  t.set("rewards", "kmeans_iters",
        static_cast<std::int64_t>(rewards.kmeans_iters));
  t.set("rewards", "seed", static_cast<std::int64_t>(rewards.seed));

  t.set("uncertainty", "dropout_rate", uncertainty.dropout_rate);
  t.set("uncertainty", "passes", static_cast<std::int64_t>(uncertainty.passes));
  t.set("uncertainty", "warm_ratio", uncertainty.warm_ratio);

  t.set("diversity", "pca_dim", static_cast<std::int64_t>(diversity.pca_dim));
  t.set("diversity", "min_pts",
        static_cast<std::int64_t>(diversity.dbscan_min_pts));

  t.set("train", "pool", train_pool);
  t.set("train", "out", train_out);
  t.set("train", "lr0", train.lr0);
  t.set("train", "lr_min", train.lr_min);
  t.set("train", "momentum", train.momentum);
  t.set("train", "weight_decay", train.weight_decay);
  t.set("train", "batch", static_cast<std::int64_t>(train.batch));
  t.set("train", "epochs", static_cast<std::int64_t>(train.epochs));
  t.set("train", "lambda_r", train.lambda_r);
  t.set("train", "lambda_p", train.lambda_p);
  t.set("train", "lambda_kd", train.lambda_kd);
  t.set("train", "top_k", static_cast<std::int64_t>(train.top_k));
  t.set("train", "top_types", static_cast<std::int64_t>(train.top_types));
  t.set("train", "sim_threshold", train.sim_threshold);
  t.set("train", "temperature", train.temperature);
  t.set("train", "hidden", static_cast<std::int64_t>(train.hidden));
  t.set("train", "proj_hidden", static_cast<std::int64_t>(train.proj_hidden));
  t.set("train", "proj_out", static_cast<std::int64_t>(train.proj_out));
  t.set("train", "seed", static_cast<std::int64_t>(train.seed));
  t.set("train", "retrieval", train.retrieval_enabled);

  t.set("eval", "ckpt", eval_ckpt);
  t.set("eval", "fold", static_cast<std::int64_t>(eval_fold));
  t.set("eval", "out", eval_out);

  t.set("cv", "folds", static_cast<std::int64_t>(cv_folds));
  t.set("cv", "split_seed", static_cast<std::int64_t>(cv_split_seed));

  t.set("sweep", "strategies", ConfigScalarArray{sweep_strategies});
  t.set("sweep", "ratios", ConfigScalarArray{sweep_ratios});
  {
    std::vector<std::int64_t> seeds;
    for (auto s : sweep_seeds) seeds.push_back(static_cast<std::int64_t>(s));
    t.set("sweep", "seeds", ConfigScalarArray{std::move(seeds)});
  }
  {
    std::vector<std::int64_t> folds;
    for (auto f : sweep_folds) folds.push_back(f);
    t.set("sweep", "folds", ConfigScalarArray{std::move(folds)});
  }
  t.set("sweep", "out", sweep_out);
  return t;
}

RunConfig RunConfig::from_table(const ConfigTable& t) {
  RunConfig c;
  for (const auto& [section, kv] : t.sections()) {
    for (const auto& [key, value] : kv) {
      (void)value;
      const std::string path = section + "." + key;
      auto unknown = [&] { throw ConfigError("unknown config key " + path); };
      if (section == "data") {
        if (key == "dir") c.data_dir = t.get_string(section, key);
        else unknown();
      } else if (section == "synth") {
        if (key == "out") c.synth_out = t.get_string(section, key);
        else if (key == "n") c.synth.n_spots = static_cast<int>(t.get_int(section, key));
        else if (key == "slides") c.synth.slides = static_cast<int>(t.get_int(section, key));
        else if (key == "genes") c.synth.genes = static_cast<int>(t.get_int(section, key));
        else if (key == "feature_dim") c.synth.feature_dim = static_cast<int>(t.get_int(section, key));
        else if (key == "embedding_dim") c.synth.embedding_dim = static_cast<int>(t.get_int(section, key));
        else if (key == "cell_types") c.synth.cell_types = static_cast<int>(t.get_int(section, key));
        else if (key == "reference_cells") c.synth.reference_cells = static_cast<int>(t.get_int(section, key));
        else if (key == "noise") c.synth.noise = t.get_double(section, key);
        else if (key == "type_skew") c.synth.type_skew = t.get_double(section, key);
        else if (key == "seed") c.synth.seed = static_cast<std::uint64_t>(t.get_int(section, key));
        else unknown();
      } else if (section == "sample") {
        if (key == "strategy") c.sample_strategy = t.get_string(section, key);
        else if (key == "budget") c.sample_budget = t.get_double(section, key);
        else if (key == "fold") c.sample_fold = static_cast<int>(t.get_int(section, key));
        else if (key == "out") c.sample_out = t.get_string(section, key);
        else if (key == "seed") c.sample_seed = static_cast<std::uint64_t>(t.get_int(section, key));
        else unknown();
      } else if (section == "policy") {
        if (key == "rounds") c.policy.rounds = static_cast<int>(t.get_int(section, key));
        else if (key == "warmup_random") c.policy.warmup_random = t.get_bool(section, key);
        else if (key == "lr") c.policy.lr = t.get_double(section, key);
        else if (key == "momentum") c.policy.momentum = t.get_double(section, key);
        else if (key == "baseline") c.policy.baseline = baseline_from(t.get_string(section, key));
        else if (key == "interleave_epochs") c.policy.interleave_epochs = static_cast<int>(t.get_int(section, key));
        else unknown();
      } else if (section == "rewards") {
        if (key == "w_sc") c.weights.w_sc = t.get_double(section, key);
        else if (key == "w_type") c.weights.w_type = t.get_double(section, key);
        else if (key == "w_spa") c.weights.w_spa = t.get_double(section, key);
        else if (key == "cluster_count") c.rewards.cluster_count = static_cast<int>(t.get_int(section, key));
        else if (key == "pca_dim") c.rewards.pca_dim = static_cast<int>(t.get_int(section, key));
        else if (key == "eps") c.rewards.eps = t.get_double(section, key);
        else if (key == "spatial_mode") c.rewards.spatial_mode = spatial_from(t.get_string(section, key));
        else if (key == "scope") c.rewards.scope = scope_from(t.get_string(section, key));
        else if (key == "disp_exclude_self") c.rewards.disp_exclude_self = t.get_bool(section, key);
        else if (key == "kmeans_batch") c.rewards.kmeans_batch = static_cast<int>(t.get_int(section, key));
        else if (key == "kmeans_iters") c.rewards.kmeans_iters = static_cast<int>(t.get_int(section, key));
        else if (key == "seed") c.rewards.seed = static_cast<std::uint64_t>(t.get_int(section, key));
        else unknown();
      } else if (section == "uncertainty") {
        if (key == "dropout_rate") c.uncertainty.dropout_rate = t.get_double(section, key);
        else if (key == "passes") c.uncertainty.passes = static_cast<int>(t.get_int(section, key));
        else if (key == "warm_ratio") c.uncertainty.warm_ratio = t.get_double(section, key);
        else unknown();
      } else if (section == "diversity") {
        if (key == "pca_dim") c.diversity.pca_dim = static_cast<int>(t.get_int(section, key));
        else if (key == "min_pts") c.diversity.dbscan_min_pts = static_cast<int>(t.get_int(section, key));
        else unknown();
      } else if (section == "train") {
        if (key == "pool") c.train_pool = t.get_string(section, key);
        else if (key == "out") c.train_out = t.get_string(section, key);
        else if (key == "lr0") c.train.lr0 = t.get_double(section, key);
        else if (key == "lr_min") c.train.lr_min = t.get_double(section, key);
        else if (key == "momentum") c.train.momentum = t.get_double(section, key);
        else if (key == "weight_decay") c.train.weight_decay = t.get_double(section, key);
        else if (key == "batch") c.train.batch = static_cast<int>(t.get_int(section, key));
        else if (key == "epochs") c.train.epochs = static_cast<int>(t.get_int(section, key));
        else if (key == "lambda_r") c.train.lambda_r = t.get_double(section, key);
        else if (key == "lambda_p") c.train.lambda_p = t.get_double(section, key);
        else if (key == "lambda_kd") c.train.lambda_kd = t.get_double(section, key);
        else if (key == "top_k") c.train.top_k = static_cast<int>(t.get_int(section, key));
        else if (key == "top_types") c.train.top_types = static_cast<int>(t.get_int(section, key));
        else if (key == "sim_threshold") c.train.sim_threshold = t.get_double(section, key);
        else if (key == "temperature") c.train.temperature = t.get_double(section, key);
        else if (key == "hidden") c.train.hidden = static_cast<int>(t.get_int(section, key));
        else if (key == "proj_hidden") c.train.proj_hidden = static_cast<int>(t.get_int(section, key));
        else if (key == "proj_out") c.train.proj_out = static_cast<int>(t.get_int(section, key));
        else if (key == "seed") c.train.seed = static_cast<std::uint64_t>(t.get_int(section, key));
        else if (key == "retrieval") c.train.retrieval_enabled = t.get_bool(section, key);
        else unknown();
      } else if (section == "eval") {
        if (key == "ckpt") c.eval_ckpt = t.get_string(section, key);
        else if (key == "fold") c.eval_fold = static_cast<int>(t.get_int(section, key));
        else if (key == "out") c.eval_out = t.get_string(section, key);
        else unknown();
      } else if (section == "cv") {
        if (key == "folds") c.cv_folds = static_cast<int>(t.get_int(section, key));
        else if (key == "split_seed") c.cv_split_seed = static_cast<std::uint64_t>(t.get_int(section, key));
        else unknown();
      } else if (section == "sweep") {
        if (key == "strategies") c.sweep_strategies = t.get_string_array(section, key);
        else if (key == "ratios") c.sweep_ratios = t.get_double_array(section, key);
        else if (key == "seeds") {
          c.sweep_seeds.clear();
          for (auto s : t.get_int_array(section, key))
            c.sweep_seeds.push_back(static_cast<std::uint64_t>(s));
        } else if (key == "folds") {
          c.sweep_folds.clear();
          for (auto f : t.get_int_array(section, key))
            c.sweep_folds.push_back(static_cast<int>(f));
        } else if (key == "out") {
          c.sweep_out = t.get_string(section, key);
        } else {
          unknown();
        }
      } else {
        throw ConfigError("unknown config section [" + section + "]");
      }
    }
  }
  return c;
}

std::string RunConfig::content_hash() const {
  return hex64(fnv1a64(serialize()));
}

void RunConfig::write_resolved(const std::filesystem::path& stem) const {
  const std::filesystem::path dir = stem.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  {
    std::ofstream out(stem.string() + ".config.toml", std::ios::trunc);
    if (!out) throw IoError("cannot write resolved config next to " +
                            stem.string());
    out << serialize();
  }
  {
    std::ofstream out(stem.string() + ".config.hash", std::ios::trunc);
    if (!out) throw IoError("cannot write config hash next to " + stem.string());
    out << content_hash() << "\n";
  }
}

}  // namespace scrl
