#include "scrl/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "scrl/errors.hpp"
#include "scrl/text.hpp"

namespace scrl {

namespace {

constexpr const char* kCsvHeader =
    "strategy,ratio,fold,seed,mse,mae,pcc,final_reward,status";

std::string cell_id(const SweepCellKey& k) {
  return k.strategy + "|" + double_str(k.ratio) + "|" + std::to_string(k.fold) +
         "|" + std::to_string(k.seed);
}

nlohmann::json row_json(const SweepRow& r, const std::string& hash) {
  return {{"strategy", r.key.strategy}, {"ratio", r.key.ratio},
          {"fold", r.key.fold},         {"seed", r.key.seed},
          {"mse", r.metric.mse},        {"mae", r.metric.mae},
          {"pcc", r.metric.pcc},        {"final_reward", r.final_reward},
          {"status", r.status},         {"config_hash", hash}};
}

SweepRow row_from_json(const nlohmann::json& j) {
  SweepRow r;
  r.key.strategy = j.at("strategy");
  r.key.ratio = j.at("ratio");
  r.key.fold = j.at("fold");
  r.key.seed = j.at("seed");
  r.metric.mse = j.at("mse");
  r.metric.mae = j.at("mae");
  r.metric.pcc = j.at("pcc");
  r.final_reward = j.at("final_reward").is_null()
                       ? std::numeric_limits<double>::quiet_NaN()
                       : j.at("final_reward").get<double>();
  r.status = j.at("status");
  return r;
}

}  // namespace

SweepRow run_sweep_cell(const Dataset& base, const SweepCellKey& key,
                        const SweepConfig& cfg) {
  SweepRow row;
  row.key = key;
  row.final_reward = std::numeric_limits<double>::quiet_NaN();

  Dataset ds = base;  // fresh revealed set per cell

  const auto fold_of = crossval_split(ds.slide_ids(), cfg.cv_folds,
                                      cfg.split_seed);
  std::vector<std::int64_t> train_ids, test_ids;
  for (const SpotRecord& s : ds.spots()) {
    if (fold_of.at(s.slide_id) == key.fold)
      test_ids.push_back(s.spot_id);
    else
      train_ids.push_back(s.spot_id);
  }
  if (train_ids.empty() || test_ids.empty())
    throw ConfigError("sweep: fold " + std::to_string(key.fold) +
                      " leaves an empty train or test side");

  const auto budget = static_cast<std::size_t>(
      std::ceil(key.ratio * static_cast<double>(train_ids.size())));

  std::vector<std::int64_t> pool;
  if (key.strategy == "scrl") {
    SamplerConfig sc = cfg.sampler;
    sc.budget_count = budget;
    sc.seed = key.seed;
    const SamplingRun run =
        run_active_sampling(ds, train_ids, sc, cfg.reward, cfg.weights);
    pool = run.pool;
    if (!run.episodes.empty())
      row.final_reward = run.episodes.back().reward.combined;
  } else if (key.strategy == "random") {
    pool = random_sampler(train_ids, budget, key.seed);
  } else if (key.strategy == "uncertainty") {
    pool = run_uncertainty_strategy(ds, train_ids, budget, cfg.train,
                                    cfg.uncertainty, key.seed);
  } else if (key.strategy == "diversity") {
    pool = diversity_sampler(ds, train_ids, budget, cfg.diversity, key.seed);
  } else {
    throw ConfigError("sweep: unknown strategy '" + key.strategy + "'");
  }

  ds.reveal(pool);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed({key.seed, 0x747261ull});  // paired across strategies
  const PredictorModel model = train_predictor(ds, pool, tc);

  Matrix truth(test_ids.size(), ds.gene_count());
  Matrix test_features(test_ids.size(), ds.feature_dim());
  for (std::size_t i = 0; i < test_ids.size(); ++i) {
    const auto y = ds.oracle_expression(test_ids[i]);
    std::copy(y.begin(), y.end(), truth.row(i).begin());
    const auto f = ds.feature_row(test_ids[i]);
    std::copy(f.begin(), f.end(), test_features.row(i).begin());
  }
  row.metric = metrics(truth, predict(model, test_features));
  row.status = "ok";
  return row;
}

SweepReport budget_sweep(const Dataset& base, const SweepConfig& cfg,
                         const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path log_path = out_dir / "cells.jsonl";

  // Pick up rows completed by a previous run of the same resolved config.
  std::map<std::string, SweepRow> done;
  if (std::filesystem::exists(log_path)) {
    std::ifstream in(log_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const nlohmann::json j = nlohmann::json::parse(line);
        if (j.value("config_hash", "") != cfg.config_hash) continue;
        const SweepRow r = row_from_json(j);
        done[cell_id(r.key)] = r;
      } catch (const nlohmann::json::exception&) {
        continue;  // a torn line from a crashed run
      }
    }
  }

  std::vector<SweepCellKey> grid;
  for (int fold : cfg.folds)
    for (const std::string& strategy : cfg.strategies)
      for (double ratio : cfg.ratios)
        for (std::uint64_t seed : cfg.seeds)
          grid.push_back({strategy, ratio, fold, seed});

  std::vector<SweepRow> rows(grid.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto it = done.find(cell_id(grid[i]));
    if (it != done.end())
      rows[i] = it->second;
    else
      pending.push_back(i);
  }

  std::ofstream log(log_path, std::ios::app);
  if (!log) throw IoError("budget_sweep: cannot append to " + log_path.string());
  std::mutex log_mu;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      const std::size_t i = pending[slot];
      SweepRow row;
      try {
        row = run_sweep_cell(base, grid[i], cfg);
      } catch (const std::exception& e) {
        row.key = grid[i];
        row.metric = {std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN()};
        row.final_reward = std::numeric_limits<double>::quiet_NaN();
        row.status = std::string("failed: ") + e.what();
      }
      {
        std::lock_guard<std::mutex> lock(log_mu);
        log << row_json(row, cfg.config_hash).dump() << "\n";
        log.flush();
      }
      rows[i] = std::move(row);
    }
  };

  const int threads = std::max(1, cfg.threads);
  if (threads == 1 || pending.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> crew;
    for (int t = 0; t < threads; ++t) crew.emplace_back(worker);
    for (auto& th : crew) th.join();
  }

  SweepReport report;
  report.rows = std::move(rows);
  report.config_hash = cfg.config_hash;
  return report;
}

void write_report(const SweepReport& report,
                  const std::filesystem::path& out_dir) {
  if (report.rows.empty()) throw ConfigError("write_report: empty report");
  std::filesystem::create_directories(out_dir);

  {
    std::ofstream out(out_dir / "report.csv", std::ios::trunc);
    if (!out) throw IoError("write_report: cannot write report.csv");
    out << kCsvHeader << "\n";
    for (const SweepRow& r : report.rows) {
      out << r.key.strategy << "," << double_str(r.key.ratio) << ","
          << r.key.fold << "," << r.key.seed << "," << double_str(r.metric.mse)
          << "," << double_str(r.metric.mae) << "," << double_str(r.metric.pcc)
          << "," << double_str(r.final_reward) << "," << r.status << "\n";
    }
  }

  // Per-(strategy, ratio) aggregates over the ok rows.
  struct Agg {
    std::vector<double> mse, mae, pcc, reward;
  };
  std::map<std::pair<std::string, double>, Agg> groups;
  for (const SweepRow& r : report.rows) {
    if (r.status != "ok") continue;
    Agg& a = groups[{r.key.strategy, r.key.ratio}];
    a.mse.push_back(r.metric.mse);
    a.mae.push_back(r.metric.mae);
    a.pcc.push_back(r.metric.pcc);
    if (std::isfinite(r.final_reward)) a.reward.push_back(r.final_reward);
  }
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto stddev = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };

  nlohmann::json summary;
  summary["config_hash"] = report.config_hash;
  // PCC here is computed per spot across genes, matching the training loss.
  summary["pcc_axis"] = "per_spot_across_genes";
  summary["cells"] = report.rows.size();
  summary["groups"] = nlohmann::json::array();
  for (const auto& [key, agg] : groups) {
    nlohmann::json g;
    g["strategy"] = key.first;
    g["ratio"] = key.second;
    g["n"] = agg.mse.size();
    g["mse_mean"] = mean(agg.mse);
    g["mse_std"] = stddev(agg.mse);
    g["mae_mean"] = mean(agg.mae);
    g["mae_std"] = stddev(agg.mae);
    g["pcc_mean"] = mean(agg.pcc);
    g["pcc_std"] = stddev(agg.pcc);
    g["reward_mean"] = agg.reward.empty() ? nlohmann::json()
                                          : nlohmann::json(mean(agg.reward));
    summary["groups"].push_back(g);
  }
  std::ofstream out(out_dir / "summary.json", std::ios::trunc);
  if (!out) throw IoError("write_report: cannot write summary.json");
  out << summary.dump(2) << "\n";
}

std::vector<SweepRow> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_report_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw SchemaError("read_report_csv: bad header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    cells.push_back(cur);
    if (cells.size() < 9) throw SchemaError("read_report_csv: short row");
    SweepRow r;
    r.key.strategy = cells[0];
    r.key.ratio = std::stod(cells[1]);
    r.key.fold = std::stoi(cells[2]);
    r.key.seed = static_cast<std::uint64_t>(std::stoull(cells[3]));
    r.metric.mse = std::stod(cells[4]);
    r.metric.mae = std::stod(cells[5]);
    r.metric.pcc = std::stod(cells[6]);
    r.final_reward = std::stod(cells[7]);
    // A failure message may itself contain commas; stitch it back together.
    r.status = cells[8];
    for (std::size_t i = 9; i < cells.size(); ++i) r.status += "," + cells[i];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace scrl
