// Command-line front end for the active-sequencing engine:
//   synth | sample | train | eval | sweep
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scrl/baselines.hpp"
#include "scrl/config.hpp"
#include "scrl/dataset.hpp"
#include "scrl/errors.hpp"
#include "scrl/metrics.hpp"
#include "scrl/policy.hpp"
#include "scrl/predictor.hpp"
#include "scrl/rewards.hpp"
#include "scrl/sweep.hpp"
#include "scrl/synthgen.hpp"
#include "scrl/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const scrl::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const scrl::BudgetError*>(&e)) return 2;
  if (dynamic_cast<const scrl::NumericError*>(&e)) return 4;
  if (dynamic_cast<const scrl::Error*>(&e)) return 3;
  return 1;
}

int env_threads() {
  const char* raw = std::getenv("SCRL_THREADS");
  if (!raw) return 1;
  const int v = std::atoi(raw);
  return v >= 1 ? v : 1;
}

// Path stem the resolved config sits next to: "pool.json" -> "pool".
fs::path config_stem(const fs::path& out) {
  fs::path stem = out;
  if (stem.has_extension()) stem.replace_extension();
  return stem;
}

scrl::RunConfig load_base_config(const std::string& config_path) {
  if (config_path.empty()) return {};
  return scrl::RunConfig::from_table(
      scrl::ConfigTable::parse_file(config_path));
}

void require_budget_ratio(double budget) {
  if (!(budget > 0.0 && budget <= 1.0))
    throw scrl::ConfigError("--budget must be a ratio in (0, 1], got " +
                            scrl::double_str(budget));
}

std::vector<std::int64_t> fold_candidates(const scrl::Dataset& ds,
                                          const scrl::RunConfig& cfg,
                                          int holdout_fold) {
  if (holdout_fold < 0) return ds.all_ids();
  const auto fold_of =
      scrl::crossval_split(ds.slide_ids(), cfg.cv_folds, cfg.cv_split_seed);
  std::vector<std::int64_t> out;
  for (const scrl::SpotRecord& s : ds.spots())
    if (fold_of.at(s.slide_id) != holdout_fold) out.push_back(s.spot_id);
  return out;
}

json episode_to_json(const scrl::Episode& e) {
  return {{"round", e.round},
          {"chosen", e.chosen},
          {"log_prob", e.log_prob},
          {"reward",
           {{"r_sc", e.reward.r_sc},
            {"r_type", e.reward.r_type},
            {"r_spa", e.reward.r_spa},
            {"combined", e.reward.combined}}},
          {"baseline", e.baseline_value}};
}

int cmd_synth(const scrl::RunConfig& cfg) {
  scrl::generate_files(cfg.synth, cfg.synth_out);
  cfg.write_resolved(fs::path(cfg.synth_out) / "run");
  std::cout << "wrote synthetic dataset to " << cfg.synth_out << " ("
            << cfg.synth.n_spots << " spots, " << cfg.synth.genes
            << " genes)\n";
  return 0;
}

int cmd_sample(const scrl::RunConfig& cfg) {
  require_budget_ratio(cfg.sample_budget);
  if (cfg.data_dir.empty())
    throw scrl::ConfigError("--data is required for sample");
  scrl::Dataset ds = scrl::Dataset::load(cfg.data_dir);
  const std::vector<std::int64_t> candidates =
      fold_candidates(ds, cfg, cfg.sample_fold);

  json out;
  out["strategy"] = cfg.sample_strategy;
  out["budget_ratio"] = cfg.sample_budget;
  out["fold"] = cfg.sample_fold;
  out["episodes"] = json::array();

  const auto budget = static_cast<std::size_t>(std::ceil(
      cfg.sample_budget * static_cast<double>(candidates.size())));

  std::vector<std::int64_t> pool;
  if (cfg.sample_strategy == "scrl") {
    scrl::SamplerConfig sc = cfg.policy;
    sc.budget_count = budget;
    sc.seed = cfg.sample_seed;

    std::unique_ptr<scrl::Trainer> trainer;
    scrl::TrainConfig tc = cfg.train;
    std::size_t trainer_pool_size = 0;
    scrl::RoundHook hook;
    if (sc.interleave_epochs > 0) {
      tc.epochs = sc.rounds * sc.interleave_epochs;
      hook = [&](int, std::span<const std::int64_t> pool_so_far) {
        if (!trainer)
          trainer = std::make_unique<scrl::Trainer>(ds, pool_so_far, tc);
        else
          trainer->extend_pool(pool_so_far.subspan(trainer_pool_size));
        trainer_pool_size = pool_so_far.size();
        trainer->run_epochs(sc.interleave_epochs);
      };
    }
    const scrl::SamplingRun run =
        scrl::run_active_sampling(ds, candidates, sc, cfg.rewards, cfg.weights,
                                  hook ? &hook : nullptr);
    pool = run.pool;
    for (const scrl::Episode& e : run.episodes)
      out["episodes"].push_back(episode_to_json(e));
    if (trainer) {
      const scrl::PredictorModel model = trainer->finish();
      const fs::path ckpt_dir = config_stem(cfg.sample_out).string() + "_ckpt";
      scrl::save_checkpoint(model, ckpt_dir, cfg.content_hash());
      out["interleaved_checkpoint"] = ckpt_dir.string();
    }
  } else if (cfg.sample_strategy == "random") {
    pool = scrl::random_sampler(candidates, budget, cfg.sample_seed);
  } else if (cfg.sample_strategy == "uncertainty") {
    pool = scrl::run_uncertainty_strategy(ds, candidates, budget, cfg.train,
                                          cfg.uncertainty, cfg.sample_seed);
  } else if (cfg.sample_strategy == "diversity") {
    pool = scrl::diversity_sampler(ds, candidates, budget, cfg.diversity,
                                   cfg.sample_seed);
  } else {
    throw scrl::ConfigError("--strategy must be one of scrl, random, "
                            "uncertainty, diversity; got '" +
                            cfg.sample_strategy + "'");
  }

  out["ids"] = pool;
  const fs::path out_path(cfg.sample_out);
  if (out_path.has_parent_path())
    fs::create_directories(out_path.parent_path());
  std::ofstream f(out_path, std::ios::trunc);
  if (!f) throw scrl::IoError("cannot write " + cfg.sample_out);
  f << out.dump(2) << "\n";
  cfg.write_resolved(config_stem(out_path));
  std::cout << "sampled " << pool.size() << " of " << candidates.size()
            << " candidate spots -> " << cfg.sample_out << "\n";
  return 0;
}

int cmd_train(const scrl::RunConfig& cfg) {
  if (cfg.data_dir.empty())
    throw scrl::ConfigError("--data is required for train");
  scrl::Dataset ds = scrl::Dataset::load(cfg.data_dir);

  std::ifstream pf(cfg.train_pool);
  if (!pf) throw scrl::IoError("cannot open pool file " + cfg.train_pool);
  json pool_json;
  try {
    pf >> pool_json;
  } catch (const json::exception& e) {
    throw scrl::FormatError("bad pool file: " + std::string(e.what()));
  }
  const std::vector<std::int64_t> pool =
      pool_json.at("ids").get<std::vector<std::int64_t>>();

  ds.reveal(pool);  // the pool records what was sequenced
  std::vector<scrl::EpochLog> logs;
  const scrl::PredictorModel model =
      scrl::train_predictor(ds, pool, cfg.train, &logs);
  scrl::save_checkpoint(model, cfg.train_out, cfg.content_hash());

  std::ofstream lf(fs::path(cfg.train_out) / "train_log.jsonl",
                   std::ios::trunc);
  for (const scrl::EpochLog& l : logs) {
    lf << json{{"epoch", l.epoch},     {"lr", l.lr},
               {"con_loss", l.con_loss}, {"mse", l.mse},
               {"pcc", l.pcc},           {"distill", l.distill},
               {"total", l.total}}
              .dump()
       << "\n";
  }
  cfg.write_resolved(fs::path(cfg.train_out) / "run");
  std::cout << "trained on " << pool.size() << " spots for "
            << cfg.train.epochs << " epochs -> " << cfg.train_out << "\n";
  return 0;
}

int cmd_eval(const scrl::RunConfig& cfg) {
  if (cfg.data_dir.empty())
    throw scrl::ConfigError("--data is required for eval");
  scrl::Dataset ds = scrl::Dataset::load(cfg.data_dir);
  const scrl::PredictorModel model = scrl::load_checkpoint(cfg.eval_ckpt);

  const auto fold_of =
      scrl::crossval_split(ds.slide_ids(), cfg.cv_folds, cfg.cv_split_seed);
  std::vector<std::int64_t> test_ids;
  for (const scrl::SpotRecord& s : ds.spots())
    if (fold_of.at(s.slide_id) == cfg.eval_fold) test_ids.push_back(s.spot_id);
  if (test_ids.empty())
    throw scrl::ConfigError("eval fold " + std::to_string(cfg.eval_fold) +
                            " holds no spots");

  scrl::Matrix truth(test_ids.size(), ds.gene_count());
  scrl::Matrix feats(test_ids.size(), ds.feature_dim());
  for (std::size_t i = 0; i < test_ids.size(); ++i) {
    const auto y = ds.oracle_expression(test_ids[i]);
    std::copy(y.begin(), y.end(), truth.row(i).begin());
    const auto f = ds.feature_row(test_ids[i]);
    std::copy(f.begin(), f.end(), feats.row(i).begin());
  }
  const scrl::MetricTriple m = scrl::metrics(truth, predict(model, feats));

  json out{{"fold", cfg.eval_fold},
           {"spots", test_ids.size()},
           {"mse", m.mse},
           {"mae", m.mae},
           {"pcc", m.pcc},
           {"pcc_axis", "per_spot_across_genes"}};
  std::cout << out.dump(2) << "\n";
  const fs::path out_path =
      cfg.eval_out.empty() ? fs::path("eval_metrics.json")
                           : fs::path(cfg.eval_out);
  if (out_path.has_parent_path())
    fs::create_directories(out_path.parent_path());
  std::ofstream f(out_path, std::ios::trunc);
  if (!f) throw scrl::IoError("cannot write " + out_path.string());
  f << out.dump(2) << "\n";
  cfg.write_resolved(config_stem(out_path));
  return 0;
}

int cmd_sweep(const scrl::RunConfig& cfg) {
  if (cfg.data_dir.empty())
    throw scrl::ConfigError("--data is required for sweep");
  const scrl::Dataset ds = scrl::Dataset::load(cfg.data_dir);

  scrl::SweepConfig sc;
  sc.strategies = cfg.sweep_strategies;
  sc.ratios = cfg.sweep_ratios;
  sc.seeds = cfg.sweep_seeds;
  sc.folds = cfg.sweep_folds;
  sc.cv_folds = cfg.cv_folds;
  sc.split_seed = cfg.cv_split_seed;
  sc.train = cfg.train;
  sc.sampler = cfg.policy;
  sc.reward = cfg.rewards;
  sc.weights = cfg.weights;
  sc.uncertainty = cfg.uncertainty;
  sc.diversity = cfg.diversity;
  sc.config_hash = cfg.content_hash();
  sc.threads = env_threads();

  const scrl::SweepReport report = scrl::budget_sweep(ds, sc, cfg.sweep_out);
  scrl::write_report(report, cfg.sweep_out);
  cfg.write_resolved(fs::path(cfg.sweep_out) / "run");

  std::size_t failed = 0;
  for (const auto& r : report.rows)
    if (r.status != "ok") ++failed;
  std::cout << "sweep finished: " << report.rows.size() << " cells, " << failed
            << " failed -> " << cfg.sweep_out << "/report.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted active sequencing simulator with retrieval-augmented "
               "expression prediction"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Run configuration file")
      ->configurable(false);

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_out;
  std::optional<std::int64_t> synth_n, synth_slides, synth_genes, synth_fdim,
      synth_edim, synth_types, synth_refs, synth_seed;
  std::optional<double> synth_noise, synth_skew;
  synth->add_option("--out", synth_out, "Output dataset directory");
  synth->add_option("--n", synth_n, "Number of spots");
  synth->add_option("--slides", synth_slides, "Number of slides");
  synth->add_option("--genes", synth_genes, "Gene count");
  synth->add_option("--feature-dim", synth_fdim, "Feature width");
  synth->add_option("--embedding-dim", synth_edim, "Embedding width");
  synth->add_option("--cell-types", synth_types, "Planted cell types");
  synth->add_option("--reference-cells", synth_refs, "Reference cell count");
  synth->add_option("--noise", synth_noise, "Noise sigma");
  synth->add_option("--type-skew", synth_skew, "Type prevalence decay");
  synth->add_option("--seed", synth_seed, "Generator seed");

  // sample -----------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "Select spots under a budget");
  std::string sample_data, sample_strategy, sample_out;
  std::optional<double> sample_budget;
  std::optional<std::int64_t> sample_fold, sample_seed, sample_rounds,
      sample_interleave;
  std::optional<double> sample_lr;
  std::string sample_spatial, sample_scope;
  sample->add_option("--data", sample_data, "Dataset directory");
  sample->add_option("--strategy", sample_strategy,
                     "scrl | random | uncertainty | diversity");
  sample->add_option("--budget", sample_budget, "Budget ratio in (0, 1]");
  sample->add_option("--fold", sample_fold,
                     "Hold this fold out of the candidate set");
  sample->add_option("--out", sample_out, "Pool output path");
  sample->add_option("--seed", sample_seed, "Sampler seed");
  sample->add_option("--rounds", sample_rounds, "Active sampling rounds");
  sample->add_option("--lr", sample_lr, "Policy learning rate");
  sample->add_option("--spatial-mode", sample_spatial,
                     "verbatim | corrected");
  sample->add_option("--scope", sample_scope, "pool | batch reward scope");
  sample->add_option("--interleave-epochs", sample_interleave,
                     "Train the predictor this many epochs after each round");

  // train --------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train the predictor on a pool");
  std::string train_data, train_pool, train_out;
  std::optional<std::int64_t> train_epochs, train_seed;
  std::optional<double> train_lambda_kd;
  std::optional<bool> train_retrieval;
  train->add_option("--data", train_data, "Dataset directory");
  train->add_option("--pool", train_pool, "pool.json from sample");
  train->add_option("--out", train_out, "Checkpoint directory");
  train->add_option("--epochs", train_epochs, "Training epochs");
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--lambda-kd", train_lambda_kd, "Distillation weight");
  train->add_option("--retrieval", train_retrieval,
                    "Enable the retrieval branch");

  // eval -----------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a fold");
  std::string eval_data, eval_ckpt, eval_out;
  std::optional<std::int64_t> eval_fold;
  eval->add_option("--data", eval_data, "Dataset directory");
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint directory");
  eval->add_option("--fold", eval_fold, "Held-out fold index");
  eval->add_option("--out", eval_out, "Metrics output path");

  // sweep ------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Budget sweep over strategies");
  std::string sweep_data, sweep_out;
  sweep->add_option("--data", sweep_data, "Dataset directory");
  sweep->add_option("--out", sweep_out, "Report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    scrl::RunConfig cfg = load_base_config(config_path);

    if (synth->parsed()) {
      if (!synth_out.empty()) cfg.synth_out = synth_out;
      if (synth_n) cfg.synth.n_spots = static_cast<int>(*synth_n);
      if (synth_slides) cfg.synth.slides = static_cast<int>(*synth_slides);
      if (synth_genes) cfg.synth.genes = static_cast<int>(*synth_genes);
      if (synth_fdim) cfg.synth.feature_dim = static_cast<int>(*synth_fdim);
      if (synth_edim) cfg.synth.embedding_dim = static_cast<int>(*synth_edim);
      if (synth_types) cfg.synth.cell_types = static_cast<int>(*synth_types);
      if (synth_refs) cfg.synth.reference_cells = static_cast<int>(*synth_refs);
      if (synth_noise) cfg.synth.noise = *synth_noise;
      if (synth_skew) cfg.synth.type_skew = *synth_skew;
      if (synth_seed)
        cfg.synth.seed = static_cast<std::uint64_t>(*synth_seed);
      return cmd_synth(cfg);
    }
    if (sample->parsed()) {
      if (!sample_data.empty()) cfg.data_dir = sample_data;
      if (!sample_strategy.empty()) cfg.sample_strategy = sample_strategy;
      if (sample_budget) cfg.sample_budget = *sample_budget;
      if (sample_fold) cfg.sample_fold = static_cast<int>(*sample_fold);
      if (!sample_out.empty()) cfg.sample_out = sample_out;
      if (sample_seed)
        cfg.sample_seed = static_cast<std::uint64_t>(*sample_seed);
      if (sample_rounds) cfg.policy.rounds = static_cast<int>(*sample_rounds);
      if (sample_lr) cfg.policy.lr = *sample_lr;
      if (sample_interleave)
        cfg.policy.interleave_epochs = static_cast<int>(*sample_interleave);
      if (!sample_spatial.empty()) {
        if (sample_spatial == "verbatim")
          cfg.rewards.spatial_mode = scrl::SpatialMode::kVerbatim;
        else if (sample_spatial == "corrected")
          cfg.rewards.spatial_mode = scrl::SpatialMode::kCorrected;
        else
          throw scrl::ConfigError("--spatial-mode must be verbatim|corrected");
      }
      if (!sample_scope.empty()) {
        if (sample_scope == "pool")
          cfg.rewards.scope = scrl::RewardScope::kPool;
        else if (sample_scope == "batch")
          cfg.rewards.scope = scrl::RewardScope::kBatch;
        else
          throw scrl::ConfigError("--scope must be pool|batch");
      }
      return cmd_sample(cfg);
    }
    if (train->parsed()) {
      if (!train_data.empty()) cfg.data_dir = train_data;
      if (!train_pool.empty()) cfg.train_pool = train_pool;
      if (!train_out.empty()) cfg.train_out = train_out;
      if (train_epochs) cfg.train.epochs = static_cast<int>(*train_epochs);
      if (train_seed) cfg.train.seed = static_cast<std::uint64_t>(*train_seed);
      if (train_lambda_kd) cfg.train.lambda_kd = *train_lambda_kd;
      if (train_retrieval) cfg.train.retrieval_enabled = *train_retrieval;
      return cmd_train(cfg);
    }
    if (eval->parsed()) {
      if (!eval_data.empty()) cfg.data_dir = eval_data;
      if (!eval_ckpt.empty()) cfg.eval_ckpt = eval_ckpt;
      if (eval_fold) cfg.eval_fold = static_cast<int>(*eval_fold);
      if (!eval_out.empty()) cfg.eval_out = eval_out;
      return cmd_eval(cfg);
    }
    if (sweep->parsed()) {
      if (!sweep_data.empty()) cfg.data_dir = sweep_data;
      if (!sweep_out.empty()) cfg.sweep_out = sweep_out;
      return cmd_sweep(cfg);
    }
    std::cerr << app.help() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
