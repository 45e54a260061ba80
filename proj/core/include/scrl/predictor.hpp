#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scrl/dataset.hpp"
#include "scrl/matrix.hpp"
#include "scrl/rng.hpp"

namespace scrl {

// Affine -> ReLU -> affine block with SGD-momentum state. Both the
// regression net and the projection heads are instances of this.
struct MlpBlock {
  Eigen::MatrixXd w1;  // hidden x in
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // out x hidden
  Eigen::VectorXd b2;  // out
  Eigen::MatrixXd v_w1;
  Eigen::VectorXd v_b1;
  Eigen::MatrixXd v_w2;
  Eigen::VectorXd v_b2;

  static MlpBlock init(int in, int hidden, int out, std::uint64_t seed);

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int out_dim() const { return static_cast<int>(w2.rows()); }

  struct Cache {
    Eigen::MatrixXd x;  // n x in
    Eigen::MatrixXd a;  // n x hidden, pre-activation
  };
  struct Grads {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
  };

  // Rows of x are items; returns n x out.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;
  Grads backward(const Cache& cache, const Eigen::MatrixXd& d_out) const;
  void sgd_step(const Grads& g, double lr, double momentum, double weight_decay);

  // Flat parameter view in (w1, b1, w2, b2) storage order, for the
  // finite-difference harness.
  std::size_t param_count() const;
  double get_param(std::size_t i) const;
  void set_param(std::size_t i, double v);
  static double grad_entry(const Grads& g, std::size_t i);
};

struct TrainConfig {
  double lr0 = 1e-4;
  double lr_min = 1e-6;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch = 256;
  int epochs = 100;
  double lambda_r = 1.0;
  double lambda_p = 0.25;
  double lambda_kd = 0.25;
  int top_k = 50;        // retrieval candidates
  int top_types = 10;    // cell types kept by the majority filter
  double sim_threshold = 0.15;
  double temperature = 0.07;
  int hidden = 512;      // regression hidden width
  int proj_hidden = 256;
  int proj_out = 256;
  std::uint64_t seed = 42;
  bool retrieval_enabled = true;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Per-training-spot retrieval state: projected expression embeddings,
// raw expressions and matched cell types.
struct MemoryBank {
  std::vector<std::int64_t> ids;
  Eigen::MatrixXd embeddings;       // m x proj_out, unit rows (zero if degenerate)
  Eigen::MatrixXd raw_expressions;  // m x G
  std::vector<int> cell_types;      // m

  std::size_t size() const { return ids.size(); }
};

struct PredictorModel {
  MlpBlock reg;        // d -> hidden -> G
  MlpBlock img_head;   // d -> proj_hidden -> proj_out
  MlpBlock expr_head;  // G -> proj_hidden -> proj_out
  MemoryBank bank;
  TrainConfig cfg;
  bool trained = false;
};

// --- losses -----------------------------------------------------------

// Symmetric InfoNCE over paired rows: mean over both directions of the
// cross-entropy of cosine/tau logits against the diagonal.
double infonce_loss(const Eigen::MatrixXd& img_embs,
                    const Eigen::MatrixXd& expr_embs, double tau);

struct InfonceGrad {
  double loss = 0.0;
  Eigen::MatrixXd d_img;
  Eigen::MatrixXd d_expr;
};
InfonceGrad infonce_loss_grad(const Eigen::MatrixXd& img_embs,
                              const Eigen::MatrixXd& expr_embs, double tau);

// Pearson correlation across the entries of one spot; 0 when either side is
// constant.
double pearson(std::span<const double> y, std::span<const double> y_hat);

// 1 - PCC per spot, averaged over rows. Width < 2 -> DimensionError.
double pcc_loss(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat);

// lambda_kd * gate(mean_sim) * mean squared difference. The gate passes
// mean_sim through when it reaches the threshold and zeroes it otherwise.
double distill_loss(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& y_ret,
                    double mean_sim, const TrainConfig& cfg);

struct LossBreakdown {
  double mse = 0.0;      // raw mean-squared error (unweighted)
  double pcc = 0.0;      // raw 1-PCC term
  double distill = 0.0;  // weighted distillation term
  double total = 0.0;
};

// Single-spot objective: lambda_r * mse + lambda_p * pcc + distill.
LossBreakdown total_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat,
                         const Eigen::VectorXd& y_ret, double mean_sim,
                         const TrainConfig& cfg);

// One regression training step's objective over a batch, with the retrieval
// targets held constant: mean breakdown plus, when grads is non-null, the
// parameter gradients. The Trainer consumes exactly this function, so the
// finite-difference suites exercise the production gradient path.
LossBreakdown regression_batch_step(const MlpBlock& reg,
                                    const Eigen::MatrixXd& features,
                                    const Eigen::MatrixXd& targets,
                                    const Eigen::MatrixXd& retrieval_targets,
                                    std::span<const double> mean_sims,
                                    const TrainConfig& cfg,
                                    MlpBlock::Grads* grads);

// --- retrieval ---------------------------------------------------------

struct Retrieved {
  std::vector<int> indices;   // bank rows, best first
  std::vector<double> sims;   // matching cosine similarities
};

// Top-K bank rows by cosine similarity to the query embedding, descending,
// ties to the lowest index. exclude_index (when >= 0) implements
// leave-one-out. K larger than the usable bank is clipped with a warning.
Retrieved retrieve(const Eigen::VectorXd& query_emb, const MemoryBank& bank,
                   int k, int exclude_index = -1);

// Keeps the entries whose cell type is among the T most frequent within the
// retrieved set (count ties resolved toward the lower type id). Returns
// positions into `r`, preserving rank order; never empty for T >= 1.
std::vector<std::size_t> majority_type_filter(const Retrieved& r,
                                              const MemoryBank& bank, int t);

// Mean raw expression over the filtered entries.
Eigen::VectorXd soft_label(const Retrieved& r,
                           std::span<const std::size_t> filtered,
                           const MemoryBank& bank);

// --- training / inference ------------------------------------------------

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double con_loss = 0.0;
  double mse = 0.0;
  double pcc = 0.0;
  double distill = 0.0;
  double total = 0.0;
};

// Incremental trainer so sampling rounds can interleave with training.
// Per epoch: (a) projection heads step on the contrastive loss, (b) memory
// bank rebuild, (c) regression step on the total loss with leave-one-out
// retrieval. All pool ids must already be revealed.
class Trainer {
 public:
  Trainer(const Dataset& ds, std::span<const std::int64_t> pool,
          const TrainConfig& cfg);

  void run_epochs(int n);
  void extend_pool(std::span<const std::int64_t> ids);
  PredictorModel finish();
  const std::vector<EpochLog>& logs() const { return logs_; }

 private:
  void rebuild_bank();
  double epoch_lr() const;

  const Dataset* ds_;
  std::vector<std::int64_t> pool_;
  TrainConfig cfg_;
  MlpBlock reg_, img_head_, expr_head_;
  MemoryBank bank_;
  Prng rng_;
  int epochs_done_ = 0;
  std::vector<EpochLog> logs_;
};

PredictorModel train_predictor(const Dataset& ds,
                               std::span<const std::int64_t> pool,
                               const TrainConfig& cfg,
                               std::vector<EpochLog>* logs = nullptr);

// Deterministic regression forward (dropout inactive).
Eigen::VectorXd regress(const MlpBlock& reg, std::span<const float> feature);
Matrix predict(const PredictorModel& model, const Matrix& features);

// Forward pass with the dropout site after the input features active;
// masks derive from the rng stream. Used by the uncertainty baseline.
Eigen::MatrixXd regress_with_dropout(const MlpBlock& reg,
                                     const Eigen::MatrixXd& features,
                                     double dropout_rate, Prng& rng);

// Checkpoint: directory of SCRM parameter matrices plus manifest.json with
// shapes, hyperparameters and the resolved-config hash.
void save_checkpoint(const PredictorModel& model,
                     const std::filesystem::path& dir,
                     const std::string& config_hash);
PredictorModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace scrl
