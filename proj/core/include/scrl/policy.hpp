#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scrl/dataset.hpp"
#include "scrl/matrix.hpp"
#include "scrl/rewards.hpp"
#include "scrl/rng.hpp"

namespace scrl {

// Two-layer scoring network: score(e) = w2 . relu(W1 e + b1) + b2.
// Biases start at zero so the initial network matches the bias-free map.
struct PolicyNet {
  Eigen::MatrixXd w1;      // hidden x d
  Eigen::VectorXd b1;      // hidden
  Eigen::RowVectorXd w2;   // 1 x hidden
  double b2 = 0.0;
  Eigen::MatrixXd v_w1;    // velocity buffers, same shapes
  Eigen::VectorXd v_b1;
  Eigen::RowVectorXd v_w2;
  double v_b2 = 0.0;

  static constexpr int kHidden = 128;
  static PolicyNet init(int input_dim, std::uint64_t seed);
  int input_dim() const { return static_cast<int>(w1.cols()); }
};

// Gradient of a scalar w.r.t. every policy parameter.
struct PolicyGrad {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::RowVectorXd w2;
  double b2 = 0.0;
};

// Priority score per row of E. Width mismatch -> DimensionError.
std::vector<double> policy_scores(const PolicyNet& net, const Matrix& E);
std::vector<double> policy_scores(const PolicyNet& net,
                                  const Eigen::MatrixXd& E);

struct SampleResult {
  std::vector<std::size_t> picks;  // positions into the candidate ordering
  double log_prob = 0.0;
};

// Draws k candidates without replacement; after each pick the remaining
// probabilities renormalize. log_prob accumulates the renormalized pick
// probabilities, i.e. log pi(S) for the drawn order. k > |probs| -> BudgetError.
SampleResult sample_set(std::span<const double> probs, std::size_t k, Prng& rng);

// log pi of a given ordered pick sequence under the sequential-softmax model.
double policy_log_prob(const PolicyNet& net, const Eigen::MatrixXd& E,
                       std::span<const std::size_t> picks);

// Analytic gradient of policy_log_prob w.r.t. all parameters.
PolicyGrad policy_log_prob_grad(const PolicyNet& net, const Eigen::MatrixXd& E,
                                std::span<const std::size_t> picks);

enum class BaselineMode { kNone, kRunningMean };

// Variance-reduction baseline for a drifting reward series. Pool-scope
// rewards grow as the pool grows, so a plain moving average of rewards lags
// below them and every batch would get a positive advantage regardless of
// merit. Tracking the previous reward plus a moving average of increments
// centers the advantage on the batch's marginal contribution instead.
struct BaselineState {
  bool has_prev = false;
  bool has_gain = false;
  double prev_reward = 0.0;
  double gain_ema = 0.0;
  double decay = 0.9;

  // Baseline for the incoming reward; equals the reward itself until enough
  // history exists, so early rounds carry zero advantage.
  double value_or(double reward) const {
    if (!has_prev) return reward;
    return prev_reward + (has_gain ? gain_ema : (reward - prev_reward));
  }

  void update(double reward) {
    if (has_prev) {
      const double gain = reward - prev_reward;
      gain_ema = has_gain ? decay * gain_ema + (1.0 - decay) * gain : gain;
      has_gain = true;
    }
    prev_reward = reward;
    has_prev = true;
  }
};

// One REINFORCE ascent step: theta += lr * (reward - baseline) * grad(log pi).
// Velocity buffers apply classic momentum (0 = plain ascent). A non-finite
// gradient raises NumericError and leaves the parameters untouched.
void reinforce_update(PolicyNet& net, const Eigen::MatrixXd& E,
                      std::span<const std::size_t> picks, double reward,
                      double lr, double momentum, BaselineMode mode,
                      BaselineState& state);

struct SamplerConfig {
  double budget_ratio = 0.1;   // used when budget_count == 0
  std::size_t budget_count = 0;
  int rounds = 20;
  bool warmup_random = true;
  double lr = 0.02;
  double momentum = 0.0;
  BaselineMode baseline = BaselineMode::kRunningMean;
  double baseline_decay = 0.9;
  std::uint64_t seed = 42;
  int interleave_epochs = 0;  // 0 = decoupled sample-then-train pipeline

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

struct Episode {
  int round = 0;
  std::vector<std::int64_t> chosen;
  double log_prob = 0.0;
  RewardBreakdown reward;
  double baseline_value = 0.0;
};

struct SamplingRun {
  std::vector<std::int64_t> pool;
  std::vector<Episode> episodes;
};

// Called after every round with (round index, pool so far); lets a caller
// interleave predictor training with sampling.
using RoundHook = std::function<void(int, std::span<const std::int64_t>)>;

// The multi-round active-sampling loop over `candidates`. Reveals each
// round's picks, scores the pool with the reward context and updates the
// policy. Returns exactly B distinct ids plus the per-round episode log.
SamplingRun run_active_sampling(Dataset& ds,
                                std::span<const std::int64_t> candidates,
                                const SamplerConfig& cfg,
                                const RewardConfig& reward_cfg,
                                const RewardWeights& weights,
                                const RoundHook* hook = nullptr);

// Budget in spots for a candidate set of size n.
std::size_t resolve_budget(const SamplerConfig& cfg, std::size_t n);

// One JSON object per episode, for the run log.
std::string episode_json_line(const Episode& e);

}  // namespace scrl
