#include "scrl/policy.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "scrl/eigen_util.hpp"
#include "scrl/errors.hpp"
#include "scrl/numerics.hpp"

namespace scrl {

PolicyNet PolicyNet::init(int input_dim, std::uint64_t seed) {
  Prng rng(seed);
  PolicyNet net;
  net.w1.resize(kHidden, input_dim);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (int i = 0; i < kHidden; ++i)
    for (int j = 0; j < input_dim; ++j) net.w1(i, j) = rng.uniform(-s1, s1);
  net.b1 = Eigen::VectorXd::Zero(kHidden);
  // Zero output layer: the initial score surface is flat, so the first
  // scored round samples uniformly instead of inheriting a random tilt that
  // correlates across similar candidates. W1 still breaks symmetry.
  net.w2 = Eigen::RowVectorXd::Zero(kHidden);
  net.b2 = 0.0;
  net.v_w1 = Eigen::MatrixXd::Zero(kHidden, input_dim);
  net.v_b1 = Eigen::VectorXd::Zero(kHidden);
  net.v_w2 = Eigen::RowVectorXd::Zero(kHidden);
  net.v_b2 = 0.0;
  return net;
}

namespace {

// Pre-activations (hidden x n) for a candidate matrix with rows as items.
Eigen::MatrixXd preactivations(const PolicyNet& net, const Eigen::MatrixXd& E) {
  if (E.cols() != net.w1.cols())
    throw DimensionError("policy: feature width " + std::to_string(E.cols()) +
                         " != " + std::to_string(net.w1.cols()));
  Eigen::MatrixXd A = net.w1 * E.transpose();
  A.colwise() += net.b1;
  return A;
}

std::vector<double> scores_from_preacts(const PolicyNet& net,
                                        const Eigen::MatrixXd& A) {
  const Eigen::MatrixXd H = A.cwiseMax(0.0);
  const Eigen::RowVectorXd s = net.w2 * H;
  std::vector<double> out(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = s(i) + net.b2;
  return out;
}

// d(log pi)/d(score_j) for the sequential-softmax set probability:
// for each pick step, +1 on the picked score and -softmax over the still
// available candidates.
std::vector<double> log_prob_score_grad(std::span<const double> scores,
                                        std::span<const std::size_t> picks,
                                        double* log_prob_out) {
  const std::size_t n = scores.size();
  std::vector<double> grad(n, 0.0);
  std::vector<bool> available(n, true);
  double log_prob = 0.0;
  for (std::size_t pick : picks) {
    if (pick >= n || !available[pick])
      throw ValueError("policy: pick index invalid or repeated");
    double max_s = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (available[j]) max_s = std::max(max_s, scores[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (available[j]) total += std::exp(scores[j] - max_s);
    log_prob += scores[pick] - max_s - std::log(total);
    for (std::size_t j = 0; j < n; ++j)
      if (available[j]) grad[j] -= std::exp(scores[j] - max_s) / total;
    grad[pick] += 1.0;
    available[pick] = false;
  }
  if (log_prob_out) *log_prob_out = log_prob;
  return grad;
}

}  // namespace

std::vector<double> policy_scores(const PolicyNet& net,
                                  const Eigen::MatrixXd& E) {
  return scores_from_preacts(net, preactivations(net, E));
}

std::vector<double> policy_scores(const PolicyNet& net, const Matrix& E) {
  return policy_scores(net, to_eigen(E));
}

SampleResult sample_set(std::span<const double> probs, std::size_t k,
                        Prng& rng) {
  if (k > probs.size())
    throw BudgetError("sample_set: k=" + std::to_string(k) +
                      " exceeds candidate count " +
                      std::to_string(probs.size()));
  SampleResult res;
  res.picks.reserve(k);
  std::vector<std::size_t> avail(probs.size());
  std::iota(avail.begin(), avail.end(), std::size_t{0});
  double mass = 0.0;
  for (double p : probs) mass += p;
  for (std::size_t step = 0; step < k; ++step) {
    const double u = rng.uniform01() * mass;
    double cum = 0.0;
    std::size_t slot = avail.size() - 1;
    for (std::size_t i = 0; i < avail.size(); ++i) {
      cum += probs[avail[i]];
      if (cum > u) {
        slot = i;
        break;
      }
    }
    const std::size_t pick = avail[slot];
    const double p_pick = probs[pick];
    res.log_prob += std::log(std::max(p_pick / mass, DBL_MIN));
    mass -= p_pick;
    avail.erase(avail.begin() + static_cast<std::ptrdiff_t>(slot));
    res.picks.push_back(pick);
  }
  return res;
}

double policy_log_prob(const PolicyNet& net, const Eigen::MatrixXd& E,
                       std::span<const std::size_t> picks) {
  const std::vector<double> scores = policy_scores(net, E);
  double lp = 0.0;
  log_prob_score_grad(scores, picks, &lp);
  return lp;
}

PolicyGrad policy_log_prob_grad(const PolicyNet& net, const Eigen::MatrixXd& E,
                                std::span<const std::size_t> picks) {
  const Eigen::MatrixXd A = preactivations(net, E);  // hidden x n
  const Eigen::MatrixXd H = A.cwiseMax(0.0);
  const std::vector<double> scores = scores_from_preacts(net, A);

  const std::vector<double> gs = log_prob_score_grad(scores, picks, nullptr);
  Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(
      gs.data(), static_cast<Eigen::Index>(gs.size()));

  PolicyGrad grad;
  grad.w2 = (H * g).transpose();       // 1 x hidden
  grad.b2 = g.sum();
  // delta1 = (w2^T g^T) masked by relu'(A)
  Eigen::MatrixXd delta1 = net.w2.transpose() * g.transpose();  // hidden x n
  delta1 = delta1.cwiseProduct((A.array() > 0.0).cast<double>().matrix());
  grad.w1 = delta1 * E;                // hidden x d
  grad.b1 = delta1.rowwise().sum();
  return grad;
}

void reinforce_update(PolicyNet& net, const Eigen::MatrixXd& E,
                      std::span<const std::size_t> picks, double reward,
                      double lr, double momentum, BaselineMode mode,
                      BaselineState& state) {
  double advantage = reward;  // Eq. 9 form: no baseline, raw reward
  if (mode == BaselineMode::kRunningMean) {
    advantage = reward - state.value_or(reward);
    state.update(reward);
  }

  PolicyGrad grad = policy_log_prob_grad(net, E, picks);
  grad.w1 *= advantage;
  grad.b1 *= advantage;
  grad.w2 *= advantage;
  grad.b2 *= advantage;

  const bool finite = grad.w1.allFinite() && grad.b1.allFinite() &&
                      grad.w2.allFinite() && std::isfinite(grad.b2) &&
                      std::isfinite(advantage);
  if (!finite)
    throw NumericError("reinforce_update: non-finite gradient, step skipped");

  net.v_w1 = momentum * net.v_w1 + grad.w1;
  net.v_b1 = momentum * net.v_b1 + grad.b1;
  net.v_w2 = momentum * net.v_w2 + grad.w2;
  net.v_b2 = momentum * net.v_b2 + grad.b2;
  net.w1 += lr * net.v_w1;
  net.b1 += lr * net.v_b1;
  net.w2 += lr * net.v_w2;
  net.b2 += lr * net.v_b2;
}

std::size_t resolve_budget(const SamplerConfig& cfg, std::size_t n) {
  if (cfg.budget_count > 0) return cfg.budget_count;
  if (!(cfg.budget_ratio > 0.0 && cfg.budget_ratio <= 1.0))
    throw ConfigError("budget ratio must be in (0, 1], got " +
                      std::to_string(cfg.budget_ratio));
  const double b = std::ceil(cfg.budget_ratio * static_cast<double>(n));
  return static_cast<std::size_t>(b);
}

SamplingRun run_active_sampling(Dataset& ds,
                                std::span<const std::int64_t> candidates,
                                const SamplerConfig& cfg,
                                const RewardConfig& reward_cfg,
                                const RewardWeights& weights,
                                const RoundHook* hook) {
  if (cfg.rounds < 1) throw ConfigError("sampler rounds must be >= 1");
  std::vector<std::int64_t> universe(candidates.begin(), candidates.end());
  std::sort(universe.begin(), universe.end());
  universe.erase(std::unique(universe.begin(), universe.end()), universe.end());

  const std::size_t n = universe.size();
  const std::size_t budget = resolve_budget(cfg, n);
  if (budget > n)
    throw BudgetError("budget " + std::to_string(budget) +
                      " exceeds candidate count " + std::to_string(n));
  if (budget < static_cast<std::size_t>(cfg.rounds))
    throw ConfigError("budget " + std::to_string(budget) +
                      " smaller than round count " +
                      std::to_string(cfg.rounds));

  RewardContext ctx(ds, reward_cfg);
  PolicyNet net = PolicyNet::init(static_cast<int>(ds.feature_dim()),
                                  derive_seed({cfg.seed, 0x9017ull}));
  Prng rng(derive_seed({cfg.seed, 0x5a3cull}));
  BaselineState baseline;
  baseline.decay = cfg.baseline_decay;

  const std::size_t per_round = static_cast<std::size_t>(std::ceil(
      static_cast<double>(budget) / static_cast<double>(cfg.rounds)));

  SamplingRun run;
  std::vector<std::int64_t> unsampled = universe;

  for (int t = 0; t < cfg.rounds; ++t) {
    const std::size_t remaining = budget - run.pool.size();
    const std::size_t k = std::min(per_round, remaining);
    if (k == 0) break;

    std::vector<std::size_t> rows;
    rows.reserve(unsampled.size());
    for (std::int64_t id : unsampled) rows.push_back(ds.row_of(id));
    const Eigen::MatrixXd E =
        rows_to_eigen(ds.features(), std::span<const std::size_t>(rows));

    std::vector<std::size_t> picks;
    double log_prob = 0.0;
    if (t == 0 && cfg.warmup_random) {
      picks = rng.sample_indices(unsampled.size(), k);
      // log pi of the warm-up set under the current policy, so the update
      // below is well-defined and the episode invariant holds.
      log_prob = policy_log_prob(net, E, picks);
    } else {
      const std::vector<double> scores = policy_scores(net, E);
      const std::vector<double> probs = softmax(scores);
      SampleResult sr = sample_set(probs, k, rng);
      picks = std::move(sr.picks);
      log_prob = sr.log_prob;
    }

    Episode ep;
    ep.round = t;
    ep.log_prob = log_prob;
    for (std::size_t p : picks) ep.chosen.push_back(unsampled[p]);

    ds.reveal(ep.chosen);
    run.pool.insert(run.pool.end(), ep.chosen.begin(), ep.chosen.end());

    const std::span<const std::int64_t> reward_ids =
        (reward_cfg.scope == RewardScope::kPool)
            ? std::span<const std::int64_t>(run.pool)
            : std::span<const std::int64_t>(ep.chosen);
    ep.reward = ctx.evaluate(ds, reward_ids, universe, weights);
    ep.baseline_value = (cfg.baseline == BaselineMode::kRunningMean)
                            ? baseline.value_or(ep.reward.combined)
                            : 0.0;

    reinforce_update(net, E, picks, ep.reward.combined, cfg.lr, cfg.momentum,
                     cfg.baseline, baseline);

    // Remove the chosen ids, preserving candidate order.
    std::vector<bool> taken(unsampled.size(), false);
    for (std::size_t p : picks) taken[p] = true;
    std::vector<std::int64_t> next;
    next.reserve(unsampled.size() - picks.size());
    for (std::size_t i = 0; i < unsampled.size(); ++i)
      if (!taken[i]) next.push_back(unsampled[i]);
    unsampled = std::move(next);

    run.episodes.push_back(std::move(ep));
    if (hook) (*hook)(t, run.pool);
  }
  return run;
}

std::string episode_json_line(const Episode& e) {
  nlohmann::json j;
  j["round"] = e.round;
  j["chosen"] = e.chosen;
  j["log_prob"] = e.log_prob;
  j["reward"] = {{"r_sc", e.reward.r_sc},
                 {"r_type", e.reward.r_type},
                 {"r_spa", e.reward.r_spa},
                 {"combined", e.reward.combined}};
  j["baseline"] = e.baseline_value;
  return j.dump();
}

}  // namespace scrl
