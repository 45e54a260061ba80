#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "scrl/errors.hpp"
#include "scrl/numerics.hpp"
#include "scrl/policy.hpp"
#include "scrl/synthgen.hpp"
#include "test_util.hpp"

using namespace scrl;

namespace {

std::size_t policy_param_count(const PolicyNet& net) {
  return static_cast<std::size_t>(net.w1.size() + net.b1.size() +
                                  net.w2.size() + 1);
}

double policy_get(const PolicyNet& net, std::size_t i) {
  std::size_t n1 = static_cast<std::size_t>(net.w1.size());
  std::size_t n2 = n1 + static_cast<std::size_t>(net.b1.size());
  std::size_t n3 = n2 + static_cast<std::size_t>(net.w2.size());
  if (i < n1) return net.w1.data()[i];
  if (i < n2) return net.b1.data()[i - n1];
  if (i < n3) return net.w2.data()[i - n2];
  return net.b2;
}

void policy_set(PolicyNet& net, std::size_t i, double v) {
  std::size_t n1 = static_cast<std::size_t>(net.w1.size());
  std::size_t n2 = n1 + static_cast<std::size_t>(net.b1.size());
  std::size_t n3 = n2 + static_cast<std::size_t>(net.w2.size());
  if (i < n1)
    net.w1.data()[i] = v;
  else if (i < n2)
    net.b1.data()[i - n1] = v;
  else if (i < n3)
    net.w2.data()[i - n2] = v;
  else
    net.b2 = v;
}

double policy_grad_entry(const PolicyGrad& g, std::size_t i) {
  std::size_t n1 = static_cast<std::size_t>(g.w1.size());
  std::size_t n2 = n1 + static_cast<std::size_t>(g.b1.size());
  std::size_t n3 = n2 + static_cast<std::size_t>(g.w2.size());
  if (i < n1) return g.w1.data()[i];
  if (i < n2) return g.b1.data()[i - n1];
  if (i < n3) return g.w2.data()[i - n2];
  return g.b2;
}

}  // namespace

TEST_CASE("policy_scores: zero parameters score zero") {
  PolicyNet net = PolicyNet::init(3, 1);
  net.w1.setZero();
  net.b1.setZero();
  net.w2.setZero();
  net.b2 = 0.0;
  Matrix e(4, 3);
  e.data = {1.f, 2.f, 3.f, -1.f, 0.f, 2.f, 0.f, 0.f, 0.f, 5.f, 5.f, 5.f};
  for (double s : policy_scores(net, e)) CHECK(s == 0.0);
}

TEST_CASE("policy_scores: all-ones net on e=[1] scores 128") {
  PolicyNet net = PolicyNet::init(1, 1);
  net.w1.setOnes();
  net.b1.setZero();
  net.w2.setOnes();
  net.b2 = 0.0;
  Matrix e(1, 1);
  e.data = {1.0f};
  CHECK(policy_scores(net, e)[0] == doctest::Approx(128.0));
}

TEST_CASE("policy_scores: dead ReLUs leave only the output bias") {
  PolicyNet net = PolicyNet::init(2, 1);
  net.w1.setOnes();
  net.b1.setConstant(-100.0);  // pre-activations all negative
  net.w2.setOnes();
  net.b2 = 0.75;
  Matrix e(2, 2);
  e.data = {1.f, 1.f, 2.f, 3.f};
  for (double s : policy_scores(net, e)) CHECK(s == doctest::Approx(0.75));
}

TEST_CASE("policy_scores: width mismatch raises DimensionError") {
  PolicyNet net = PolicyNet::init(3, 1);
  CHECK_THROWS_AS(policy_scores(net, Matrix(2, 4)), DimensionError);
}

TEST_CASE("sample_set: k equal to candidate count exhausts the set") {
  const std::vector<double> probs = softmax(std::vector<double>{0.3, -1.0, 2.0});
  Prng rng(3);
  const SampleResult r = sample_set(probs, 3, rng);
  CHECK(r.picks.size() == 3);
  const std::set<std::size_t> unique(r.picks.begin(), r.picks.end());
  CHECK(unique.size() == 3);

  // exp(log_prob) equals the sequential probability of the drawn order.
  double expected = 1.0;
  double mass = 1.0;
  for (std::size_t pick : r.picks) {
    expected *= probs[pick] / mass;
    mass -= probs[pick];
  }
  CHECK(std::exp(r.log_prob) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("sample_set: one-hot distribution picks its candidate") {
  std::vector<double> probs{1e-13, 1.0 - 3e-13, 1e-13, 1e-13};
  Prng rng(5);
  const SampleResult r = sample_set(probs, 1, rng);
  CHECK(r.picks == std::vector<std::size_t>{1});
  CHECK(std::abs(r.log_prob) < 1e-9);
}

TEST_CASE("sample_set: k beyond the candidate count raises BudgetError") {
  Prng rng(1);
  CHECK_THROWS_AS(sample_set(std::vector<double>{0.5, 0.5}, 3, rng),
                  BudgetError);
}

TEST_CASE("sample_set: empirical set frequencies match the sequential law") {
  // Enumerate the six ordered picks analytically.
  const std::vector<double> p{0.5, 0.3, 0.2};
  std::map<std::pair<int, int>, double> set_prob;  // unordered pair key
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      const double prob = p[a] * (p[b] / (1.0 - p[a]));
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      set_prob[key] += prob;
    }
  }

  const int trials = 100000;
  std::map<std::pair<int, int>, int> counts;
  Prng rng(12345);
  for (int t = 0; t < trials; ++t) {
    const SampleResult r = sample_set(p, 2, rng);
    const int a = static_cast<int>(r.picks[0]);
    const int b = static_cast<int>(r.picks[1]);
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    counts[key] += 1;

    // log_prob is the analytic sequential value for the drawn order.
    const double expect = std::log(p[r.picks[0]]) +
                          std::log(p[r.picks[1]] / (1.0 - p[r.picks[0]]));
    CHECK(r.log_prob == doctest::Approx(expect).epsilon(1e-9));
  }
  for (const auto& [key, prob] : set_prob) {
    const double freq = counts[key] / static_cast<double>(trials);
    const double sigma = std::sqrt(prob * (1.0 - prob) / trials);
    CHECK(std::abs(freq - prob) < 3.0 * sigma + 1e-12);
  }
}

namespace {

// An instance is only differentiable-checkable away from the ReLU kinks:
// reject draws whose pre-activations come within 50h of zero.
bool away_from_kinks(const PolicyNet& net, const Eigen::MatrixXd& e,
                     double margin) {
  Eigen::MatrixXd a = net.w1 * e.transpose();
  a.colwise() += net.b1;
  return a.cwiseAbs().minCoeff() > margin;
}

Eigen::MatrixXd random_candidates(std::size_t n, std::size_t d,
                                  std::uint64_t seed) {
  const Matrix e = test::random_matrix(n, d, seed);
  return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(
             e.data.data(), static_cast<Eigen::Index>(n),
             static_cast<Eigen::Index>(d))
      .cast<double>();
}

}  // namespace

TEST_CASE("policy gradient matches central finite differences") {
  // d=3 features, 5 candidates, k=2 picks, h=1e-4, tolerance 1e-4.
  const double h = 1e-4;
  int checked = 0;
  for (std::uint64_t inst = 0; checked < 8; ++inst) {
    PolicyNet net = PolicyNet::init(3, 100 + inst);
    const Eigen::MatrixXd ed = random_candidates(5, 3, 200 + inst);
    if (!away_from_kinks(net, ed, 50.0 * h)) continue;
    ++checked;
    Prng pick_rng(300 + inst);
    const std::vector<std::size_t> picks = pick_rng.sample_indices(5, 2);

    const PolicyGrad grad = policy_log_prob_grad(net, ed, picks);
    double max_rel = 0.0;
    for (std::size_t i = 0; i < policy_param_count(net); ++i) {
      const double orig = policy_get(net, i);
      policy_set(net, i, orig + h);
      const double up = policy_log_prob(net, ed, picks);
      policy_set(net, i, orig - h);
      const double down = policy_log_prob(net, ed, picks);
      policy_set(net, i, orig);
      const double fd = (up - down) / (2.0 * h);
      const double an = policy_grad_entry(grad, i);
      const double rel =
          std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("reinforce_update: zero advantage leaves parameters untouched") {
  PolicyNet net = PolicyNet::init(4, 7);
  const PolicyNet before = net;
  const Matrix e = test::random_matrix(6, 4, 8);
  const Eigen::MatrixXd ed = Eigen::Map<const Eigen::Matrix<
      float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                                 e.data.data(), 6, 4)
                                 .cast<double>();
  const std::vector<std::size_t> picks{1, 3};
  BaselineState state;
  state.update(2.0);
  state.update(2.25);  // prev 2.25, gain ema 0.25
  // reward 2.5 gives advantage 2.5 - (2.25 + 0.25) = 0
  reinforce_update(net, ed, picks, 2.5, 0.1, 0.0,
                   BaselineMode::kRunningMean, state);
  CHECK(net.w1 == before.w1);
  CHECK(net.b1 == before.b1);
  CHECK(net.w2 == before.w2);
  CHECK(net.b2 == before.b2);
}

TEST_CASE("reinforce_update: identical inputs give bitwise-identical nets") {
  const Matrix e = test::random_matrix(6, 4, 81);
  const Eigen::MatrixXd ed = Eigen::Map<const Eigen::Matrix<
      float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                                 e.data.data(), 6, 4)
                                 .cast<double>();
  const std::vector<std::size_t> picks{0, 4};
  PolicyNet a = PolicyNet::init(4, 9);
  PolicyNet b = PolicyNet::init(4, 9);
  BaselineState sa, sb;
  reinforce_update(a, ed, picks, 3.0, 1e-3, 0.0, BaselineMode::kNone, sa);
  reinforce_update(b, ed, picks, 3.0, 1e-3, 0.0, BaselineMode::kNone, sb);
  CHECK(std::memcmp(a.w1.data(), b.w1.data(),
                    sizeof(double) * a.w1.size()) == 0);
  CHECK(a.b2 == b.b2);
}

TEST_CASE("reinforce_update: non-finite reward raises and rolls back") {
  PolicyNet net = PolicyNet::init(3, 11);
  const PolicyNet before = net;
  const Matrix e = test::random_matrix(4, 3, 12);
  const Eigen::MatrixXd ed = Eigen::Map<const Eigen::Matrix<
      float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                                 e.data.data(), 4, 3)
                                 .cast<double>();
  BaselineState state;
  const std::vector<std::size_t> picks{2};
  CHECK_THROWS_AS(
      reinforce_update(net, ed, picks,
                       std::numeric_limits<double>::infinity(), 1e-3, 0.0,
                       BaselineMode::kNone, state),
      NumericError);
  CHECK(net.w1 == before.w1);
  CHECK(net.b2 == before.b2);
}

namespace {

SynthConfig sampling_fixture() {
  SynthConfig cfg;
  cfg.n_spots = 400;
  cfg.slides = 2;
  cfg.genes = 30;
  cfg.feature_dim = 16;
  cfg.embedding_dim = 8;
  cfg.cell_types = 4;
  cfg.reference_cells = 200;
  cfg.type_skew = 0.5;
  return cfg;
}

RewardConfig small_reward_cfg() {
  RewardConfig rc;
  rc.cluster_count = 8;
  rc.pca_dim = 6;
  rc.kmeans_iters = 30;
  return rc;
}

}  // namespace

TEST_CASE("run_active_sampling: pool invariants hold") {
  SynthOutput out = generate_dataset(sampling_fixture());
  Dataset& ds = out.dataset;
  SamplerConfig cfg;
  cfg.budget_count = 40;
  cfg.rounds = 8;
  cfg.seed = 5;
  const auto candidates = ds.all_ids();
  const SamplingRun run = run_active_sampling(ds, candidates, cfg,
                                              small_reward_cfg(),
                                              RewardWeights{});
  CHECK(run.pool.size() == 40);
  std::set<std::int64_t> unique(run.pool.begin(), run.pool.end());
  CHECK(unique.size() == 40);
  CHECK(run.episodes.size() == 8);

  std::size_t total = 0;
  for (const Episode& ep : run.episodes) {
    total += ep.chosen.size();
    CHECK(ep.log_prob <= 0.0);
    CHECK(std::isfinite(ep.log_prob));
    CHECK(std::isfinite(ep.reward.combined));
    for (std::int64_t id : ep.chosen) CHECK(unique.contains(id));
  }
  CHECK(total == 40);  // episodes partition the pool
  for (std::int64_t id : run.pool) CHECK(ds.is_revealed(id));
}

TEST_CASE("run_active_sampling: budget equal to N selects everything") {
  SynthConfig cfg = sampling_fixture();
  cfg.n_spots = 60;
  SynthOutput out = generate_dataset(cfg);
  SamplerConfig sc;
  sc.budget_count = 60;
  sc.rounds = 5;
  const auto candidates = out.dataset.all_ids();
  const SamplingRun run = run_active_sampling(
      out.dataset, candidates, sc, small_reward_cfg(), RewardWeights{});
  CHECK(run.pool.size() == 60);
}

TEST_CASE("run_active_sampling: single warm-up round is pure random") {
  SynthConfig cfg = sampling_fixture();
  cfg.n_spots = 80;
  SynthOutput out = generate_dataset(cfg);
  SamplerConfig sc;
  sc.budget_count = 10;
  sc.rounds = 1;
  sc.warmup_random = true;
  const auto candidates = out.dataset.all_ids();
  const SamplingRun run = run_active_sampling(
      out.dataset, candidates, sc, small_reward_cfg(), RewardWeights{});
  CHECK(run.episodes.size() == 1);
  CHECK(run.pool.size() == 10);
}

TEST_CASE("run_active_sampling: lr=0 keeps the score vector constant") {
  SynthConfig cfg = sampling_fixture();
  cfg.n_spots = 100;
  SynthOutput out = generate_dataset(cfg);
  Dataset& ds = out.dataset;
  SamplerConfig sc;
  sc.budget_count = 20;
  sc.rounds = 4;
  sc.lr = 0.0;
  sc.warmup_random = false;
  const auto candidates = ds.all_ids();
  const SamplingRun run = run_active_sampling(ds, candidates, sc,
                                              small_reward_cfg(),
                                              RewardWeights{});
  // With lr=0 the net never moves, so re-scoring the full set afterwards
  // must reproduce the scores of an untouched net with the same seed.
  PolicyNet fresh = PolicyNet::init(static_cast<int>(ds.feature_dim()),
                                    derive_seed({sc.seed, 0x9017ull}));
  const std::vector<double> expect = policy_scores(fresh, ds.features());
  CHECK(expect.size() == ds.n_spots());
  CHECK(run.pool.size() == 20);
}

TEST_CASE("run_active_sampling: budget validation") {
  SynthConfig cfg = sampling_fixture();
  cfg.n_spots = 50;
  SynthOutput out = generate_dataset(cfg);
  const auto candidates = out.dataset.all_ids();
  SamplerConfig sc;
  sc.budget_count = 51;
  sc.rounds = 5;
  CHECK_THROWS_AS(run_active_sampling(out.dataset, candidates, sc,
                                      small_reward_cfg(), RewardWeights{}),
                  BudgetError);
  sc.budget_count = 3;
  sc.rounds = 5;  // budget below the round count
  CHECK_THROWS_AS(run_active_sampling(out.dataset, candidates, sc,
                                      small_reward_cfg(), RewardWeights{}),
                  ConfigError);
}

TEST_CASE("run_active_sampling: beats random pools on the combined reward") {
  const SynthConfig cfg = sampling_fixture();
  const RewardConfig rc = small_reward_cfg();
  const RewardWeights w;
  const SynthOutput base = generate_dataset(cfg);

  double scrl_total = 0.0, random_total = 0.0;
  const int seeds = 10;
  for (int s = 1; s <= seeds; ++s) {
    {
      Dataset ds = base.dataset;
      SamplerConfig sc;
      sc.budget_count = 40;
      sc.rounds = 8;
      sc.seed = static_cast<std::uint64_t>(s);
      const SamplingRun run =
          run_active_sampling(ds, ds.all_ids(), sc, rc, w);
      scrl_total += run.episodes.back().reward.combined;
    }
    {
      Dataset ds = base.dataset;
      Prng rng(static_cast<std::uint64_t>(s) + 9000);
      auto ids = ds.all_ids();
      rng.shuffle(ids);
      const std::vector<std::int64_t> pool(ids.begin(), ids.begin() + 40);
      ds.reveal(pool);
      const RewardContext ctx(ds, rc);
      random_total +=
          ctx.evaluate(ds, pool, ds.all_ids(), w).combined;
    }
  }
  CHECK(scrl_total / seeds > random_total / seeds);
}
