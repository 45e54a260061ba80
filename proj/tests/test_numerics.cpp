#include <doctest.h>

#include <cmath>
#include <vector>

#include "scrl/errors.hpp"
#include "scrl/numerics.hpp"
#include "scrl/rng.hpp"

using namespace scrl;

TEST_CASE("softmax: equal scores give the uniform distribution") {
  const std::vector<double> s{3.7, 3.7, 3.7};
  const auto p = softmax(s);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax: [0, ln 3] -> [0.25, 0.75]") {
  const std::vector<double> s{0.0, std::log(3.0)};
  const auto p = softmax(s);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("softmax: huge scores do not overflow") {
  const std::vector<double> s{1000.0, 0.0};
  const auto p = softmax(s);
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax: empty input raises DimensionError") {
  CHECK_THROWS_AS(softmax(std::vector<double>{}), DimensionError);
}

TEST_CASE("softmax: sums to one, shift-invariant, order-preserving") {
  Prng rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> s(n), shifted(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = rng.uniform(-5.0, 5.0);
    const double c = rng.uniform(-100.0, 100.0);
    for (std::size_t i = 0; i < n; ++i) shifted[i] = s[i] + c;
    const auto p = softmax(s);
    const auto q = softmax(shifted);
    double total = 0.0;
    for (double v : p) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(p[i] - q[i]) < 1e-9);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (s[i] > s[j]) CHECK(p[i] > p[j]);
  }
}

TEST_CASE("cosine: fixtures") {
  const std::vector<float> a{1.0f, 0.0f};
  const std::vector<float> b{0.0f, 1.0f};
  const std::vector<float> c{1.0f, 1.0f};
  CHECK(cosine(std::span<const float>(a), std::span<const float>(a)) ==
        doctest::Approx(1.0));
  CHECK(cosine(std::span<const float>(a), std::span<const float>(b)) ==
        doctest::Approx(0.0));
  CHECK(cosine(std::span<const float>(a), std::span<const float>(c)) ==
        doctest::Approx(0.70711).epsilon(1e-5));
}

TEST_CASE("cosine: near-zero vectors return 0") {
  const std::vector<float> z{0.0f, 0.0f};
  const std::vector<float> a{1.0f, 2.0f};
  CHECK(cosine(std::span<const float>(z), std::span<const float>(a)) == 0.0);
}

TEST_CASE("cosine: length mismatch raises DimensionError") {
  const std::vector<float> a{1.0f, 2.0f};
  const std::vector<float> b{1.0f};
  CHECK_THROWS_AS(cosine(std::span<const float>(a), std::span<const float>(b)),
                  DimensionError);
}

TEST_CASE("cosine: symmetric and scale-invariant") {
  Prng rng(11);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<double> a(n), b(n), scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    const double alpha = std::exp(rng.uniform(-3.0, 3.0));
    for (std::size_t i = 0; i < n; ++i) scaled[i] = alpha * a[i];
    const double ab = cosine(std::span<const double>(a), std::span<const double>(b));
    const double ba = cosine(std::span<const double>(b), std::span<const double>(a));
    const double sb =
        cosine(std::span<const double>(scaled), std::span<const double>(b));
    CHECK(std::abs(ab - ba) < 1e-12);
    CHECK(std::abs(ab - sb) < 1e-9);
  }
}

TEST_CASE("normalized_entropy: fixtures") {
  CHECK(normalized_entropy(std::vector<double>{5.0}, 1e-8) == 0.0);
  CHECK(normalized_entropy(std::vector<double>{1.0, 1.0, 1.0, 1.0}, 1e-8) ==
        doctest::Approx(1.0).epsilon(1e-6));
  // -(0.75 ln 0.75 + 0.25 ln 0.25) / ln 2
  CHECK(normalized_entropy(std::vector<double>{3.0, 1.0}, 1e-8) ==
        doctest::Approx(0.8113).epsilon(1e-3));
}

TEST_CASE("normalized_entropy: all-zero counts raise ValueError") {
  CHECK_THROWS_AS(normalized_entropy(std::vector<double>{0.0, 0.0}, 1e-8),
                  ValueError);
  CHECK_THROWS_AS(normalized_entropy(std::vector<double>{1.0, -1.0}, 1e-8),
                  ValueError);
}

TEST_CASE("normalized_entropy: permutation-invariant, uniform maximizes") {
  Prng rng(13);
  for (int iter = 0; iter < 40; ++iter) {
    const std::size_t k = 2 + rng.below(6);
    std::vector<double> counts(k);
    for (auto& c : counts) c = 1.0 + rng.below(50);
    std::vector<double> shuffled = counts;
    rng.shuffle(shuffled);
    const double h = normalized_entropy(counts, 1e-8);
    CHECK(normalized_entropy(shuffled, 1e-8) == doctest::Approx(h).epsilon(1e-12));
    const std::vector<double> uniform(k, 7.0);
    CHECK(h <= normalized_entropy(uniform, 1e-8) + 1e-9);
  }
}

TEST_CASE("mean_pairwise_distance: fixtures include self-pairs") {
  CHECK(mean_pairwise_distance(std::vector<Point2>{{0.3, 0.4}}) == 0.0);
  CHECK(mean_pairwise_distance(std::vector<Point2>{{0.0, 0.0}, {1.0, 0.0}}) ==
        doctest::Approx(0.5));
  CHECK(mean_pairwise_distance(
            std::vector<Point2>{{0.2, 0.2}, {0.2, 0.2}, {0.2, 0.2}}) ==
        doctest::Approx(0.0));
  CHECK_THROWS_AS(mean_pairwise_distance(std::vector<Point2>{}), ValueError);
}

TEST_CASE("mean_pairwise_distance: exclude_self variant") {
  // Two points at distance 1: ordered non-self pairs average to 1.
  CHECK(mean_pairwise_distance(std::vector<Point2>{{0.0, 0.0}, {1.0, 0.0}},
                               true) == doctest::Approx(1.0));
}

TEST_CASE("mean_coverage_distance: fixtures") {
  const std::vector<Point2> all{{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  CHECK(mean_coverage_distance(all, all) == doctest::Approx(0.0));
  CHECK(mean_coverage_distance(all, std::vector<Point2>{{0.0, 0.0}}) ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(mean_coverage_distance(all, std::vector<Point2>{}),
                  ValueError);
}

TEST_CASE("mean_coverage_distance: adding a sampled point never hurts") {
  Prng rng(17);
  for (int iter = 0; iter < 40; ++iter) {
    const std::size_t n = 3 + rng.below(10);
    std::vector<Point2> all(n);
    for (auto& p : all) p = {rng.uniform01(), rng.uniform01()};
    std::vector<Point2> s{all[rng.below(n)]};
    double prev = mean_coverage_distance(all, s);
    for (int add = 0; add < 3; ++add) {
      s.push_back({rng.uniform01(), rng.uniform01()});
      const double cur = mean_coverage_distance(all, s);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}
