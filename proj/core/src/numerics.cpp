#include "scrl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scrl/errors.hpp"

namespace scrl {

std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) throw DimensionError("softmax: empty score vector");
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size())
    throw DimensionError("cosine: length mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) {
  return cosine_impl(a, b);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  return cosine_impl(a, b);
}

double normalized_entropy(std::span<const double> counts, double eps) {
  double total = 0.0;
  std::size_t observed = 0;
  for (double c : counts) {
    if (c < 0.0) throw ValueError("normalized_entropy: negative count");
    if (c > 0.0) {
      total += c;
      ++observed;
    }
  }
  if (observed == 0) throw ValueError("normalized_entropy: all counts zero");
  if (observed == 1) return 0.0;
  double h = 0.0;
  for (double c : counts) {
    if (c <= 0.0) continue;
    const double p = c / total;
    h -= p * std::log(p + eps);
  }
  return h / std::log(static_cast<double>(observed) + eps);
}

double mean_pairwise_distance(std::span<const Point2> pts, bool exclude_self) {
  if (pts.empty()) throw ValueError("mean_pairwise_distance: empty point set");
  const std::size_t n = pts.size();
  if (exclude_self && n == 1) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sum += std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
    }
  }
  sum *= 2.0;  // ordered pairs
  const double denom = exclude_self
                           ? static_cast<double>(n) * static_cast<double>(n - 1)
                           : static_cast<double>(n) * static_cast<double>(n);
  return sum / denom;
}

double mean_coverage_distance(std::span<const Point2> all,
                              std::span<const Point2> sampled) {
  if (sampled.empty()) throw ValueError("mean_coverage_distance: empty sample");
  if (all.empty()) return 0.0;
  double sum = 0.0;
  for (const Point2& p : all) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& s : sampled) {
      best = std::min(best, std::hypot(p.x - s.x, p.y - s.y));
    }
    sum += best;
  }
  return sum / static_cast<double>(all.size());
}

}  // namespace scrl
