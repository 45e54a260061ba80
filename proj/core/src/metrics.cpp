#include "scrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scrl/errors.hpp"
#include "scrl/rng.hpp"

namespace scrl {

namespace {

double row_pearson(std::span<const float> y, std::span<const float> h) {
  const std::size_t g = y.size();
  if (g < 2) return 0.0;
  double my = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    my += y[i];
    mh += h[i];
  }
  my /= static_cast<double>(g);
  mh /= static_cast<double>(g);
  double dot = 0.0, ny = 0.0, nh = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double a = static_cast<double>(y[i]) - my;
    const double b = static_cast<double>(h[i]) - mh;
    dot += a * b;
    ny += a * a;
    nh += b * b;
  }
  ny = std::sqrt(ny);
  nh = std::sqrt(nh);
  if (ny < 1e-12 || nh < 1e-12) return 0.0;
  return std::clamp(dot / (ny * nh), -1.0, 1.0);
}

}  // namespace

MetricTriple metrics(const Matrix& truth, const Matrix& predictions) {
  if (truth.rows != predictions.rows || truth.cols != predictions.cols)
    throw DimensionError("metrics: shape mismatch");
  if (truth.rows == 0) throw DimensionError("metrics: empty input");

  MetricTriple t;
  double se = 0.0, ae = 0.0, pcc = 0.0;
  for (std::size_t i = 0; i < truth.rows; ++i) {
    const auto y = truth.row(i);
    const auto h = predictions.row(i);
    for (std::size_t j = 0; j < truth.cols; ++j) {
      const double d = static_cast<double>(h[j]) - static_cast<double>(y[j]);
      se += d * d;
      ae += std::abs(d);
    }
    pcc += row_pearson(y, h);
  }
  const double entries =
      static_cast<double>(truth.rows) * static_cast<double>(truth.cols);
  t.mse = se / entries;
  t.mae = ae / entries;
  t.pcc = pcc / static_cast<double>(truth.rows);
  return t;
}

std::map<std::int64_t, int> crossval_split(
    std::span<const std::int64_t> sample_ids, int folds, std::uint64_t seed) {
  if (folds < 1) throw ConfigError("crossval_split: folds must be >= 1");
  std::vector<std::int64_t> distinct(sample_ids.begin(), sample_ids.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < static_cast<std::size_t>(folds))
    throw ConfigError("crossval_split: " + std::to_string(distinct.size()) +
                      " samples cannot fill " + std::to_string(folds) +
                      " folds");

  Prng rng(seed);
  rng.shuffle(distinct);

  std::map<std::int64_t, int> assignment;
  const std::size_t n = distinct.size();
  const std::size_t base = n / static_cast<std::size_t>(folds);
  const std::size_t extra = n % static_cast<std::size_t>(folds);
  std::size_t pos = 0;
  for (int f = 0; f < folds; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) assignment[distinct[pos++]] = f;
  }
  return assignment;
}

}  // namespace scrl
