#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "scrl/matrix.hpp"

namespace scrl {

struct MetricTriple {
  double mse = 0.0;
  double mae = 0.0;
  double pcc = 0.0;
};

// MSE/MAE over all entries; PCC per spot across genes, averaged, with
// constant vectors contributing 0. Shape mismatch -> DimensionError.
MetricTriple metrics(const Matrix& truth, const Matrix& predictions);

// Balanced partition of the distinct sample ids into `folds` groups whose
// sizes differ by at most one, seed-deterministic. Fewer distinct ids than
// folds -> ConfigError.
std::map<std::int64_t, int> crossval_split(
    std::span<const std::int64_t> sample_ids, int folds, std::uint64_t seed);

}  // namespace scrl
