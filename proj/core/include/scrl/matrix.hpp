#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace scrl {

// Dense row-major float32 matrix. This is the on-disk numeric unit of the
// engine: every embedding, expression and parameter matrix round-trips
// through the SCRM file format below.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool shape_consistent() const { return data.size() == rows * cols; }
};

// SCRM binary layout, little-endian throughout:
//   magic "SCRM" | version u16 = 1 | rows u64 | cols u64 | rows*cols f32
// A 0x0 matrix is a 22-byte header-only file.
void save_matrix(const Matrix& m, const std::filesystem::path& path);

// Loads and validates: FormatError on bad magic/version, TruncationError on a
// short payload, ValueError naming the first non-finite element.
Matrix load_matrix(const std::filesystem::path& path);

}  // namespace scrl
