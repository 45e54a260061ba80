#include "scrl/matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "scrl/errors.hpp"

namespace scrl {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'R', 'M'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "SCRM I/O assumes a little-endian host");

template <typename T>
void write_le(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_le(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return in.gcount() == static_cast<std::streamsize>(sizeof(T));
}

}  // namespace

void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  if (!m.shape_consistent())
    throw ValueError("save_matrix: data length does not match rows*cols");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_matrix: cannot open " + path.string());
  out.write(kMagic, 4);
  write_le(out, kVersion);
  write_le(out, static_cast<std::uint64_t>(m.rows));
  write_le(out, static_cast<std::uint64_t>(m.cols));
  if (!m.data.empty()) {
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(float)));
  }
  out.flush();
  if (!out) throw IoError("save_matrix: write failed for " + path.string());
}

Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_matrix: cannot open " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("load_matrix: bad magic in " + path.string());
  std::uint16_t version = 0;
  if (!read_le(in, version))
    throw TruncationError("load_matrix: truncated header in " + path.string());
  if (version != kVersion)
    throw FormatError("load_matrix: unsupported version " +
                      std::to_string(version) + " in " + path.string());

  std::uint64_t rows = 0, cols = 0;
  if (!read_le(in, rows) || !read_le(in, cols))
    throw TruncationError("load_matrix: truncated header in " + path.string());

  Matrix m;
  m.rows = static_cast<std::size_t>(rows);
  m.cols = static_cast<std::size_t>(cols);
  const std::uint64_t count = rows * cols;
  m.data.resize(static_cast<std::size_t>(count));
  if (count > 0) {
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
      throw TruncationError("load_matrix: payload shorter than " +
                            std::to_string(count) + " floats in " +
                            path.string());
  }
  // Reject trailing bytes so corrupt writes cannot pass silently.
  char extra;
  in.read(&extra, 1);
  if (in.gcount() != 0)
    throw FormatError("load_matrix: trailing bytes after payload in " +
                      path.string());

  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!std::isfinite(m.data[i]))
      throw ValueError("load_matrix: non-finite value at flat index " +
                       std::to_string(i) + " in " + path.string());
  }
  return m;
}

}  // namespace scrl
