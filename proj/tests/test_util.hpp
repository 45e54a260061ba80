#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "scrl/matrix.hpp"
#include "scrl/rng.hpp"

namespace scrl::test {

// Unique scratch directory under the system temp root, removed on
// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("scrl_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Matrix random_matrix(std::size_t rows, std::size_t cols,
                            std::uint64_t seed, double scale = 1.0) {
  Prng rng(seed);
  Matrix m(rows, cols);
  for (auto& v : m.data) v = static_cast<float>(rng.normal() * scale);
  return m;
}

}  // namespace scrl::test
