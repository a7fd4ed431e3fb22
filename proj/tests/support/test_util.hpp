#pragma once

#include <unistd.h>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "tactile/types.hpp"

namespace tactile::testing {

inline double urand(std::mt19937& rng) { return (rng() >> 8) * (1.0 / 16777216.0); }

inline std::array<double, 3> random_unit_vector(std::mt19937& rng) {
  // Rejection sampling from the cube keeps the distribution uniform enough
  // for round-trip checks.
  while (true) {
    double x = 2.0 * urand(rng) - 1.0;
    double y = 2.0 * urand(rng) - 1.0;
    double z = 2.0 * urand(rng) - 1.0;
    double n = std::sqrt(x * x + y * y + z * z);
    if (n > 1e-3 && n <= 1.0) return {x / n, y / n, z / n};
  }
}

/// Unique scratch directory under the system temp root, removed on
/// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = (std::filesystem::temp_directory_path() /
             ("tactile_" + tag + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter++)))
                .string();
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace tactile::testing
