#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "outfit/catalog.hpp"
#include "outfit/model.hpp"
#include "outfit/rng.hpp"
#include "outfit/synthetic.hpp"
#include "outfit/training.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("outfit-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline outfit::SyntheticConfig small_synthetic(std::uint64_t seed = 1) {
  outfit::SyntheticConfig c;
  c.items_per_theme = 10;
  c.n_outfits = 40;
  c.n_valid_outfits = 12;
  c.n_test_outfits = 12;
  c.resolution = 16;
  c.seed = seed;
  return c;
}

/// Tiny architecture matching small_synthetic()'s resolution.
inline outfit::ModelConfig small_model_config() {
  outfit::ModelConfig c = outfit::tiny_model_config();
  c.image.resolution = 16;
  return c;
}

inline outfit::Vector random_vector(outfit::Rng& rng, Eigen::Index n, double scale = 1.0) {
  outfit::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

inline outfit::Batch random_batch(outfit::Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  outfit::Batch b(rows, cols);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = scale * rng.normal();
  return b;
}

}  // namespace testing
