#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "outfit/catalog.hpp"

namespace outfit {

/// Planted-theme dataset. Each item has a theme, a type and a shade. Images
/// are procedural rasters: theme sets hue and stripe texture, type sets the
/// silhouette, shade sets brightness. Text is drawn from a theme word pool
/// and includes the shade word and a "theme-N" tag. `fine_category` holds the
/// theme label "theme-N".
struct SyntheticConfig {
  int n_themes = 4;
  int items_per_theme = 60;  // per (theme, type) pair, before splitting
  std::vector<std::string> types = {"tops", "bottoms", "shoes"};
  int outfit_len = 3;
  int n_outfits = 200;  // train outfits
  int n_valid_outfits = 100;
  int n_test_outfits = 100;
  double valid_fraction = 0.2;  // of each (theme, type) item group
  double test_fraction = 0.2;
  /// Probability that an outfit slot is filled from a different theme.
  double noise = 0.0;
  double pixel_noise = 0.03;
  int resolution = 64;
  std::uint64_t seed = 1;
};

struct SyntheticDataset {
  DatasetSplit train;
  DatasetSplit valid;
  DatasetSplit test;
};

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& config);

/// Theme index parsed from a "theme-N" fine_category, or -1.
int theme_of(const FashionItem& item);

/// Words tied to a theme in generated descriptions.
const std::vector<std::string>& theme_words(int theme);

}  // namespace outfit
