#pragma once

#include <filesystem>
#include <string>

namespace outfit {

struct PolyvoreConvertOptions {
  /// "nondisjoint" or "disjoint" split directory.
  std::string variant = "nondisjoint";
  /// Link the source images/ directory instead of leaving paths dangling.
  bool link_images = true;
};

struct PolyvoreConvertStats {
  std::size_t items = 0;
  std::size_t outfits_train = 0;
  std::size_t outfits_valid = 0;
  std::size_t outfits_test = 0;
  std::size_t types = 0;
};

/// Reads polyvore_item_metadata.json and {variant}/{train,valid,test}.json
/// (outfits as {"set_id", "items": [{"item_id", ...}]}) from `in` and writes
/// items.json, types.json and outfits_{split}.json to `out`. Images are
/// expected at images/{item_id}.jpg.
PolyvoreConvertStats convert_polyvore(const std::filesystem::path& in, const std::filesystem::path& out,
                                      const PolyvoreConvertOptions& options = {});

}  // namespace outfit
