#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "outfit/image.hpp"

namespace outfit {

enum class SplitName { kTrain, kValid, kTest };

std::string_view to_string(SplitName split);
SplitName parse_split(std::string_view name);

struct FashionItem {
  std::string item_id;
  std::string title;
  std::string description;
  std::string semantic_type;
  std::string fine_category;
  std::string image_path;  // relative to the dataset root
  Image image;

  /// Text fed to the text encoder: title, a space, then the description.
  std::string text() const { return title + " " + description; }
};

struct Outfit {
  std::string outfit_id;
  std::vector<std::string> item_ids;
  SplitName split = SplitName::kTrain;
};

struct PairSample {
  std::string item_a;
  std::string item_b;
  int label = 1;  // 1 compatible, 0 incompatible

  bool operator==(const PairSample&) const = default;
};

/// Items keyed by id, with a per-type index. Insertion order is preserved.
class ItemTable {
 public:
  void add(FashionItem item);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const FashionItem& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<FashionItem>& items() const { return items_; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  const FashionItem* find(std::string_view id) const;
  const FashionItem& at(std::string_view id) const;  // throws kNotFound
  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Indices of all items of a type, in insertion order.
  const std::vector<std::size_t>& of_type(std::string_view type) const;

 private:
  std::vector<FashionItem> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_type_;
};

struct DatasetSplit {
  SplitName split = SplitName::kTrain;
  ItemTable items;
  std::vector<Outfit> outfits;
  std::vector<std::string> type_vocabulary;
  bool disjoint = false;
};

struct LoadOptions {
  int resolution = 64;
  /// Declared type vocabulary; falls back to `types.json`, then to the set of
  /// types present in `items.json`.
  std::optional<std::vector<std::string>> vocabulary;
  bool load_images = true;
};

/// Reads `items.json`, `outfits_{split}.json` and the images under `root`.
DatasetSplit load_dataset(const std::filesystem::path& root, SplitName split, const LoadOptions& options = {});

/// Writes splits in the ingestion layout (images as PNG under images/).
void write_dataset(const std::filesystem::path& root, std::span<const DatasetSplit> splits);

/// All unordered co-occurring pairs, deduplicated, in first-seen order.
std::vector<PairSample> generate_positive_pairs(std::span<const Outfit> outfits);

/// One type-aware negative per positive: keeps item_a and replaces item_b by a
/// different item of the same type that never co-occurs with item_a.
std::vector<PairSample> sample_negative_pairs(std::span<const PairSample> positives, const ItemTable& items,
                                              std::uint64_t seed);

/// Checks the Outfit invariants against a table; throws kIntegrity.
void validate_outfits(std::span<const Outfit> outfits, const ItemTable& items);

}  // namespace outfit
