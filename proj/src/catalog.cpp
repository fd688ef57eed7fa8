#include "outfit/catalog.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "outfit/error.hpp"
#include "outfit/rng.hpp"

namespace outfit {

using nlohmann::json;

std::string_view to_string(SplitName split) {
  switch (split) {
    case SplitName::kTrain: return "train";
    case SplitName::kValid: return "valid";
    case SplitName::kTest: return "test";
  }
  return "train";
}

SplitName parse_split(std::string_view name) {
  if (name == "train") return SplitName::kTrain;
  if (name == "valid") return SplitName::kValid;
  if (name == "test") return SplitName::kTest;
  throw Error(ErrorKind::kConfig, "unknown split '" + std::string(name) + "'", {std::string(name)});
}

void ItemTable::add(FashionItem item) {
  if (index_.contains(item.item_id)) {
    throw Error(ErrorKind::kIntegrity, "duplicate item_id " + item.item_id, {item.item_id});
  }
  const std::size_t i = items_.size();
  index_.emplace(item.item_id, i);
  by_type_[item.semantic_type].push_back(i);
  items_.push_back(std::move(item));
}

const FashionItem* ItemTable::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &items_[it->second];
}

const FashionItem& ItemTable::at(std::string_view id) const {
  if (const auto* item = find(id)) return *item;
  throw Error(ErrorKind::kNotFound, "unknown item_id " + std::string(id), {std::string(id)});
}

std::optional<std::size_t> ItemTable::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::size_t>& ItemTable::of_type(std::string_view type) const {
  static const std::vector<std::size_t> kEmpty;
  auto it = by_type_.find(std::string(type));
  return it == by_type_.end() ? kEmpty : it->second;
}

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kDatasetFormat, "missing dataset file " + path.string(), {path.filename().string()});
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kDatasetFormat, "malformed JSON in " + path.string() + ": " + e.what(),
                {path.filename().string()});
  }
}

std::string string_field(const json& obj, const char* key, const std::filesystem::path& file, bool required = true) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (!required) return {};
    throw Error(ErrorKind::kDatasetFormat, file.filename().string() + ": entry missing \"" + key + "\"",
                {file.filename().string()});
  }
  if (!it->is_string()) {
    throw Error(ErrorKind::kDatasetFormat, file.filename().string() + ": \"" + key + "\" must be a string",
                {file.filename().string()});
  }
  return it->get<std::string>();
}

std::vector<Outfit> read_outfits(const std::filesystem::path& path, SplitName split) {
  const json doc = read_json(path);
  if (!doc.is_array()) throw Error(ErrorKind::kDatasetFormat, path.string() + " must hold an array", {path.filename().string()});
  std::vector<Outfit> out;
  for (const auto& entry : doc) {
    Outfit o;
    o.outfit_id = string_field(entry, "outfit_id", path);
    o.split = split;
    auto items = entry.find("items");
    if (items == entry.end() || !items->is_array()) {
      throw Error(ErrorKind::kDatasetFormat, path.filename().string() + ": outfit " + o.outfit_id + " has no items array",
                  {path.filename().string()});
    }
    for (const auto& id : *items) o.item_ids.push_back(id.get<std::string>());
    out.push_back(std::move(o));
  }
  return out;
}

std::filesystem::path outfits_file(const std::filesystem::path& root, SplitName split) {
  return root / ("outfits_" + std::string(to_string(split)) + ".json");
}

}  // namespace

void validate_outfits(std::span<const Outfit> outfits, const ItemTable& items) {
  std::set<std::string> missing;
  for (const auto& o : outfits) {
    if (o.item_ids.size() < 2) {
      throw Error(ErrorKind::kIntegrity, "outfit " + o.outfit_id + " has fewer than 2 items", {o.outfit_id});
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : o.item_ids) {
      if (!seen.insert(id).second) {
        throw Error(ErrorKind::kIntegrity, "outfit " + o.outfit_id + " repeats item " + id, {o.outfit_id, id});
      }
      if (!items.find(id)) missing.insert(id);
    }
  }
  if (!missing.empty()) {
    std::vector<std::string> ids(missing.begin(), missing.end());
    std::string msg = "outfits reference unknown item ids:";
    for (const auto& id : ids) msg += " " + id;
    throw Error(ErrorKind::kIntegrity, msg, ids);
  }
}

DatasetSplit load_dataset(const std::filesystem::path& root, SplitName split, const LoadOptions& options) {
  const auto items_path = root / "items.json";
  const json items_doc = read_json(items_path);
  if (!items_doc.is_array()) throw Error(ErrorKind::kDatasetFormat, "items.json must hold an array", {"items.json"});

  // Outfits of every split present, for membership and disjointness.
  std::map<SplitName, std::vector<Outfit>> all_outfits;
  for (SplitName s : {SplitName::kTrain, SplitName::kValid, SplitName::kTest}) {
    const auto p = outfits_file(root, s);
    if (s == split || std::filesystem::exists(p)) all_outfits[s] = read_outfits(p, s);
  }

  std::vector<std::string> vocabulary;
  if (options.vocabulary) {
    vocabulary = *options.vocabulary;
  } else if (std::filesystem::exists(root / "types.json")) {
    vocabulary = read_json(root / "types.json").get<std::vector<std::string>>();
  } else {
    std::set<std::string> types;
    for (const auto& e : items_doc) types.insert(string_field(e, "semantic_type", items_path));
    vocabulary.assign(types.begin(), types.end());
  }
  const std::set<std::string> vocab_set(vocabulary.begin(), vocabulary.end());

  // Split membership: explicit "split" field, else referenced by that split's outfits.
  std::map<SplitName, std::unordered_set<std::string>> referenced;
  for (const auto& [s, outfits] : all_outfits) {
    for (const auto& o : outfits) referenced[s].insert(o.item_ids.begin(), o.item_ids.end());
  }
  std::map<SplitName, std::unordered_set<std::string>> members;
  std::unordered_set<std::string> all_ids;
  std::vector<const json*> selected;
  for (const auto& e : items_doc) {
    const std::string id = string_field(e, "item_id", items_path);
    if (!all_ids.insert(id).second) throw Error(ErrorKind::kIntegrity, "duplicate item_id " + id, {id});
    const std::string type = string_field(e, "semantic_type", items_path);
    if (!vocab_set.contains(type)) {
      throw Error(ErrorKind::kVocabulary, "item " + id + " has semantic_type '" + type + "' outside the vocabulary",
                  {type, id});
    }
    const std::string declared = string_field(e, "split", items_path, false);
    if (!declared.empty()) {
      members[parse_split(declared)].insert(id);
    } else {
      for (const auto& [s, refs] : referenced) {
        if (refs.contains(id)) members[s].insert(id);
      }
    }
    if (members[split].contains(id)) selected.push_back(&e);
  }

  // Integrity: every referenced id must exist and belong to this split.
  std::set<std::string> offending;
  for (const auto& o : all_outfits[split]) {
    for (const auto& id : o.item_ids) {
      if (!members[split].contains(id)) offending.insert(id);
    }
  }
  if (!offending.empty()) {
    std::vector<std::string> ids(offending.begin(), offending.end());
    std::string msg = "outfits_" + std::string(to_string(split)) + ".json references unknown item ids:";
    for (const auto& id : ids) msg += " " + id;
    throw Error(ErrorKind::kIntegrity, msg, ids);
  }

  std::vector<FashionItem> items(selected.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < selected.size(); ++i) {
    try {
      const json& e = *selected[i];
      FashionItem& item = items[i];
      item.item_id = string_field(e, "item_id", items_path);
      item.title = string_field(e, "title", items_path, false);
      item.description = string_field(e, "description", items_path, false);
      item.semantic_type = string_field(e, "semantic_type", items_path);
      item.fine_category = string_field(e, "fine_category", items_path, false);
      item.image_path = string_field(e, "image", items_path);
      if (options.load_images) {
        const auto img_path = root / item.image_path;
        if (!std::filesystem::exists(img_path)) {
          throw Error(ErrorKind::kDatasetFormat, "missing image file " + img_path.string(), {item.image_path});
        }
        item.image = resize_bilinear(read_image(img_path), options.resolution, options.resolution);
      }
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  DatasetSplit out;
  out.split = split;
  out.type_vocabulary = vocabulary;
  for (auto& item : items) out.items.add(std::move(item));
  out.outfits = std::move(all_outfits[split]);
  validate_outfits(out.outfits, out.items);

  out.disjoint = true;
  for (auto a = members.begin(); a != members.end() && out.disjoint; ++a) {
    for (auto b = std::next(a); b != members.end() && out.disjoint; ++b) {
      for (const auto& id : a->second) {
        if (b->second.contains(id)) {
          out.disjoint = false;
          break;
        }
      }
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& root, std::span<const DatasetSplit> splits) {
  std::filesystem::create_directories(root / "images");
  json items = json::array();
  std::vector<std::string> vocabulary;
  for (const auto& split : splits) {
    if (vocabulary.empty()) vocabulary = split.type_vocabulary;
    json outfits = json::array();
    for (const auto& o : split.outfits) outfits.push_back({{"outfit_id", o.outfit_id}, {"items", o.item_ids}});
    for (const auto& item : split.items) {
      const std::string rel = item.image_path.empty() ? "images/" + item.item_id + ".png" : item.image_path;
      items.push_back({{"item_id", item.item_id},
                       {"title", item.title},
                       {"description", item.description},
                       {"semantic_type", item.semantic_type},
                       {"fine_category", item.fine_category},
                       {"image", rel},
                       {"split", std::string(to_string(split.split))}});
      write_png(root / rel, item.image);
    }
    std::ofstream(outfits_file(root, split.split)) << outfits.dump(1) << "\n";
  }
  std::ofstream(root / "items.json") << items.dump(1) << "\n";
  std::ofstream(root / "types.json") << json(vocabulary).dump() << "\n";
}

namespace {

std::string pair_key(const std::string& a, const std::string& b) {
  return a < b ? a + '\x1f' + b : b + '\x1f' + a;
}

}  // namespace

std::vector<PairSample> generate_positive_pairs(std::span<const Outfit> outfits) {
  std::vector<PairSample> out;
  std::unordered_set<std::string> seen;
  for (const auto& o : outfits) {
    for (std::size_t i = 0; i < o.item_ids.size(); ++i) {
      for (std::size_t j = i + 1; j < o.item_ids.size(); ++j) {
        if (seen.insert(pair_key(o.item_ids[i], o.item_ids[j])).second) {
          out.push_back({o.item_ids[i], o.item_ids[j], 1});
        }
      }
    }
  }
  return out;
}

std::vector<PairSample> sample_negative_pairs(std::span<const PairSample> positives, const ItemTable& items,
                                              std::uint64_t seed) {
  constexpr int kMaxAttempts = 100;
  std::unordered_set<std::string> cooccur;
  for (const auto& p : positives) cooccur.insert(pair_key(p.item_a, p.item_b));

  Rng rng(seed);
  std::vector<PairSample> out;
  out.reserve(positives.size());
  for (const auto& p : positives) {
    const FashionItem& b = items.at(p.item_b);
    items.at(p.item_a);
    const auto& pool = items.of_type(b.semantic_type);
    auto eligible = [&](std::size_t idx) {
      const std::string& id = items[idx].item_id;
      return id != p.item_b && id != p.item_a && !cooccur.contains(pair_key(p.item_a, id));
    };
    std::optional<std::size_t> chosen;
    for (int attempt = 0; attempt < kMaxAttempts && !chosen; ++attempt) {
      const std::size_t idx = pool[rng.index(pool.size())];
      if (eligible(idx)) chosen = idx;
    }
    if (!chosen) {
      std::vector<std::size_t> candidates;
      for (std::size_t idx : pool) {
        if (eligible(idx)) candidates.push_back(idx);
      }
      if (candidates.empty()) {
        throw Error(ErrorKind::kSamplingExhausted,
                    "no eligible negative of type '" + b.semantic_type + "' for item " + p.item_a,
                    {b.semantic_type, p.item_a});
      }
      chosen = candidates[rng.index(candidates.size())];
    }
    out.push_back({p.item_a, items[*chosen].item_id, 0});
  }
  return out;
}

}  // namespace outfit
