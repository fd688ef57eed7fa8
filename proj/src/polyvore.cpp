#include "outfit/polyvore.hpp"

#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "outfit/error.hpp"

namespace outfit {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kDatasetFormat, "missing file " + path.string(), {path.string()});
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kDatasetFormat, "cannot parse " + path.string() + ": " + e.what(), {path.string()});
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string(), {path.string()});
  out << j.dump(1) << '\n';
}

std::string as_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

PolyvoreConvertStats convert_polyvore(const std::filesystem::path& in, const std::filesystem::path& out,
                                      const PolyvoreConvertOptions& options) {
  const json meta = read_json(in / "polyvore_item_metadata.json");
  if (!meta.is_object()) throw Error(ErrorKind::kDatasetFormat, "item metadata must be an object keyed by item id");
  std::filesystem::create_directories(out);

  PolyvoreConvertStats stats;
  std::set<std::string> used;
  std::set<std::string> types;
  for (const char* split : {"train", "valid", "test"}) {
    const json sets = read_json(in / options.variant / (std::string(split) + ".json"));
    json outfits = json::array();
    for (const auto& s : sets) {
      json ids = json::array();
      for (const auto& it : s.at("items")) {
        const std::string id = as_string(it.at("item_id"));
        if (!meta.contains(id)) throw Error(ErrorKind::kIntegrity, "outfit references unknown item " + id, {id});
        ids.push_back(id);
        used.insert(id);
      }
      outfits.push_back({{"outfit_id", as_string(s.at("set_id"))}, {"items", ids}});
    }
    const std::string name = split;
    (name == "train" ? stats.outfits_train : name == "valid" ? stats.outfits_valid : stats.outfits_test) = outfits.size();
    write_json(out / ("outfits_" + name + ".json"), outfits);
  }
  json items = json::array();
  for (const auto& id : used) {
    const json& m = meta.at(id);
    const std::string type = m.value("semantic_category", "");
    if (type.empty()) throw Error(ErrorKind::kDatasetFormat, "item " + id + " has no semantic_category", {id});
    types.insert(type);
    std::string title = m.value("title", "");
    if (title.empty()) title = m.value("url_name", "");
    items.push_back({{"item_id", id},
                     {"title", title},
                     {"description", m.value("description", "")},
                     {"semantic_type", type},
                     {"fine_category", m.contains("category_id") ? as_string(m.at("category_id")) : ""},
                     {"image", "images/" + id + ".jpg"}});
  }
  write_json(out / "items.json", items);
  write_json(out / "types.json", json(std::vector<std::string>(types.begin(), types.end())));
  if (options.link_images && std::filesystem::exists(in / "images") && !std::filesystem::exists(out / "images")) {
    std::filesystem::create_directory_symlink(std::filesystem::absolute(in / "images"), out / "images");
  }
  stats.items = used.size();
  stats.types = types.size();
  return stats;
}

}  // namespace outfit
