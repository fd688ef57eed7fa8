#include "outfit/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

#include "outfit/error.hpp"
#include "outfit/rng.hpp"

namespace outfit {
namespace {

const std::vector<std::vector<std::string>> kThemePools = {
    {"red", "crimson", "floral", "flower", "summer", "sundress", "breezy", "beach", "tropical", "linen"},
    {"black", "leather", "boots", "biker", "edgy", "studded", "rock", "grunge", "metal", "moto"},
    {"navy", "tailored", "office", "formal", "classic", "pinstripe", "business", "crisp", "structured", "blazer"},
    {"neon", "athletic", "mesh", "running", "gym", "sporty", "active", "training", "stretch", "performance"},
    {"bohemian", "fringe", "embroidered", "earthy", "festival", "paisley", "suede", "tassel", "woven", "free"},
    {"wool", "cozy", "knit", "snow", "winter", "cashmere", "layered", "fleece", "warm", "chunky"},
    {"sequin", "glitter", "gold", "evening", "cocktail", "satin", "sparkle", "velvet", "party", "luxe"},
    {"oversized", "graphic", "urban", "street", "hoodie", "denim", "skate", "logo", "cargo", "baggy"},
};

const std::array<const char*, 4> kShadeWords = {"pale", "light", "deep", "dark"};
const std::array<double, 4> kShadeValue = {0.95, 0.8, 0.6, 0.42};

std::vector<std::string> type_nouns(const std::string& type) {
  if (type == "tops") return {"top", "blouse", "tee", "shirt"};
  if (type == "bottoms") return {"skirt", "pants", "shorts", "jeans"};
  if (type == "shoes") return {"shoes", "sandals", "sneakers", "heels"};
  if (type == "bags") return {"bag", "tote", "clutch", "purse"};
  if (type == "accessories") return {"necklace", "scarf", "hat", "belt"};
  return {type};
}

struct Rgb {
  double r, g, b;
};

Rgb hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  Rgb rgb{0, 0, 0};
  if (hp < 1) rgb = {c, x, 0};
  else if (hp < 2) rgb = {x, c, 0};
  else if (hp < 3) rgb = {0, c, x};
  else if (hp < 4) rgb = {0, x, c};
  else if (hp < 5) rgb = {x, 0, c};
  else rgb = {c, 0, x};
  const double m = v - c;
  return {rgb.r + m, rgb.g + m, rgb.b + m};
}

// Silhouette in normalized coordinates.
bool inside(int shape, double u, double v) {
  auto in_rect = [&](double x0, double x1, double y0, double y1) { return u >= x0 && u < x1 && v >= y0 && v < y1; };
  auto in_ellipse = [&](double cx, double cy, double rx, double ry) {
    const double dx = (u - cx) / rx;
    const double dy = (v - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
  };
  switch (shape % 5) {
    case 0: return in_rect(0.25, 0.75, 0.22, 0.75) || in_rect(0.12, 0.88, 0.22, 0.4);
    case 1: return in_rect(0.28, 0.72, 0.15, 0.3) || in_rect(0.28, 0.47, 0.15, 0.88) || in_rect(0.53, 0.72, 0.15, 0.88);
    case 2: return in_ellipse(0.33, 0.66, 0.18, 0.12) || in_ellipse(0.67, 0.66, 0.18, 0.12);
    case 3: {
      const double dx = (u - 0.5) / 0.18;
      const double dy = (v - 0.38) / 0.14;
      const double r = dx * dx + dy * dy;
      return in_rect(0.26, 0.74, 0.38, 0.82) || (r <= 1.0 && r >= 0.55 && v < 0.38);
    }
    default: return in_ellipse(0.5, 0.5, 0.26, 0.26);
  }
}

Image render_item(int theme, int n_themes, int shape, int shade, double hue_jitter, const SyntheticConfig& cfg,
                  Rng& rng) {
  const int res = cfg.resolution;
  Image img(res, res);
  const double hue = static_cast<double>(theme) / n_themes + hue_jitter;
  const Rgb base = hsv(hue, 0.75, kShadeValue[shade]);
  const double angle = std::numbers::pi * theme / n_themes;
  const double freq = 3.0 + (theme % 3) * 2.0;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const double u = (x + 0.5) / res;
      const double v = (y + 0.5) / res;
      Rgb px{0.93, 0.93, 0.93};
      if (inside(shape, u, v)) {
        const double stripe = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * freq * (u * ca + v * sa));
        const double m = 1.0 - 0.3 * stripe;
        px = {base.r * m, base.g * m, base.b * m};
      }
      img.at(0, y, x) = static_cast<float>(std::clamp(px.r + cfg.pixel_noise * rng.normal(), 0.0, 1.0));
      img.at(1, y, x) = static_cast<float>(std::clamp(px.g + cfg.pixel_noise * rng.normal(), 0.0, 1.0));
      img.at(2, y, x) = static_cast<float>(std::clamp(px.b + cfg.pixel_noise * rng.normal(), 0.0, 1.0));
    }
  }
  return img;
}

std::string pick(const std::vector<std::string>& pool, Rng& rng) { return pool[rng.index(pool.size())]; }

}  // namespace

const std::vector<std::string>& theme_words(int theme) {
  if (theme < static_cast<int>(kThemePools.size())) return kThemePools[static_cast<std::size_t>(theme)];
  static const std::vector<std::string> kEmpty;
  return kEmpty;
}

int theme_of(const FashionItem& item) {
  constexpr std::string_view prefix = "theme-";
  if (item.fine_category.rfind(prefix, 0) != 0) return -1;
  try {
    return std::stoi(item.fine_category.substr(prefix.size()));
  } catch (...) {
    return -1;
  }
}

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.n_themes < 2) throw Error(ErrorKind::kConfig, "synthetic dataset needs n_themes >= 2");
  if (cfg.types.size() < 2) throw Error(ErrorKind::kConfig, "synthetic dataset needs at least 2 types");
  if (std::set<std::string>(cfg.types.begin(), cfg.types.end()).size() != cfg.types.size()) {
    throw Error(ErrorKind::kConfig, "synthetic dataset types must be distinct");
  }
  if (cfg.outfit_len > static_cast<int>(cfg.types.size())) {
    throw Error(ErrorKind::kConfig, "outfit_len " + std::to_string(cfg.outfit_len) + " exceeds the number of types " +
                                        std::to_string(cfg.types.size()));
  }
  if (cfg.outfit_len < 2) throw Error(ErrorKind::kConfig, "outfit_len must be at least 2");
  if (cfg.resolution < 8) throw Error(ErrorKind::kConfig, "resolution must be at least 8");
  if (cfg.valid_fraction < 0 || cfg.test_fraction < 0 || cfg.valid_fraction + cfg.test_fraction >= 1.0) {
    throw Error(ErrorKind::kConfig, "valid_fraction + test_fraction must be in [0, 1)");
  }
  const int n_valid_items = static_cast<int>(std::lround(cfg.items_per_theme * cfg.valid_fraction));
  const int n_test_items = static_cast<int>(std::lround(cfg.items_per_theme * cfg.test_fraction));
  if (cfg.items_per_theme - n_valid_items - n_test_items < 1 || n_valid_items < 1 || n_test_items < 1) {
    throw Error(ErrorKind::kConfig, "items_per_theme too small for the split fractions");
  }

  SyntheticDataset out;
  std::array<DatasetSplit*, 3> splits = {&out.train, &out.valid, &out.test};
  out.train.split = SplitName::kTrain;
  out.valid.split = SplitName::kValid;
  out.test.split = SplitName::kTest;
  for (auto* s : splits) {
    s->type_vocabulary = cfg.types;
    s->disjoint = true;
  }

  // pools[split][theme][type] -> item ids
  std::vector<std::vector<std::vector<std::vector<std::string>>>> pools(
      3, std::vector<std::vector<std::vector<std::string>>>(
             static_cast<std::size_t>(cfg.n_themes), std::vector<std::vector<std::string>>(cfg.types.size())));

  Rng text_rng(mix_seed(cfg.seed, 1));
  Rng split_rng(mix_seed(cfg.seed, 2));
  int serial = 0;
  for (int theme = 0; theme < cfg.n_themes; ++theme) {
    std::vector<std::string> pool = theme_words(theme);
    if (pool.empty()) {
      for (int w = 0; w < 10; ++w) pool.push_back("motif" + std::to_string(theme) + static_cast<char>('a' + w));
    }
    for (std::size_t ty = 0; ty < cfg.types.size(); ++ty) {
      std::vector<int> assignment(static_cast<std::size_t>(cfg.items_per_theme), 0);
      for (int i = 0; i < n_valid_items; ++i) assignment[static_cast<std::size_t>(i)] = 1;
      for (int i = 0; i < n_test_items; ++i) assignment[static_cast<std::size_t>(n_valid_items + i)] = 2;
      split_rng.shuffle(assignment);
      const auto nouns = type_nouns(cfg.types[ty]);
      for (int i = 0; i < cfg.items_per_theme; ++i) {
        const int id_num = serial++;
        Rng item_rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(id_num)));
        const int shade = static_cast<int>(text_rng.index(kShadeWords.size()));
        const double jitter = 0.02 * text_rng.normal();
        std::vector<std::string> words = pool;
        text_rng.shuffle(words);
        const std::string noun = pick(nouns, text_rng);

        FashionItem item;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "item%05d", id_num);
        item.item_id = buf;
        item.title = std::string(kShadeWords[static_cast<std::size_t>(shade)]) + " " + words[0] + " " + noun;
        item.description = "a " + words[1] + " " + noun + " with " + words[2] + " details, theme-" +
                           std::to_string(theme) + " look";
        item.semantic_type = cfg.types[ty];
        item.fine_category = "theme-" + std::to_string(theme);
        item.image_path = "images/" + item.item_id + ".png";
        item.image = render_item(theme, cfg.n_themes, static_cast<int>(ty), shade, jitter, cfg, item_rng);

        const int split = assignment[static_cast<std::size_t>(i)];
        pools[static_cast<std::size_t>(split)][static_cast<std::size_t>(theme)][ty].push_back(item.item_id);
        splits[static_cast<std::size_t>(split)]->items.add(std::move(item));
      }
    }
  }

  Rng outfit_rng(mix_seed(cfg.seed, 3));
  const std::array<int, 3> counts = {cfg.n_outfits, cfg.n_valid_outfits, cfg.n_test_outfits};
  for (std::size_t s = 0; s < 3; ++s) {
    for (int n = 0; n < counts[s]; ++n) {
      const int theme = static_cast<int>(outfit_rng.index(static_cast<std::size_t>(cfg.n_themes)));
      std::vector<std::size_t> type_idx(cfg.types.size());
      for (std::size_t t = 0; t < type_idx.size(); ++t) type_idx[t] = t;
      outfit_rng.shuffle(type_idx);
      type_idx.resize(static_cast<std::size_t>(cfg.outfit_len));
      std::sort(type_idx.begin(), type_idx.end());
      Outfit o;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s-%04d", std::string(to_string(splits[s]->split)).c_str(), n);
      o.outfit_id = buf;
      o.split = splits[s]->split;
      for (std::size_t ty : type_idx) {
        int item_theme = theme;
        if (cfg.noise > 0.0 && outfit_rng.uniform() < cfg.noise) {
          item_theme = static_cast<int>((theme + 1 + outfit_rng.index(static_cast<std::size_t>(cfg.n_themes - 1))) %
                                        static_cast<std::size_t>(cfg.n_themes));
        }
        const auto& pool = pools[s][static_cast<std::size_t>(item_theme)][ty];
        o.item_ids.push_back(pool[outfit_rng.index(pool.size())]);
      }
      splits[s]->outfits.push_back(std::move(o));
    }
  }
  return out;
}

}  // namespace outfit
