#include "outfit/model.hpp"

#include "outfit/error.hpp"
#include "outfit/rng.hpp"

namespace outfit {

using nlohmann::json;

json to_json(const ModelConfig& c) {
  return {
      {"image",
       {{"resolution", c.image.resolution},
        {"channels", c.image.channels},
        {"first_stride", c.image.first_stride},
        {"feature_dim", c.image.feature_dim}}},
      {"text", {{"buckets", c.text.buckets}, {"hidden", c.text.hidden}, {"feature_dim", c.text.feature_dim}}},
      {"embed_hidden", c.embed_hidden},
      {"embed_dim", c.embed_dim},
      {"disc_hidden", {c.disc_hidden1, c.disc_hidden2}},
      {"transforms", to_string_transforms(c.transforms)},
      {"representation", c.representation == ItemRepresentation::kImage ? "image" : "mean"},
      {"l2_all_layers", c.l2_all_layers},
      {"embed_init_scale", c.embed_init_scale},
  };
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig c;
    c.image.resolution = j.at("image").at("resolution");
    c.image.channels = j.at("image").at("channels").get<std::array<int, 3>>();
    c.image.first_stride = j.at("image").at("first_stride");
    c.image.feature_dim = j.at("image").at("feature_dim");
    c.text.buckets = j.at("text").at("buckets");
    c.text.hidden = j.at("text").at("hidden");
    c.text.feature_dim = j.at("text").at("feature_dim");
    c.embed_hidden = j.at("embed_hidden");
    c.embed_dim = j.at("embed_dim");
    c.disc_hidden1 = j.at("disc_hidden").at(0);
    c.disc_hidden2 = j.at("disc_hidden").at(1);
    c.transforms = parse_transforms(j.at("transforms").get<std::string>());
    c.representation = j.at("representation") == "mean" ? ItemRepresentation::kMean : ItemRepresentation::kImage;
    c.l2_all_layers = j.value("l2_all_layers", false);
    c.embed_init_scale = j.value("embed_init_scale", 1.0);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIntegrity, std::string("malformed model config: ") + e.what());
  }
}

Eigen::Index EncodedItems::at(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) throw Error(ErrorKind::kNotFound, "item " + id + " is not encoded", {id});
  return it->second;
}

Vector EncodedItems::embedding(Eigen::Index i) const {
  if (!has_image[static_cast<std::size_t>(i)]) return u_text.col(i);
  if (representation == ItemRepresentation::kMean) return 0.5 * (u_image.col(i) + u_text.col(i));
  return u_image.col(i);
}

Batch EncodedItems::embeddings() const {
  Batch out(u_image.rows(), size());
  for (Eigen::Index i = 0; i < size(); ++i) out.col(i) = embedding(i);
  return out;
}

Vector EncodedItems::feature(CompatMode mode, Eigen::Index i) const {
  if (mode != CompatMode::kText && !has_image[static_cast<std::size_t>(i)]) {
    throw Error(ErrorKind::kModality, "item " + ids[static_cast<std::size_t>(i)] + " has no image for mode " +
                                          std::string(to_string(mode)),
                {ids[static_cast<std::size_t>(i)]});
  }
  switch (mode) {
    case CompatMode::kImage: return v_image.col(i);
    case CompatMode::kText: return v_text.col(i);
    case CompatMode::kCat: {
      Vector out(v_image.rows() + v_text.rows());
      out << v_image.col(i), v_text.col(i);
      return out;
    }
  }
  return {};
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config.text.feature_dim != config.image.feature_dim) {
    throw Error(ErrorKind::kConfig, "image and text feature dims must match");
  }
  auto b = reference_backbones(seed, config.image, config.text);
  image_ = std::move(b.image);
  text_ = std::move(b.text);
  build(seed);
}

Model::Model(const ModelConfig& config, Backbones backbones, std::uint64_t seed)
    : config_(config), image_(std::move(backbones.image)), text_(std::move(backbones.text)) {
  if (image_->feature_dim() != config.feature_dim() || text_->feature_dim() != config.feature_dim()) {
    throw Error(ErrorKind::kShape, "backbone feature dims do not match the model config");
  }
  build(seed);
}

void Model::build(std::uint64_t seed) {
  const int df = config_.feature_dim();
  image_embedder_ = Embedder("embed.image", df, config_.embed_hidden, config_.embed_dim);
  text_embedder_ = Embedder("embed.text", df, config_.embed_hidden, config_.embed_dim);
  d_image_ = Discriminator("disc.image", df, config_.transforms, config_.disc_hidden1, config_.disc_hidden2);
  d_text_ = Discriminator("disc.text", df, config_.transforms, config_.disc_hidden1, config_.disc_hidden2);
  d_cat_ = Discriminator("disc.cat", 2 * df, config_.transforms, config_.disc_hidden1, config_.disc_hidden2);
  Rng rng(mix_seed(seed, 21));
  image_embedder_.init(rng, config_.embed_init_scale);
  text_embedder_.init(rng, config_.embed_init_scale);
  d_image_.init(rng);
  d_text_.init(rng);
  d_cat_.init(rng);
}

Discriminator& Model::discriminator(CompatMode mode) {
  switch (mode) {
    case CompatMode::kImage: return d_image_;
    case CompatMode::kText: return d_text_;
    case CompatMode::kCat: return d_cat_;
  }
  return d_cat_;
}

const Discriminator& Model::discriminator(CompatMode mode) const {
  return const_cast<Model*>(this)->discriminator(mode);
}

std::vector<Param*> Model::parameters() {
  std::vector<Param*> out;
  image_->collect(out);
  text_->collect(out);
  image_embedder_.collect(out);
  text_embedder_.collect(out);
  d_image_.collect(out);
  d_text_.collect(out);
  d_cat_.collect(out);
  return out;
}

std::vector<const Param*> Model::parameters() const {
  auto mutable_params = const_cast<Model*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::vector<Param*> Model::regularized() {
  std::vector<Param*> out;
  for (Embedder* e : {&image_embedder_, &text_embedder_}) {
    if (config_.l2_all_layers) {
      for (std::size_t l = 0; l < e->mlp().depth(); ++l) out.push_back(&e->mlp().layer(l).weight());
    } else {
      out.push_back(&e->output_weight());
    }
  }
  return out;
}

EncodedItems Model::encode(std::span<const FashionItem* const> items) const {
  EncodedItems out;
  out.representation = config_.representation;
  const auto n = static_cast<Eigen::Index>(items.size());
  const int df = config_.feature_dim();
  out.v_image = Batch::Zero(df, n);
  out.v_text = Batch::Zero(df, n);
  out.u_image = Batch::Zero(config_.embed_dim, n);
  out.u_text = Batch::Zero(config_.embed_dim, n);
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.ids.push_back(items[i]->item_id);
    out.types.push_back(items[i]->semantic_type);
    out.has_image.push_back(items[i]->image.width > 0);
    out.index.emplace(items[i]->item_id, static_cast<Eigen::Index>(i));
  }
  // One item per call: single-column products round differently from
  // batched ones, and a query must reproduce its item's u_t bit for bit.
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    const FashionItem& item = *items[static_cast<std::size_t>(i)];
    out.v_text.col(i) = text_->encode(item.text());
    out.u_text.col(i) = text_embedder_.embed(out.v_text.col(i));
    if (out.has_image[static_cast<std::size_t>(i)]) {
      out.v_image.col(i) = image_->encode(item.image);
      out.u_image.col(i) = image_embedder_.embed(out.v_image.col(i));
    }
  }
  return out;
}

EncodedItems Model::encode(const ItemTable& items) const {
  std::vector<const FashionItem*> ptrs;
  for (const auto& item : items) ptrs.push_back(&item);
  return encode(ptrs);
}

Vector Model::embed_query(const std::string& text) const { return outfit::embed_query(text, *text_, text_embedder_); }

double Model::compatibility(CompatMode mode, const EncodedItems& items, Eigen::Index x, Eigen::Index y) const {
  return discriminator(mode).score(items.feature(mode, x), items.feature(mode, y));
}

}  // namespace outfit
