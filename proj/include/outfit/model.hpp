#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "outfit/catalog.hpp"
#include "outfit/compatibility.hpp"
#include "outfit/embedding.hpp"
#include "outfit/encoders.hpp"

namespace outfit {

/// Which embedding stands for an item at generation/evaluation time.
enum class ItemRepresentation { kImage, kMean };

struct ModelConfig {
  ReferenceCnnConfig image;
  HashedTextConfig text;
  int embed_hidden = 128;
  int embed_dim = 128;
  int disc_hidden1 = 256;
  int disc_hidden2 = 64;
  TransformSet transforms = kAllTransforms;
  ItemRepresentation representation = ItemRepresentation::kImage;
  /// Regularize every embedder weight instead of only the output layers.
  bool l2_all_layers = false;
  /// Multiplier on the He init of the embedders' output layers. Large initial
  /// embeddings inflate Adam's second moments and stall the embedding near 0.
  double embed_init_scale = 0.02;

  int feature_dim() const { return image.feature_dim; }
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Encoder outputs for a set of items; column j belongs to ids[j].
struct EncodedItems {
  std::vector<std::string> ids;
  std::vector<std::string> types;
  std::vector<bool> has_image;
  Batch v_image;
  Batch v_text;
  Batch u_image;
  Batch u_text;
  ItemRepresentation representation = ItemRepresentation::kImage;
  std::unordered_map<std::string, Eigen::Index> index;

  Eigen::Index size() const { return static_cast<Eigen::Index>(ids.size()); }
  Eigen::Index at(const std::string& id) const;
  /// u_x: image embedding, or the image/text mean; text-only items use u_t.
  Vector embedding(Eigen::Index i) const;
  Batch embeddings() const;
  /// Discriminator input for one item; throws kModality when the mode needs
  /// an image the item does not have.
  Vector feature(CompatMode mode, Eigen::Index i) const;
};

class Model {
 public:
  /// Reference backbones seeded from `seed`.
  Model(const ModelConfig& config, std::uint64_t seed);
  /// Caller-provided backbones (already initialized).
  Model(const ModelConfig& config, Backbones backbones, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ImageBackbone& image_backbone() { return *image_; }
  TextBackbone& text_backbone() { return *text_; }
  const ImageBackbone& image_backbone() const { return *image_; }
  const TextBackbone& text_backbone() const { return *text_; }
  Embedder& image_embedder() { return image_embedder_; }
  Embedder& text_embedder() { return text_embedder_; }
  const Embedder& image_embedder() const { return image_embedder_; }
  const Embedder& text_embedder() const { return text_embedder_; }
  Discriminator& discriminator(CompatMode mode);
  const Discriminator& discriminator(CompatMode mode) const;

  /// Every trainable tensor in a fixed order: image backbone, text backbone,
  /// image embedder, text embedder, D_image, D_text, D_cat.
  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
  /// Tensors covered by the L2 term.
  std::vector<Param*> regularized();

  EncodedItems encode(std::span<const FashionItem* const> items) const;
  EncodedItems encode(const ItemTable& items) const;
  Vector embed_query(const std::string& text) const;

  double compatibility(CompatMode mode, const EncodedItems& items, Eigen::Index x, Eigen::Index y) const;

 private:
  void build(std::uint64_t seed);

  ModelConfig config_;
  std::unique_ptr<ImageBackbone> image_;
  std::unique_ptr<TextBackbone> text_;
  Embedder image_embedder_;
  Embedder text_embedder_;
  Discriminator d_image_;
  Discriminator d_text_;
  Discriminator d_cat_;
};

}  // namespace outfit
