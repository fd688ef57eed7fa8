#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "outfit/image.hpp"
#include "outfit/nn.hpp"

namespace outfit {

enum class BackboneKind { kReferenceCnn, kReferenceText, kExternalPretrained };

std::string_view to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(std::string_view name);

struct BackboneSpec {
  BackboneKind kind = BackboneKind::kReferenceCnn;
  int output_dim = 0;  // raw backbone width before the projection
  bool trainable = true;
  int feature_dim = 128;  // projection output, d_f
};

/// Opaque per-call activations kept for the backward pass.
struct BackboneCache {
  virtual ~BackboneCache() = default;
};

class ImageBackbone {
 public:
  virtual ~ImageBackbone() = default;
  virtual BackboneSpec spec() const = 0;
  /// Features as columns (d_f x N). Deterministic; no dropout.
  virtual Batch forward(std::span<const Image* const> images, std::unique_ptr<BackboneCache>* cache = nullptr) const = 0;
  virtual void backward(const BackboneCache& cache, const Batch& d_features) = 0;
  virtual void collect(std::vector<Param*>& out) = 0;
  virtual void init(std::uint64_t seed) = 0;

  int feature_dim() const { return spec().feature_dim; }
  Vector encode(const Image& image) const;
};

class TextBackbone {
 public:
  virtual ~TextBackbone() = default;
  virtual BackboneSpec spec() const = 0;
  virtual Batch forward(std::span<const std::string> texts, std::unique_ptr<BackboneCache>* cache = nullptr) const = 0;
  virtual void backward(const BackboneCache& cache, const Batch& d_features) = 0;
  virtual void collect(std::vector<Param*>& out) = 0;
  virtual void init(std::uint64_t seed) = 0;

  int feature_dim() const { return spec().feature_dim; }
  Vector encode(const std::string& text) const;
};

// Reference CNN:
//   block1: conv3x3(3 -> c1, stride s, pad 1), ReLU, avgpool 2x2
//   block2: conv3x3(c1 -> c2, pad 1), ReLU, avgpool 2x2
//   block3: conv3x3(c2 -> c3, pad 1), ReLU
//   global average pool, linear c3 -> d_f
// The resolution must be divisible by 4*s.
struct ReferenceCnnConfig {
  int resolution = 64;
  std::array<int, 3> channels = {8, 16, 32};
  int first_stride = 2;
  int feature_dim = 128;
};

class ReferenceCnn final : public ImageBackbone {
 public:
  explicit ReferenceCnn(const ReferenceCnnConfig& config);

  BackboneSpec spec() const override;
  Batch forward(std::span<const Image* const> images, std::unique_ptr<BackboneCache>* cache = nullptr) const override;
  void backward(const BackboneCache& cache, const Batch& d_features) override;
  void collect(std::vector<Param*>& out) override;
  void init(std::uint64_t seed) override;

  const ReferenceCnnConfig& config() const { return config_; }
  /// c1(27+1) + c2(9c1+1) + c3(9c2+1) + d_f(c3+1).
  static std::size_t parameter_count(const ReferenceCnnConfig& config);

 private:
  ReferenceCnnConfig config_;
  std::array<Param, 3> conv_w_;
  std::array<Param, 3> conv_b_;
  Linear projection_;
};

// Hashed bag-of-words text encoder. Tokens are maximal runs of ASCII letters
// and digits, lowercased; each token hashes (FNV-1a 64) into one of `buckets`
// bins, and the count vector is L2-normalized. Empty input becomes the single
// reserved token "<empty>". Then linear(buckets -> hidden), ReLU,
// linear(hidden -> d_f).
struct HashedTextConfig {
  int buckets = 2048;
  int hidden = 256;
  int feature_dim = 128;
};

std::vector<std::string> tokenize(std::string_view text);
std::uint32_t token_bucket(std::string_view token, int buckets);
SparseBatch bag_of_words(std::span<const std::string> texts, int buckets);

class HashedTextEncoder final : public TextBackbone {
 public:
  explicit HashedTextEncoder(const HashedTextConfig& config);

  BackboneSpec spec() const override;
  Batch forward(std::span<const std::string> texts, std::unique_ptr<BackboneCache>* cache = nullptr) const override;
  void backward(const BackboneCache& cache, const Batch& d_features) override;
  void collect(std::vector<Param*>& out) override;
  void init(std::uint64_t seed) override;

  const HashedTextConfig& config() const { return config_; }
  static std::size_t parameter_count(const HashedTextConfig& config);

 private:
  HashedTextConfig config_;
  Linear fc1_;
  Linear fc2_;
};

/// Frozen feature extractor supplied by the caller, e.g. a ResNet18 or BERT
/// runtime. Only the linear projection to d_f is trained.
class ExternalExtractor {
 public:
  virtual ~ExternalExtractor() = default;
  virtual std::string name() const = 0;
  virtual int output_dim() const = 0;
  virtual Batch extract_images(std::span<const Image* const> images) const = 0;
  virtual Batch extract_texts(std::span<const std::string> texts) const = 0;
};

class ExternalImageBackbone final : public ImageBackbone {
 public:
  ExternalImageBackbone(std::shared_ptr<const ExternalExtractor> extractor, int feature_dim);
  BackboneSpec spec() const override;
  Batch forward(std::span<const Image* const> images, std::unique_ptr<BackboneCache>* cache = nullptr) const override;
  void backward(const BackboneCache& cache, const Batch& d_features) override;
  void collect(std::vector<Param*>& out) override;
  void init(std::uint64_t seed) override;
  const ExternalExtractor& extractor() const { return *extractor_; }

 private:
  std::shared_ptr<const ExternalExtractor> extractor_;
  Linear projection_;
};

class ExternalTextBackbone final : public TextBackbone {
 public:
  ExternalTextBackbone(std::shared_ptr<const ExternalExtractor> extractor, int feature_dim);
  BackboneSpec spec() const override;
  Batch forward(std::span<const std::string> texts, std::unique_ptr<BackboneCache>* cache = nullptr) const override;
  void backward(const BackboneCache& cache, const Batch& d_features) override;
  void collect(std::vector<Param*>& out) override;
  void init(std::uint64_t seed) override;
  const ExternalExtractor& extractor() const { return *extractor_; }

 private:
  std::shared_ptr<const ExternalExtractor> extractor_;
  Linear projection_;
};

struct Backbones {
  std::unique_ptr<ImageBackbone> image;
  std::unique_ptr<TextBackbone> text;
};

/// Seeded reference image and text backbones.
Backbones reference_backbones(std::uint64_t seed, const ReferenceCnnConfig& image = {},
                              const HashedTextConfig& text = {});

}  // namespace outfit
