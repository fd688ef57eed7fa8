#include "outfit/encoders.hpp"

#include <cctype>

#include "outfit/error.hpp"
#include "outfit/kernels.hpp"
#include "outfit/rng.hpp"

namespace outfit {

std::string_view to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::kReferenceCnn: return "reference-cnn";
    case BackboneKind::kReferenceText: return "reference-text";
    case BackboneKind::kExternalPretrained: return "external-pretrained";
  }
  return "reference-cnn";
}

BackboneKind parse_backbone_kind(std::string_view name) {
  if (name == "reference-cnn") return BackboneKind::kReferenceCnn;
  if (name == "reference-text") return BackboneKind::kReferenceText;
  if (name == "external-pretrained") return BackboneKind::kExternalPretrained;
  throw Error(ErrorKind::kConfig, "unknown backbone kind '" + std::string(name) + "'");
}

Vector ImageBackbone::encode(const Image& image) const {
  const Image* ptr = &image;
  return forward(std::span<const Image* const>(&ptr, 1)).col(0);
}

Vector TextBackbone::encode(const std::string& text) const {
  return forward(std::span<const std::string>(&text, 1)).col(0);
}

// ---------------------------------------------------------------------------
// Reference CNN

namespace {

struct CnnCache final : BackboneCache {
  int batch = 0;
  std::vector<double> input;
  std::array<std::vector<double>, 3> pre;     // conv outputs before ReLU
  std::array<std::vector<double>, 2> pooled;  // inputs of conv2, conv3
  Batch pooled_global;
};

kernels::ConvShape conv_shape(const ReferenceCnnConfig& c, int layer) {
  kernels::ConvShape s;
  const int r1 = c.resolution / c.first_stride;
  if (layer == 0) {
    s = {3, c.channels[0], c.resolution, c.resolution, 3, c.first_stride, 1};
  } else if (layer == 1) {
    s = {c.channels[0], c.channels[1], r1 / 2, r1 / 2, 3, 1, 1};
  } else {
    s = {c.channels[1], c.channels[2], r1 / 4, r1 / 4, 3, 1, 1};
  }
  return s;
}

void relu_inplace(std::vector<double>& out, const std::vector<double>& in) {
  out.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_mask(std::vector<double>& grad, const std::vector<double>& pre) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(pre[i] > 0.0)) grad[i] = 0.0;
  }
}

}  // namespace

ReferenceCnn::ReferenceCnn(const ReferenceCnnConfig& config)
    : config_(config), projection_("image.proj", config.channels[2], config.feature_dim) {
  if (config.first_stride != 1 && config.first_stride != 2) {
    throw Error(ErrorKind::kConfig, "reference CNN first_stride must be 1 or 2");
  }
  if (config.resolution <= 0 || config.resolution % (4 * config.first_stride) != 0) {
    throw Error(ErrorKind::kConfig, "reference CNN resolution must be a positive multiple of " +
                                        std::to_string(4 * config.first_stride));
  }
  for (int l = 0; l < 3; ++l) {
    const auto s = conv_shape(config_, l);
    conv_w_[l] = Param("image.conv" + std::to_string(l + 1) + ".weight", s.out_channels, s.patch());
    conv_b_[l] = Param("image.conv" + std::to_string(l + 1) + ".bias", s.out_channels, 1);
  }
}

BackboneSpec ReferenceCnn::spec() const {
  return {BackboneKind::kReferenceCnn, config_.channels[2], true, config_.feature_dim};
}

std::size_t ReferenceCnn::parameter_count(const ReferenceCnnConfig& c) {
  const std::size_t c1 = c.channels[0], c2 = c.channels[1], c3 = c.channels[2], df = c.feature_dim;
  return c1 * (27 + 1) + c2 * (9 * c1 + 1) + c3 * (9 * c2 + 1) + df * (c3 + 1);
}

void ReferenceCnn::init(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 11));
  for (int l = 0; l < 3; ++l) {
    init_he(conv_w_[l], conv_w_[l].value.cols(), rng);
    conv_b_[l].value.setZero();
  }
  projection_.init(rng);
}

void ReferenceCnn::collect(std::vector<Param*>& out) {
  for (int l = 0; l < 3; ++l) {
    out.push_back(&conv_w_[l]);
    out.push_back(&conv_b_[l]);
  }
  out.push_back(&projection_.weight());
  out.push_back(&projection_.bias());
}

Batch ReferenceCnn::forward(std::span<const Image* const> images, std::unique_ptr<BackboneCache>* cache) const {
  const int n = static_cast<int>(images.size());
  const int res = config_.resolution;
  auto c = std::make_unique<CnnCache>();
  c->batch = n;
  c->input.resize(static_cast<std::size_t>(n) * 3 * res * res);
  for (int i = 0; i < n; ++i) {
    const Image& img = *images[static_cast<std::size_t>(i)];
    if (img.width != res || img.height != res) {
      throw Error(ErrorKind::kShape, "image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                         ", encoder expects " + std::to_string(res) + "x" + std::to_string(res));
    }
    std::copy(img.data.begin(), img.data.end(), c->input.begin() + static_cast<std::ptrdiff_t>(i) * 3 * res * res);
  }

  std::vector<double> act;
  const std::vector<double>* in = &c->input;
  for (int l = 0; l < 3; ++l) {
    const auto s = conv_shape(config_, l);
    c->pre[l].resize(s.out_size() * n);
    kernels::conv2d_forward(s, n, *in, conv_w_[l].value, conv_b_[l].value, c->pre[l]);
    relu_inplace(act, c->pre[l]);
    if (l < 2) {
      c->pooled[l].resize(act.size() / 4);
      kernels::avg_pool2_forward(s.out_channels, s.out_height(), s.out_width(), n, act, c->pooled[l]);
      in = &c->pooled[l];
    }
  }
  const auto s3 = conv_shape(config_, 2);
  c->pooled_global = kernels::global_avg_pool_forward(s3.out_channels, s3.out_height(), s3.out_width(), n, act);
  Batch features = projection_.forward(c->pooled_global);
  if (cache) *cache = std::move(c);
  return features;
}

void ReferenceCnn::backward(const BackboneCache& base, const Batch& d_features) {
  const auto& c = dynamic_cast<const CnnCache&>(base);
  const int n = c.batch;
  const Batch d_pool = projection_.backward(c.pooled_global, d_features);
  const auto s3 = conv_shape(config_, 2);
  std::vector<double> grad(s3.out_size() * n);
  kernels::global_avg_pool_backward(s3.out_channels, s3.out_height(), s3.out_width(), d_pool, grad);
  for (int l = 2; l >= 0; --l) {
    const auto s = conv_shape(config_, l);
    relu_mask(grad, c.pre[l]);
    const std::vector<double>& input = l == 0 ? c.input : c.pooled[l - 1];
    std::vector<double> d_input;
    if (l > 0) d_input.resize(input.size());
    kernels::conv2d_backward(s, n, input, conv_w_[l].value, grad, conv_w_[l].grad, conv_b_[l].grad, d_input);
    if (l > 0) {
      const auto prev = conv_shape(config_, l - 1);
      grad.assign(prev.out_size() * n, 0.0);
      kernels::avg_pool2_backward(prev.out_channels, prev.out_height(), prev.out_width(), n, d_input, grad);
    }
  }
}

// ---------------------------------------------------------------------------
// Hashed bag-of-words text encoder

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u) && u < 128) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::uint32_t token_bucket(std::string_view token, int buckets) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : token) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::uint32_t>(h % static_cast<std::uint64_t>(buckets));
}

SparseBatch bag_of_words(std::span<const std::string> texts, int buckets) {
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t j = 0; j < texts.size(); ++j) {
    auto tokens = tokenize(texts[j]);
    if (tokens.empty()) tokens.emplace_back("<empty>");
    std::vector<std::pair<std::uint32_t, double>> counts;
    for (const auto& t : tokens) {
      const auto b = token_bucket(t, buckets);
      auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& p) { return p.first == b; });
      if (it == counts.end()) counts.emplace_back(b, 1.0);
      else it->second += 1.0;
    }
    double norm = 0.0;
    for (const auto& [b, v] : counts) norm += v * v;
    norm = std::sqrt(norm);
    for (const auto& [b, v] : counts) entries.emplace_back(static_cast<int>(b), static_cast<int>(j), v / norm);
  }
  SparseBatch x(buckets, static_cast<Eigen::Index>(texts.size()));
  x.setFromTriplets(entries.begin(), entries.end());
  return x;
}

namespace {

struct TextCache final : BackboneCache {
  SparseBatch input;
  Batch hidden_pre;
};

}  // namespace

HashedTextEncoder::HashedTextEncoder(const HashedTextConfig& config)
    : config_(config),
      fc1_("text.fc1", config.buckets, config.hidden),
      fc2_("text.fc2", config.hidden, config.feature_dim) {
  if (config.buckets <= 0 || config.hidden <= 0 || config.feature_dim <= 0) {
    throw Error(ErrorKind::kConfig, "text encoder dimensions must be positive");
  }
}

BackboneSpec HashedTextEncoder::spec() const {
  return {BackboneKind::kReferenceText, config_.hidden, true, config_.feature_dim};
}

std::size_t HashedTextEncoder::parameter_count(const HashedTextConfig& c) {
  return static_cast<std::size_t>(c.hidden) * (c.buckets + 1) + static_cast<std::size_t>(c.feature_dim) * (c.hidden + 1);
}

void HashedTextEncoder::init(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 12));
  // Inputs are L2-normalized with a handful of non-zeros, so scale by the
  // typical active count rather than the bucket count.
  init_he(fc1_.weight(), 8, rng);
  fc1_.bias().value.setZero();
  fc2_.init(rng);
}

void HashedTextEncoder::collect(std::vector<Param*>& out) {
  out.push_back(&fc1_.weight());
  out.push_back(&fc1_.bias());
  out.push_back(&fc2_.weight());
  out.push_back(&fc2_.bias());
}

Batch HashedTextEncoder::forward(std::span<const std::string> texts, std::unique_ptr<BackboneCache>* cache) const {
  auto c = std::make_unique<TextCache>();
  c->input = bag_of_words(texts, config_.buckets);
  c->hidden_pre = fc1_.forward(c->input);
  Batch features = fc2_.forward(relu(c->hidden_pre));
  if (cache) *cache = std::move(c);
  return features;
}

void HashedTextEncoder::backward(const BackboneCache& base, const Batch& d_features) {
  const auto& c = dynamic_cast<const TextCache&>(base);
  const Batch d_hidden = fc2_.backward(relu(c.hidden_pre), d_features);
  fc1_.backward(c.input, relu_backward(c.hidden_pre, d_hidden));
}

// ---------------------------------------------------------------------------
// External extractors

namespace {

struct ProjectionCache final : BackboneCache {
  Batch raw;
};

}  // namespace

ExternalImageBackbone::ExternalImageBackbone(std::shared_ptr<const ExternalExtractor> extractor, int feature_dim)
    : extractor_(std::move(extractor)), projection_("image.proj", extractor_->output_dim(), feature_dim) {}

BackboneSpec ExternalImageBackbone::spec() const {
  return {BackboneKind::kExternalPretrained, extractor_->output_dim(), false, projection_.out_dim()};
}

Batch ExternalImageBackbone::forward(std::span<const Image* const> images, std::unique_ptr<BackboneCache>* cache) const {
  auto c = std::make_unique<ProjectionCache>();
  c->raw = extractor_->extract_images(images);
  Batch out = projection_.forward(c->raw);
  if (cache) *cache = std::move(c);
  return out;
}

void ExternalImageBackbone::backward(const BackboneCache& base, const Batch& d_features) {
  projection_.backward(dynamic_cast<const ProjectionCache&>(base).raw, d_features);
}

void ExternalImageBackbone::collect(std::vector<Param*>& out) {
  out.push_back(&projection_.weight());
  out.push_back(&projection_.bias());
}

void ExternalImageBackbone::init(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 13));
  projection_.init(rng);
}

ExternalTextBackbone::ExternalTextBackbone(std::shared_ptr<const ExternalExtractor> extractor, int feature_dim)
    : extractor_(std::move(extractor)), projection_("text.proj", extractor_->output_dim(), feature_dim) {}

BackboneSpec ExternalTextBackbone::spec() const {
  return {BackboneKind::kExternalPretrained, extractor_->output_dim(), false, projection_.out_dim()};
}

Batch ExternalTextBackbone::forward(std::span<const std::string> texts, std::unique_ptr<BackboneCache>* cache) const {
  auto c = std::make_unique<ProjectionCache>();
  c->raw = extractor_->extract_texts(texts);
  Batch out = projection_.forward(c->raw);
  if (cache) *cache = std::move(c);
  return out;
}

void ExternalTextBackbone::backward(const BackboneCache& base, const Batch& d_features) {
  projection_.backward(dynamic_cast<const ProjectionCache&>(base).raw, d_features);
}

void ExternalTextBackbone::collect(std::vector<Param*>& out) {
  out.push_back(&projection_.weight());
  out.push_back(&projection_.bias());
}

void ExternalTextBackbone::init(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 14));
  projection_.init(rng);
}

Backbones reference_backbones(std::uint64_t seed, const ReferenceCnnConfig& image, const HashedTextConfig& text) {
  Backbones b;
  b.image = std::make_unique<ReferenceCnn>(image);
  b.text = std::make_unique<HashedTextEncoder>(text);
  b.image->init(seed);
  b.text->init(seed);
  return b;
}

}  // namespace outfit
