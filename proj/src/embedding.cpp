#include "outfit/embedding.hpp"

#include <cmath>

#include "outfit/error.hpp"

namespace outfit {

Embedder::Embedder(const std::string& name, int input_dim, int hidden, int output_dim)
    : mlp_(name, {input_dim, hidden, output_dim}) {}

Batch Embedder::forward(const Batch& features, Mlp::Cache* cache) const { return mlp_.forward(features, cache); }

Batch Embedder::backward(const Mlp::Cache& cache, const Batch& d_embedding) { return mlp_.backward(cache, d_embedding); }

Vector Embedder::embed(const Vector& feature) const { return mlp_.forward(feature).col(0); }

namespace {

void check_triplet(const Vector& a, const Vector& p, const Vector& n, double margin) {
  if (a.size() != p.size() || a.size() != n.size()) throw Error(ErrorKind::kShape, "triplet_loss: dimension mismatch");
  if (!(margin > 0.0)) throw Error(ErrorKind::kConfig, "triplet_loss: margin must be positive");
  if (!a.allFinite() || !p.allFinite() || !n.allFinite()) throw Error(ErrorKind::kNumeric, "triplet_loss: non-finite input");
}

}  // namespace

double triplet_loss(const Vector& a, const Vector& p, const Vector& n, double margin) {
  check_triplet(a, p, n, margin);
  return std::max((a - p).squaredNorm() - (a - n).squaredNorm() + margin, 0.0);
}

TripletGrad triplet_loss_grad(const Vector& a, const Vector& p, const Vector& n, double margin) {
  check_triplet(a, p, n, margin);
  TripletGrad g;
  const double raw = (a - p).squaredNorm() - (a - n).squaredNorm() + margin;
  g.da = Vector::Zero(a.size());
  g.dp = Vector::Zero(a.size());
  g.dn = Vector::Zero(a.size());
  if (raw > 0.0) {
    g.value = raw;
    g.da = 2.0 * (n - p);
    g.dp = -2.0 * (a - p);
    g.dn = 2.0 * (a - n);
  }
  return g;
}

EmbeddingLossTerms embedding_loss(const Batch& u_image, const Batch& u_text, std::span<const std::size_t> anchors,
                                  std::span<const std::size_t> negatives, const EmbeddingLossConfig& config,
                                  std::span<Param* const> regularized, bool with_grad) {
  if (anchors.empty()) throw Error(ErrorKind::kConfig, "embedding_loss: empty batch");
  if (anchors.size() != negatives.size()) throw Error(ErrorKind::kShape, "embedding_loss: anchors/negatives size mismatch");
  if (u_image.rows() != u_text.rows() || u_image.cols() != u_text.cols()) {
    throw Error(ErrorKind::kShape, "embedding_loss: image and text embeddings differ in shape");
  }
  EmbeddingLossTerms out;
  if (with_grad) {
    out.d_image = Batch::Zero(u_image.rows(), u_image.cols());
    out.d_text = Batch::Zero(u_text.rows(), u_text.cols());
  }
  const double inv = 1.0 / static_cast<double>(anchors.size());
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const std::size_t x = anchors[k];
    const std::size_t y = negatives[k];
    if (x == y) throw Error(ErrorKind::kConfig, "embedding_loss: negative equals its anchor");
    const Vector uix = u_image.col(static_cast<Eigen::Index>(x));
    const Vector utx = u_text.col(static_cast<Eigen::Index>(x));
    const Vector uiy = u_image.col(static_cast<Eigen::Index>(y));
    const Vector uty = u_text.col(static_cast<Eigen::Index>(y));
    const auto t1 = triplet_loss_grad(uix, utx, uty, config.margin);
    const auto t2 = triplet_loss_grad(uix, utx, uiy, config.margin);
    const Vector diff = utx - uix;
    out.triplet += (t1.value + t2.value) * inv;
    out.alignment += diff.squaredNorm() * inv;
    if (with_grad) {
      const auto xi = static_cast<Eigen::Index>(x);
      const auto yi = static_cast<Eigen::Index>(y);
      out.d_image.col(xi) += inv * (t1.da + t2.da - 2.0 * diff);
      out.d_text.col(xi) += inv * (t1.dp + t2.dp + 2.0 * diff);
      out.d_text.col(yi) += inv * t1.dn;
      out.d_image.col(yi) += inv * t2.dn;
    }
  }
  for (Param* p : regularized) {
    out.l2 += config.l2 * p->value.squaredNorm();
    if (with_grad) p->grad += 2.0 * config.l2 * p->value;
  }
  out.total = out.triplet + out.alignment + out.l2;
  return out;
}

Vector embed_query(const std::string& text, const TextBackbone& text_encoder, const Embedder& text_embedder) {
  if (tokenize(text).empty()) throw Error(ErrorKind::kInvalidQuery, "query text is empty");
  return text_embedder.embed(text_encoder.encode(text));
}

}  // namespace outfit
