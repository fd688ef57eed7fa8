#pragma once

#include <span>
#include <string>

#include "outfit/encoders.hpp"
#include "outfit/nn.hpp"

namespace outfit {

/// Feature-to-embedding map: linear, ReLU, linear. Output is not normalized.
class Embedder {
 public:
  Embedder() = default;
  Embedder(const std::string& name, int input_dim, int hidden, int output_dim);

  Batch forward(const Batch& features, Mlp::Cache* cache = nullptr) const;
  Batch backward(const Mlp::Cache& cache, const Batch& d_embedding);
  Vector embed(const Vector& feature) const;

  /// He init, with the output layer further scaled by output_scale.
  void init(Rng& rng, double output_scale = 1.0) {
    mlp_.init(rng);
    output_weight().value *= output_scale;
  }
  void collect(std::vector<Param*>& out) { mlp_.collect(out); }
  /// Weight of the layer producing the embedding.
  Param& output_weight() { return mlp_.layer(mlp_.depth() - 1).weight(); }
  Mlp& mlp() { return mlp_; }
  int input_dim() const { return mlp_.in_dim(); }
  int output_dim() const { return mlp_.out_dim(); }

 private:
  Mlp mlp_;
};

/// max(|a-p|^2 - |a-n|^2 + margin, 0).
double triplet_loss(const Vector& a, const Vector& p, const Vector& n, double margin);

struct TripletGrad {
  double value = 0.0;
  Vector da, dp, dn;  // zero when the hinge is inactive
};
TripletGrad triplet_loss_grad(const Vector& a, const Vector& p, const Vector& n, double margin);

struct EmbeddingLossConfig {
  double margin = 1.0;
  double l2 = 5e-4;
};

struct EmbeddingLossTerms {
  double total = 0.0;
  double triplet = 0.0;    // batch mean of both hinge terms
  double alignment = 0.0;  // batch mean of |u_t - u_i|^2
  double l2 = 0.0;
  Batch d_image;  // dL/du_image, same shape as the input
  Batch d_text;
};

/// Mean over anchors x of
///   L_t(u_ix, u_tx, u_ty) + L_t(u_ix, u_tx, u_iy) + |u_tx - u_ix|^2
/// plus l2 * sum of squares of `regularized` (the embedders' output weights).
/// Column j of u_image/u_text is item j; anchors[k] is paired with
/// negatives[k]. With `with_grad`, fills d_image/d_text and accumulates the
/// L2 gradient into the regularized params.
EmbeddingLossTerms embedding_loss(const Batch& u_image, const Batch& u_text, std::span<const std::size_t> anchors,
                                  std::span<const std::size_t> negatives, const EmbeddingLossConfig& config,
                                  std::span<Param* const> regularized, bool with_grad);

/// q = e_t(f_t(text)). Throws kInvalidQuery for empty or blank text.
Vector embed_query(const std::string& text, const TextBackbone& text_encoder, const Embedder& text_embedder);

}  // namespace outfit
