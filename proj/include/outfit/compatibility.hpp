#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "outfit/nn.hpp"

namespace outfit {

/// Subset of the symmetric pair transforms. Concatenation order is always
/// [dot; sum; diff], whatever the subset.
enum TransformBits : unsigned { kDot = 1u, kSum = 2u, kDiff = 4u, kAllTransforms = 7u };
using TransformSet = unsigned;

TransformSet parse_transforms(std::string_view list);  // "dot,sum,diff"
std::string to_string_transforms(TransformSet set);
int transform_count(TransformSet set);

enum class CompatMode { kImage, kText, kCat };
std::string_view to_string(CompatMode mode);
CompatMode parse_compat_mode(std::string_view name);

/// dot: a*b, sum: a+b, diff: (a-b)^2, elementwise; concatenated for a set.
Vector pair_transform(const Vector& a, const Vector& b, TransformSet set);
/// Column-wise over two equally shaped batches.
Batch pair_transform(const Batch& a, const Batch& b, TransformSet set);
/// Accumulates the gradient of a transformed batch back into da, db.
void pair_transform_backward(const Batch& a, const Batch& b, const Batch& d_joint, TransformSet set, Batch& da,
                             Batch& db);

/// Fully connected, two ReLU hidden layers, sigmoid output.
class Discriminator {
 public:
  struct Cache {
    Mlp::Cache mlp;
    Batch probabilities;
  };

  Discriminator() = default;
  Discriminator(const std::string& name, int feature_dim, TransformSet transforms, int hidden1, int hidden2);

  /// Scores in (0, 1), one per column pair (1 x N).
  Batch score(const Batch& x, const Batch& y, Cache* cache = nullptr) const;
  double score(const Vector& x, const Vector& y) const;
  /// Backward from dL/dlogit; returns dL/dx, dL/dy via the pair transform.
  void backward(const Batch& x, const Batch& y, const Cache& cache, const Batch& d_logits, Batch& dx, Batch& dy);

  void init(Rng& rng) { mlp_.init(rng); }
  void collect(std::vector<Param*>& out) { mlp_.collect(out); }
  TransformSet transforms() const { return transforms_; }
  int feature_dim() const { return feature_dim_; }
  Mlp& mlp() { return mlp_; }

 private:
  Mlp mlp_;
  TransformSet transforms_ = kAllTransforms;
  int feature_dim_ = 0;
};

inline constexpr double kBceEpsilon = 1e-7;

struct BceResult {
  double loss = 0.0;
  Batch d_logits;  // 1 x N; zero where the probability was clamped
};

/// Mean of -[y log p + (1-y) log(1-p)] with p clamped to [eps, 1-eps].
BceResult bce_loss(const Batch& probabilities, std::span<const int> labels, bool with_grad,
                   double epsilon = kBceEpsilon);

struct Threshold {
  double theta = 0.5;
  double balanced_accuracy = 0.5;
};

/// Threshold maximizing balanced accuracy of (score >= theta), scanning the
/// smallest score and every midpoint between consecutive distinct scores;
/// ties keep the smallest theta.
Threshold select_threshold(std::span<const double> scores, std::span<const int> labels);

double balanced_accuracy(std::span<const double> scores, std::span<const int> labels, double theta);

}  // namespace outfit
