#include "outfit/compatibility.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "outfit/error.hpp"

namespace outfit {

TransformSet parse_transforms(std::string_view list) {
  TransformSet set = 0;
  std::string item;
  std::stringstream ss{std::string(list)};
  while (std::getline(ss, item, ',')) {
    if (item == "dot") set |= kDot;
    else if (item == "sum") set |= kSum;
    else if (item == "diff") set |= kDiff;
    else if (item == "all") set |= kAllTransforms;
    else if (!item.empty()) throw Error(ErrorKind::kConfig, "unknown pair transform '" + item + "'", {item});
  }
  if (set == 0) throw Error(ErrorKind::kConfig, "at least one pair transform is required");
  return set;
}

std::string to_string_transforms(TransformSet set) {
  std::string out;
  auto add = [&](const char* name) { out += out.empty() ? name : std::string(",") + name; };
  if (set & kDot) add("dot");
  if (set & kSum) add("sum");
  if (set & kDiff) add("diff");
  return out;
}

int transform_count(TransformSet set) {
  return ((set & kDot) ? 1 : 0) + ((set & kSum) ? 1 : 0) + ((set & kDiff) ? 1 : 0);
}

std::string_view to_string(CompatMode mode) {
  switch (mode) {
    case CompatMode::kImage: return "image";
    case CompatMode::kText: return "text";
    case CompatMode::kCat: return "cat";
  }
  return "cat";
}

CompatMode parse_compat_mode(std::string_view name) {
  if (name == "image") return CompatMode::kImage;
  if (name == "text") return CompatMode::kText;
  if (name == "cat") return CompatMode::kCat;
  throw Error(ErrorKind::kConfig, "unknown compatibility mode '" + std::string(name) + "'", {std::string(name)});
}

Batch pair_transform(const Batch& a, const Batch& b, TransformSet set) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorKind::kShape, "pair_transform: dimension mismatch");
  const Eigen::Index d = a.rows();
  Batch out(d * transform_count(set), a.cols());
  Eigen::Index row = 0;
  if (set & kDot) {
    out.middleRows(row, d) = a.cwiseProduct(b);
    row += d;
  }
  if (set & kSum) {
    out.middleRows(row, d) = a + b;
    row += d;
  }
  if (set & kDiff) {
    out.middleRows(row, d) = (a - b).cwiseAbs2();
  }
  return out;
}

Vector pair_transform(const Vector& a, const Vector& b, TransformSet set) {
  return pair_transform(Batch(a), Batch(b), set).col(0);
}

void pair_transform_backward(const Batch& a, const Batch& b, const Batch& d_joint, TransformSet set, Batch& da,
                             Batch& db) {
  const Eigen::Index d = a.rows();
  Eigen::Index row = 0;
  if (set & kDot) {
    const auto g = d_joint.middleRows(row, d);
    da += g.cwiseProduct(b);
    db += g.cwiseProduct(a);
    row += d;
  }
  if (set & kSum) {
    const auto g = d_joint.middleRows(row, d);
    da += g;
    db += g;
    row += d;
  }
  if (set & kDiff) {
    const Batch g = 2.0 * d_joint.middleRows(row, d).cwiseProduct(a - b);
    da += g;
    db -= g;
  }
}

Discriminator::Discriminator(const std::string& name, int feature_dim, TransformSet transforms, int hidden1,
                             int hidden2)
    : mlp_(name, {feature_dim * transform_count(transforms), hidden1, hidden2, 1}),
      transforms_(transforms),
      feature_dim_(feature_dim) {}

namespace {

// Keeps scores strictly inside (0, 1) even when the logit saturates.
constexpr double kScoreFloor = 1e-12;

double sigmoid(double z) {
  const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(p, kScoreFloor, 1.0 - kScoreFloor);
}

}  // namespace

Batch Discriminator::score(const Batch& x, const Batch& y, Cache* cache) const {
  if (x.rows() != feature_dim_) {
    throw Error(ErrorKind::kShape, "discriminator expects features of dim " + std::to_string(feature_dim_) + ", got " +
                                       std::to_string(x.rows()));
  }
  const Batch joint = pair_transform(x, y, transforms_);
  const Batch logits = mlp_.forward(joint, cache ? &cache->mlp : nullptr);
  Batch p = logits.unaryExpr([](double z) { return sigmoid(z); });
  if (cache) cache->probabilities = p;
  return p;
}

double Discriminator::score(const Vector& x, const Vector& y) const { return score(Batch(x), Batch(y))(0, 0); }

void Discriminator::backward(const Batch& x, const Batch& y, const Cache& cache, const Batch& d_logits, Batch& dx,
                             Batch& dy) {
  const Batch d_joint = mlp_.backward(cache.mlp, d_logits);
  dx = Batch::Zero(x.rows(), x.cols());
  dy = Batch::Zero(y.rows(), y.cols());
  pair_transform_backward(x, y, d_joint, transforms_, dx, dy);
}

BceResult bce_loss(const Batch& probabilities, std::span<const int> labels, bool with_grad, double epsilon) {
  if (labels.empty()) throw Error(ErrorKind::kConfig, "bce_loss: empty batch");
  if (static_cast<std::size_t>(probabilities.size()) != labels.size()) {
    throw Error(ErrorKind::kShape, "bce_loss: scores/labels size mismatch");
  }
  BceResult out;
  if (with_grad) out.d_logits = Batch::Zero(1, probabilities.size());
  const double inv = 1.0 / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probabilities(0, static_cast<Eigen::Index>(i));
    const int y = labels[i];
    if (y != 0 && y != 1) throw Error(ErrorKind::kConfig, "bce_loss: labels must be 0 or 1");
    const double pc = std::clamp(p, epsilon, 1.0 - epsilon);
    out.loss -= inv * (y ? std::log(pc) : std::log(1.0 - pc));
    if (with_grad && p > epsilon && p < 1.0 - epsilon) {
      out.d_logits(0, static_cast<Eigen::Index>(i)) = inv * (p - y);
    }
  }
  return out;
}

double balanced_accuracy(std::span<const double> scores, std::span<const int> labels, double theta) {
  double tp = 0, tn = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= theta;
    if (labels[i]) {
      ++pos;
      tp += predicted;
    } else {
      ++neg;
      tn += !predicted;
    }
  }
  return 0.5 * (tp / pos + tn / neg);
}

Threshold select_threshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error(ErrorKind::kConfig, "select_threshold: need equally sized, non-empty scores and labels");
  }
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    throw Error(ErrorKind::kConfig, "select_threshold: both classes are required");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> candidates = {sorted.front()};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  Threshold best{candidates.front(), -1.0};
  for (double theta : candidates) {
    const double ba = balanced_accuracy(scores, labels, theta);
    if (ba > best.balanced_accuracy) best = {theta, ba};
  }
  return best;
}

}  // namespace outfit
