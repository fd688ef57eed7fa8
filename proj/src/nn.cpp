#include "outfit/nn.hpp"

#include <cmath>

#include "outfit/error.hpp"
#include "outfit/rng.hpp"

namespace outfit {

void init_he(Param& p, Eigen::Index fan_in, Rng& rng) {
  const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.normal() * scale;
}

Linear::Linear(const std::string& name, int in, int out)
    : weight_(name + ".weight", out, in), bias_(name + ".bias", out, 1) {}

void Linear::init(Rng& rng) {
  init_he(weight_, weight_.value.cols(), rng);
  bias_.value.setZero();
}

Batch Linear::forward(const Batch& x) const {
  if (x.rows() != weight_.value.cols()) {
    throw Error(ErrorKind::kShape, weight_.name + ": expected input dim " + std::to_string(weight_.value.cols()) +
                                       ", got " + std::to_string(x.rows()));
  }
  Batch y = weight_.value * x;
  y.colwise() += bias_.value.col(0);
  return y;
}

Batch Linear::forward(const SparseBatch& x) const {
  if (x.rows() != weight_.value.cols()) {
    throw Error(ErrorKind::kShape, weight_.name + ": expected input dim " + std::to_string(weight_.value.cols()) +
                                       ", got " + std::to_string(x.rows()));
  }
  Batch y = weight_.value * x;
  y.colwise() += bias_.value.col(0);
  return y;
}

Batch Linear::backward(const Batch& x, const Batch& dy) {
  weight_.grad.noalias() += dy * x.transpose();
  bias_.grad.col(0) += dy.rowwise().sum();
  return weight_.value.transpose() * dy;
}

void Linear::backward(const SparseBatch& x, const Batch& dy) {
  weight_.grad += dy * x.transpose();
  bias_.grad.col(0) += dy.rowwise().sum();
}

Mlp::Mlp(const std::string& name, const std::vector<int>& widths) {
  if (widths.size() < 2) throw Error(ErrorKind::kConfig, name + ": an MLP needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.emplace_back(name + ".fc" + std::to_string(i + 1), widths[i], widths[i + 1]);
  }
}

void Mlp::init(Rng& rng) {
  for (auto& l : layers_) l.init(rng);
}

Batch Mlp::forward(const Batch& x, Cache* cache) const {
  if (cache) cache->inputs.clear();
  Batch h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (cache) cache->inputs.push_back(h);
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

Batch Mlp::backward(const Cache& cache, const Batch& dy) {
  Batch grad = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i + 1 < layers_.size()) {
      // The ReLU input of layer i+1 is the output of layer i, which is
      // positive exactly where the cached input of layer i+1 is positive.
      grad = relu_backward(cache.inputs[i + 1], grad);
    }
    grad = layers_[i].backward(cache.inputs[i], grad);
  }
  return grad;
}

void Mlp::collect(std::vector<Param*>& out) {
  for (auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
}

void Mlp::collect(std::vector<const Param*>& out) const {
  for (const auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
}

void Adam::step(std::span<Param* const> params) {
  if (m_.empty()) {
    for (const Param* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw Error(ErrorKind::kShape, "optimizer parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= config_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

}  // namespace outfit
