#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace outfit {

/// Parameter storage. Row-major so the checkpoint payload is a plain memcpy.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Activations: one column per sample.
using Batch = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseBatch = Eigen::SparseMatrix<double>;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

class Rng;

/// He-normal initialization scaled by fan-in.
void init_he(Param& p, Eigen::Index fan_in, Rng& rng);

/// y = W x + b.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out);

  int in_dim() const { return static_cast<int>(weight_.value.cols()); }
  int out_dim() const { return static_cast<int>(weight_.value.rows()); }

  Batch forward(const Batch& x) const;
  Batch forward(const SparseBatch& x) const;
  /// Accumulates dW, db; returns dx.
  Batch backward(const Batch& x, const Batch& dy);
  void backward(const SparseBatch& x, const Batch& dy);

  void init(Rng& rng);
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }
  const Param& weight() const { return weight_; }
  const Param& bias() const { return bias_; }

 private:
  Param weight_;
  Param bias_;
};

/// Linear layers with ReLU between them (none after the last).
class Mlp {
 public:
  struct Cache {
    std::vector<Batch> inputs;  // input of each layer
  };

  Mlp() = default;
  /// widths = {in, hidden..., out}.
  Mlp(const std::string& name, const std::vector<int>& widths);

  Batch forward(const Batch& x, Cache* cache = nullptr) const;
  Batch backward(const Cache& cache, const Batch& dy);

  void init(Rng& rng);
  void collect(std::vector<Param*>& out);
  void collect(std::vector<const Param*>& out) const;

  std::size_t depth() const { return layers_.size(); }
  Linear& layer(std::size_t i) { return layers_[i]; }
  const Linear& layer(std::size_t i) const { return layers_[i]; }
  int in_dim() const { return layers_.front().in_dim(); }
  int out_dim() const { return layers_.back().out_dim(); }

 private:
  std::vector<Linear> layers_;
};

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  /// One bias-corrected update. The parameter list must be the same (same
  /// order, same shapes) on every call.
  void step(std::span<Param* const> params);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

inline Batch relu(const Batch& x) { return x.cwiseMax(0.0); }

/// Zeroes gradient entries where the pre-activation was not positive.
inline Batch relu_backward(const Batch& pre, const Batch& dy) {
  return (pre.array() > 0.0).select(dy, 0.0);
}

}  // namespace outfit
