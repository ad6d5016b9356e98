#pragma once

#include "emgkin/random.hpp"

#include <Eigen/Core>

#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace emgkin::neural {

// Time-major activations: one [batch x features] matrix per time step.
// Non-recurrent inputs are sequences of length 1.
using Seq = std::vector<Eigen::MatrixXd>;

enum class Activation { kLinear, kTanh };
enum class LayerKind { kDense, kGru, kDropout, kLastStep };

std::string_view to_string(Activation a);
std::string_view to_string(LayerKind k);

struct ForwardMode {
  bool training = false;  // enables dropout
  Rng* rng = nullptr;     // required when training with dropout
};

struct LayerCache {
  virtual ~LayerCache() = default;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;

  // Records into *cache when non-null so that backward() can run.
  virtual Seq forward(const Seq& x, const ForwardMode& mode,
                      std::unique_ptr<LayerCache>* cache) const = 0;

  // Accumulates parameter gradients (same order as params()) and returns
  // the gradient with respect to the input sequence.
  virtual Seq backward(const Seq& grad_out, const LayerCache& cache,
                       std::span<Eigen::MatrixXd> param_grads) const = 0;

  virtual std::vector<Eigen::MatrixXd*> params() { return {}; }
  std::vector<const Eigen::MatrixXd*> params() const;

  virtual std::unique_ptr<Layer> clone() const = 0;
};

// Affine map applied independently at every time step.
class Dense final : public Layer {
 public:
  Dense(Eigen::Index in, Eigen::Index out, Activation act);

  LayerKind kind() const override { return LayerKind::kDense; }
  Eigen::Index input_dim() const override { return weight_.rows(); }
  Eigen::Index output_dim() const override { return weight_.cols(); }
  Activation activation() const { return act_; }

  Seq forward(const Seq& x, const ForwardMode& mode,
              std::unique_ptr<LayerCache>* cache) const override;
  Seq backward(const Seq& grad_out, const LayerCache& cache,
               std::span<Eigen::MatrixXd> param_grads) const override;
  std::vector<Eigen::MatrixXd*> params() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  Eigen::MatrixXd& weight() { return weight_; }
  Eigen::MatrixXd& bias() { return bias_; }

 private:
  Eigen::MatrixXd weight_;  // [in x out]
  Eigen::MatrixXd bias_;    // [1 x out]
  Activation act_;
};

// Gated recurrent unit with the reset gate applied after the recurrent
// projection:
//   z = sigmoid(x Wz + bz + h Uz + rbz)
//   r = sigmoid(x Wr + br + h Ur + rbr)
//   n = tanh(x Wn + bn + r * (h Un + rbn))
//   h' = z * h + (1 - z) * n
// Kernels are packed [z | r | n] along columns.
class Gru final : public Layer {
 public:
  Gru(Eigen::Index in, Eigen::Index units);

  LayerKind kind() const override { return LayerKind::kGru; }
  Eigen::Index input_dim() const override { return kernel_.rows(); }
  Eigen::Index output_dim() const override { return units_; }
  Eigen::Index units() const { return units_; }

  Seq forward(const Seq& x, const ForwardMode& mode,
              std::unique_ptr<LayerCache>* cache) const override;
  Seq backward(const Seq& grad_out, const LayerCache& cache,
               std::span<Eigen::MatrixXd> param_grads) const override;
  std::vector<Eigen::MatrixXd*> params() override {
    return {&kernel_, &recurrent_, &bias_, &recurrent_bias_};
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Gru>(*this); }

  // Forward with an explicit initial state [batch x units]; returns all
  // hidden states. Inference only.
  Seq run(const Seq& x, const Eigen::MatrixXd& h0) const;

  Eigen::MatrixXd& kernel() { return kernel_; }
  Eigen::MatrixXd& recurrent() { return recurrent_; }
  Eigen::MatrixXd& bias() { return bias_; }
  Eigen::MatrixXd& recurrent_bias() { return recurrent_bias_; }

 private:
  Seq forward_impl(const Seq& x, const Eigen::MatrixXd& h0, std::unique_ptr<LayerCache>* cache) const;

  Eigen::Index units_;
  Eigen::MatrixXd kernel_;          // [in x 3u]
  Eigen::MatrixXd recurrent_;       // [u x 3u]
  Eigen::MatrixXd bias_;            // [1 x 3u]
  Eigen::MatrixXd recurrent_bias_;  // [1 x 3u]
};

// Inverted dropout; identity outside training.
class Dropout final : public Layer {
 public:
  Dropout(Eigen::Index dim, double rate);

  LayerKind kind() const override { return LayerKind::kDropout; }
  Eigen::Index input_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return dim_; }
  double rate() const { return rate_; }

  Seq forward(const Seq& x, const ForwardMode& mode,
              std::unique_ptr<LayerCache>* cache) const override;
  Seq backward(const Seq& grad_out, const LayerCache& cache,
               std::span<Eigen::MatrixXd> param_grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

 private:
  Eigen::Index dim_;
  double rate_;
};

// Keeps only the final time step (many-to-one).
class LastStep final : public Layer {
 public:
  explicit LastStep(Eigen::Index dim) : dim_(dim) {}

  LayerKind kind() const override { return LayerKind::kLastStep; }
  Eigen::Index input_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return dim_; }

  Seq forward(const Seq& x, const ForwardMode& mode,
              std::unique_ptr<LayerCache>* cache) const override;
  Seq backward(const Seq& grad_out, const LayerCache& cache,
               std::span<Eigen::MatrixXd> param_grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LastStep>(*this); }

 private:
  Eigen::Index dim_;
};

// Glorot-uniform fill: U(-l, l), l = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Eigen::MatrixXd& m, Rng& rng);

}  // namespace emgkin::neural
