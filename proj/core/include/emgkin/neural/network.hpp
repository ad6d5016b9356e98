#pragma once

#include "emgkin/neural/layers.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <vector>

namespace emgkin::neural {

// Ordered stack of layers ending in a length-1 sequence. Copies are deep.
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void add(std::unique_ptr<Layer> layer);

  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  bool empty() const { return layers_.empty(); }

  struct Tape {
    std::vector<std::unique_ptr<LayerCache>> caches;
  };

  // Output [batch x output_dim]. Fills `tape` when non-null.
  Eigen::MatrixXd forward(const Seq& x, const ForwardMode& mode, Tape* tape = nullptr) const;

  // Inference: dropout off, no caches. Thread-safe on a const network.
  Eigen::MatrixXd predict(const Seq& x) const { return forward(x, ForwardMode{}, nullptr); }

  struct Gradients {
    std::vector<Eigen::MatrixXd> params;  // aligned with parameters()
    Seq input;
  };

  Gradients backward(const Eigen::MatrixXd& grad_out, const Tape& tape) const;

  std::vector<Eigen::MatrixXd*> parameters();
  std::vector<const Eigen::MatrixXd*> parameters() const;
  std::size_t parameter_count() const;

  std::vector<Eigen::MatrixXd> snapshot() const;
  void restore(const std::vector<Eigen::MatrixXd>& weights);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct TrrShape {
  Eigen::Index dense_units = 256;
  Eigen::Index gru1_units = 256;
  Eigen::Index gru2_units = 128;
  Eigen::Index head_units = 64;
  double dropout = 0.10;
};

// dense(tanh) -> GRU -> dropout -> GRU -> dropout -> last step ->
// dense(tanh) -> linear output. Glorot-uniform kernels, zero biases.
Network build_trr(Eigen::Index feat_dim, Eigen::Index n_joints, std::uint64_t seed,
                  const TrrShape& shape = {});

// Closed-form parameter count of build_trr.
std::size_t trr_parameter_count(Eigen::Index feat_dim, Eigen::Index n_joints,
                                 const TrrShape& shape = {});

// Fully connected tanh stack on a flattened input, linear output.
Network build_mlp(Eigen::Index input_dim, Eigen::Index n_joints, std::uint64_t seed,
                  const std::vector<Eigen::Index>& hidden = {256, 256, 128, 64});

// Initializes every kernel Glorot-uniform and zeroes biases, in layer order.
void initialize(Network& net, std::uint64_t seed);

// ---- data layout helpers ------------------------------------------------------

// Batch of per-sample [seq_len x feat] matrices -> time-major Seq.
Seq to_seq(const std::vector<Eigen::MatrixXd>& samples);

// Batch of per-sample matrices flattened row by row into one step.
Seq to_flat_seq(const std::vector<Eigen::MatrixXd>& samples);

// Rows `idx` of every step.
Seq gather(const Seq& x, const std::vector<Eigen::Index>& idx);

}  // namespace emgkin::neural
