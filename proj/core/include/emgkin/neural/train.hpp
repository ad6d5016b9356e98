#pragma once

#include "emgkin/neural/network.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace emgkin::neural {

struct HuberResult {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // d loss / d pred
};

// Mean Huber loss over all elements.
HuberResult huber_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, double delta);

struct TrainConfig {
  double learning_rate = 2e-4;
  std::size_t batch_size = 256;
  double clip_norm = 1.0;
  std::size_t patience = 20;
  double huber_delta = 1.0;
  double dropout = 0.10;
  std::size_t max_epochs = 500;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool shuffle = true;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::vector<double> raw_grad_norms;      // per step, before clipping
  std::vector<double> applied_grad_norms;  // per step, after clipping
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

// Time-major inputs with one target row per sample.
struct Dataset {
  Seq inputs;               // each [n x feat]
  Eigen::MatrixXd targets;  // [n x out]

  Eigen::Index size() const { return targets.rows(); }
};

// Mini-batch Adam with global-norm clipping and early stopping on the
// validation Huber loss. `net` ends holding the best-validation weights.
TrainingLog train(Network& net, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg);

// Huber loss of the network in inference mode.
double evaluate_loss(const Network& net, const Dataset& data, double delta,
                     std::size_t batch_size = 1024);

// Inference in batches.
Eigen::MatrixXd predict_batched(const Network& net, const Seq& inputs,
                                std::size_t batch_size = 1024);

}  // namespace emgkin::neural
