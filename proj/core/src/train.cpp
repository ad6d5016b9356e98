#include "emgkin/neural/train.hpp"

#include "emgkin/error.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace emgkin::neural {

HuberResult huber_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, double delta) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "huber: prediction and target shapes differ");
  }
  const auto count = static_cast<double>(pred.size());
  const Eigen::ArrayXXd e = (pred - target).array();
  const Eigen::ArrayXXd a = e.abs();
  const Eigen::ArrayXXd per =
      (a <= delta).select(0.5 * e.square(), delta * (a - 0.5 * delta));
  HuberResult out;
  out.loss = count > 0 ? per.sum() / count : 0.0;
  out.grad = (e.max(-delta).min(delta) / count).matrix();
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || batch_size == 0 || !(clip_norm > 0.0) || patience < 1 ||
      !(huber_delta > 0.0) || max_epochs == 0 || !(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(ErrorKind::kInvalidInput,
                "training config: rates, sizes and thresholds must be positive, patience >= 1");
  }
}

Eigen::MatrixXd predict_batched(const Network& net, const Seq& inputs, std::size_t batch_size) {
  if (inputs.empty()) return {};
  const Eigen::Index n = inputs.front().rows();
  Eigen::MatrixXd out(n, net.output_dim());
  for (Eigen::Index start = 0; start < n; start += static_cast<Eigen::Index>(batch_size)) {
    const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(batch_size), n - start);
    Seq chunk;
    chunk.reserve(inputs.size());
    for (const auto& m : inputs) chunk.push_back(m.middleRows(start, len));
    out.middleRows(start, len) = net.predict(chunk);
  }
  return out;
}

double evaluate_loss(const Network& net, const Dataset& data, double delta, std::size_t batch_size) {
  const Eigen::MatrixXd pred = predict_batched(net, data.inputs, batch_size);
  return huber_loss(pred, data.targets, delta).loss;
}

TrainingLog train(Network& net, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw Error(ErrorKind::kInvalidInput, "training and validation sets must be non-empty");
  }
  if (train_set.targets.cols() != net.output_dim() || val_set.targets.cols() != net.output_dim()) {
    throw Error(ErrorKind::kShapeMismatch, "target width does not match the network output");
  }

  Rng rng(cfg.seed);
  auto params = net.parameters();
  std::vector<Eigen::MatrixXd> m1, m2;
  for (const auto* p : params) {
    m1.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    m2.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }

  TrainingLog log;
  log.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best = net.snapshot();
  std::size_t since_best = 0;
  std::uint64_t step = 0;

  const Eigen::Index n = train_set.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
      }
    }
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += static_cast<Eigen::Index>(cfg.batch_size)) {
      const Eigen::Index len =
          std::min<Eigen::Index>(static_cast<Eigen::Index>(cfg.batch_size), n - start);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
      const Seq xb = gather(train_set.inputs, idx);
      const Eigen::MatrixXd yb = train_set.targets(idx, Eigen::all);

      Network::Tape tape;
      const Eigen::MatrixXd pred = net.forward(xb, ForwardMode{true, &rng}, &tape);
      const HuberResult h = huber_loss(pred, yb, cfg.huber_delta);
      if (!std::isfinite(h.loss)) {
        throw Error(ErrorKind::kDivergence, "training diverged: non-finite loss at epoch " +
                                                std::to_string(epoch) + ", step " +
                                                std::to_string(step + 1));
      }
      loss_sum += h.loss * static_cast<double>(len);
      auto grads = net.backward(h.grad, tape).params;

      double sq = 0.0;
      for (const auto& g : grads) sq += g.squaredNorm();
      const double norm = std::sqrt(sq);
      const double scale = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      log.raw_grad_norms.push_back(norm);
      log.applied_grad_norms.push_back(norm * scale);

      ++step;
      const double t = static_cast<double>(step);
      const double lr_t = cfg.learning_rate * std::sqrt(1.0 - std::pow(cfg.beta2, t)) /
                          (1.0 - std::pow(cfg.beta1, t));
      for (std::size_t i = 0; i < params.size(); ++i) {
        const Eigen::ArrayXXd g = grads[i].array() * scale;
        m1[i] = (cfg.beta1 * m1[i].array() + (1.0 - cfg.beta1) * g).matrix();
        m2[i] = (cfg.beta2 * m2[i].array() + (1.0 - cfg.beta2) * g.square()).matrix();
        params[i]->array() -= lr_t * m1[i].array() / (m2[i].array().sqrt() + cfg.epsilon);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.val_loss = evaluate_loss(net, val_set, cfg.huber_delta);
    if (!std::isfinite(rec.val_loss)) {
      throw Error(ErrorKind::kDivergence,
                  "training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    log.epochs.push_back(rec);

    if (rec.val_loss < log.best_val_loss) {
      log.best_val_loss = rec.val_loss;
      log.best_epoch = epoch;
      best = net.snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      log.early_stopped = true;
      break;
    }
  }
  net.restore(best);
  return log;
}

}  // namespace emgkin::neural
