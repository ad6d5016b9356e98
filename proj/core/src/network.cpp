#include "emgkin/neural/network.hpp"

#include "emgkin/error.hpp"

#include <string>

namespace emgkin::neural {

Network::Network(const Network& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

void Network::add(std::unique_ptr<Layer> layer) {
  if (!layers_.empty() && layers_.back()->output_dim() != layer->input_dim()) {
    throw Error(ErrorKind::kShapeMismatch,
                "layer input " + std::to_string(layer->input_dim()) +
                    " does not chain from previous output " +
                    std::to_string(layers_.back()->output_dim()));
  }
  layers_.push_back(std::move(layer));
}

Eigen::Index Network::input_dim() const { return layers_.empty() ? 0 : layers_.front()->input_dim(); }
Eigen::Index Network::output_dim() const { return layers_.empty() ? 0 : layers_.back()->output_dim(); }

Eigen::MatrixXd Network::forward(const Seq& x, const ForwardMode& mode, Tape* tape) const {
  if (layers_.empty()) throw Error(ErrorKind::kInvalidInput, "network has no layers");
  if (tape) {
    tape->caches.clear();
    tape->caches.resize(layers_.size());
  }
  Seq h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i]->forward(h, mode, tape ? &tape->caches[i] : nullptr);
  }
  if (h.size() != 1) {
    throw Error(ErrorKind::kShapeMismatch, "network must end in a single time step");
  }
  return h.front();
}

Network::Gradients Network::backward(const Eigen::MatrixXd& grad_out, const Tape& tape) const {
  Gradients g;
  std::vector<std::size_t> offsets;
  for (const auto& l : layers_) {
    offsets.push_back(g.params.size());
    for (const auto* p : std::as_const(*l).params()) {
      g.params.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  Seq grad{grad_out};
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const std::size_t n_params = std::as_const(*layers_[i]).params().size();
    std::span<Eigen::MatrixXd> pg(g.params.data() + offsets[i], n_params);
    grad = layers_[i]->backward(grad, *tape.caches[i], pg);
  }
  g.input = std::move(grad);
  return g;
}

std::vector<Eigen::MatrixXd*> Network::parameters() {
  std::vector<Eigen::MatrixXd*> out;
  for (auto& l : layers_) {
    for (auto* p : l->params()) out.push_back(p);
  }
  return out;
}

std::vector<const Eigen::MatrixXd*> Network::parameters() const {
  std::vector<const Eigen::MatrixXd*> out;
  for (const auto& l : layers_) {
    for (const auto* p : std::as_const(*l).params()) out.push_back(p);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

std::vector<Eigen::MatrixXd> Network::snapshot() const {
  std::vector<Eigen::MatrixXd> out;
  for (const auto* p : parameters()) out.push_back(*p);
  return out;
}

void Network::restore(const std::vector<Eigen::MatrixXd>& weights) {
  auto params = parameters();
  if (params.size() != weights.size()) {
    throw Error(ErrorKind::kShapeMismatch, "weight snapshot does not match the network");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != weights[i].rows() || params[i]->cols() != weights[i].cols()) {
      throw Error(ErrorKind::kShapeMismatch, "weight tensor " + std::to_string(i) + " has the wrong shape");
    }
    *params[i] = weights[i];
  }
}

void initialize(Network& net, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& l : net.layers()) {
    if (auto* d = dynamic_cast<Dense*>(l.get())) {
      glorot_uniform(d->weight(), rng);
      d->bias().setZero();
    } else if (auto* g = dynamic_cast<Gru*>(l.get())) {
      glorot_uniform(g->kernel(), rng);
      glorot_uniform(g->recurrent(), rng);
      g->bias().setZero();
      g->recurrent_bias().setZero();
    }
  }
}

Network build_trr(Eigen::Index feat_dim, Eigen::Index n_joints, std::uint64_t seed,
                  const TrrShape& shape) {
  if (feat_dim < 1 || n_joints < 1) {
    throw Error(ErrorKind::kInvalidInput, "feature and output dims must be >= 1");
  }
  Network net;
  net.add(std::make_unique<Dense>(feat_dim, shape.dense_units, Activation::kTanh));
  net.add(std::make_unique<Gru>(shape.dense_units, shape.gru1_units));
  net.add(std::make_unique<Dropout>(shape.gru1_units, shape.dropout));
  net.add(std::make_unique<Gru>(shape.gru1_units, shape.gru2_units));
  net.add(std::make_unique<Dropout>(shape.gru2_units, shape.dropout));
  net.add(std::make_unique<LastStep>(shape.gru2_units));
  net.add(std::make_unique<Dense>(shape.gru2_units, shape.head_units, Activation::kTanh));
  net.add(std::make_unique<Dense>(shape.head_units, n_joints, Activation::kLinear));
  initialize(net, seed);
  return net;
}

std::size_t trr_parameter_count(Eigen::Index feat_dim, Eigen::Index n_joints,
                                const TrrShape& shape) {
  const auto dense = [](Eigen::Index in, Eigen::Index out) { return in * out + out; };
  const auto gru = [](Eigen::Index in, Eigen::Index u) { return 3 * (in * u + u * u + 2 * u); };
  return static_cast<std::size_t>(dense(feat_dim, shape.dense_units) +
                                  gru(shape.dense_units, shape.gru1_units) +
                                  gru(shape.gru1_units, shape.gru2_units) +
                                  dense(shape.gru2_units, shape.head_units) +
                                  dense(shape.head_units, n_joints));
}

Network build_mlp(Eigen::Index input_dim, Eigen::Index n_joints, std::uint64_t seed,
                  const std::vector<Eigen::Index>& hidden) {
  if (input_dim < 1 || n_joints < 1) {
    throw Error(ErrorKind::kInvalidInput, "input and output dims must be >= 1");
  }
  Network net;
  Eigen::Index prev = input_dim;
  for (Eigen::Index h : hidden) {
    net.add(std::make_unique<Dense>(prev, h, Activation::kTanh));
    prev = h;
  }
  net.add(std::make_unique<Dense>(prev, n_joints, Activation::kLinear));
  initialize(net, seed);
  return net;
}

Seq to_seq(const std::vector<Eigen::MatrixXd>& samples) {
  if (samples.empty()) return {};
  const auto len = samples.front().rows();
  const auto feat = samples.front().cols();
  const auto n = static_cast<Eigen::Index>(samples.size());
  Seq out(static_cast<std::size_t>(len), Eigen::MatrixXd(n, feat));
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& s = samples[static_cast<std::size_t>(b)];
    if (s.rows() != len || s.cols() != feat) {
      throw Error(ErrorKind::kShapeMismatch, "samples in a batch differ in shape");
    }
    for (Eigen::Index t = 0; t < len; ++t) out[static_cast<std::size_t>(t)].row(b) = s.row(t);
  }
  return out;
}

Seq to_flat_seq(const std::vector<Eigen::MatrixXd>& samples) {
  if (samples.empty()) return {};
  const auto len = samples.front().rows();
  const auto feat = samples.front().cols();
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd flat(n, len * feat);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& s = samples[static_cast<std::size_t>(b)];
    if (s.rows() != len || s.cols() != feat) {
      throw Error(ErrorKind::kShapeMismatch, "samples in a batch differ in shape");
    }
    for (Eigen::Index t = 0; t < len; ++t) flat.row(b).segment(t * feat, feat) = s.row(t);
  }
  return {flat};
}

Seq gather(const Seq& x, const std::vector<Eigen::Index>& idx) {
  Seq out;
  out.reserve(x.size());
  for (const auto& m : x) out.push_back(m(idx, Eigen::all));
  return out;
}

}  // namespace emgkin::neural
