#pragma once

#include "emgkin/neural/layers.hpp"
#include "emgkin/neural/network.hpp"
#include "emgkin/neural/train.hpp"
#include "emgkin/random.hpp"

#include "helpers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace testutil {

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-8});
  return (a - b).norm() / scale;
}

struct GradCheck {
  std::string what;
  double max_rel_error = 0.0;
};

// Central differences of L = huber(net(x), y) with respect to every
// parameter and the input, compared with backprop. Dropout is off.
inline GradCheck check_network(emgkin::neural::Network& net, const emgkin::neural::Seq& x,
                               const Eigen::MatrixXd& y, double delta, double h = 1e-6) {
  using namespace emgkin::neural;
  const auto loss = [&](const Seq& in) { return huber_loss(net.predict(in), y, delta).loss; };

  Network::Tape tape;
  const Eigen::MatrixXd out = net.forward(x, ForwardMode{}, &tape);
  const HuberResult hr = huber_loss(out, y, delta);
  const Network::Gradients g = net.backward(hr.grad, tape);

  GradCheck res;
  auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Eigen::MatrixXd& w = *params[p];
    Eigen::MatrixXd num(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double orig = w.data()[i];
      w.data()[i] = orig + h;
      const double lp = loss(x);
      w.data()[i] = orig - h;
      const double lm = loss(x);
      w.data()[i] = orig;
      num.data()[i] = (lp - lm) / (2.0 * h);
    }
    res.max_rel_error = std::max(res.max_rel_error, relative_error(g.params[p], num));
  }
  Seq xm = x;
  for (std::size_t t = 0; t < x.size(); ++t) {
    Eigen::MatrixXd num(x[t].rows(), x[t].cols());
    for (Eigen::Index i = 0; i < x[t].size(); ++i) {
      const double orig = xm[t].data()[i];
      xm[t].data()[i] = orig + h;
      const double lp = loss(xm);
      xm[t].data()[i] = orig - h;
      const double lm = loss(xm);
      xm[t].data()[i] = orig;
      num.data()[i] = (lp - lm) / (2.0 * h);
    }
    res.max_rel_error = std::max(res.max_rel_error, relative_error(g.input[t], num));
  }
  return res;
}

inline emgkin::neural::Seq random_seq(Eigen::Index steps, Eigen::Index batch, Eigen::Index dim,
                                      emgkin::Rng& rng) {
  emgkin::neural::Seq x;
  for (Eigen::Index t = 0; t < steps; ++t) x.push_back(randn(batch, dim, rng));
  return x;
}

// Randomises every parameter (biases included) so no gradient is trivially zero.
inline void randomize(emgkin::neural::Network& net, emgkin::Rng& rng, double scale = 0.5) {
  for (auto* p : net.parameters()) *p = scale * randn(p->rows(), p->cols(), rng);
}

// One of four small architectures chosen by `variant`, random sizes.
inline GradCheck random_config(int variant, std::uint64_t seed) {
  using namespace emgkin::neural;
  emgkin::Rng rng(seed);
  const auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.below(hi - lo + 1)); };
  const Eigen::Index in = pick(2, 5), out = pick(2, 4), batch = pick(1, 4);
  Network net;
  Eigen::Index steps = 1;
  std::string what;
  switch (variant % 4) {
    case 0: {
      const Eigen::Index hid = pick(2, 6);
      net.add(std::make_unique<Dense>(in, hid, Activation::kTanh));
      net.add(std::make_unique<Dense>(hid, out, Activation::kLinear));
      what = "dense";
      break;
    }
    case 1: {
      const Eigen::Index units = pick(2, 5);
      steps = pick(2, 5);
      net.add(std::make_unique<Gru>(in, units));
      net.add(std::make_unique<LastStep>(units));
      net.add(std::make_unique<Dense>(units, out, Activation::kLinear));
      what = "gru";
      break;
    }
    case 2: {
      const Eigen::Index hid = pick(2, 6);
      net.add(std::make_unique<Dense>(in, hid, Activation::kTanh));
      net.add(std::make_unique<Dropout>(hid, 0.3));
      net.add(std::make_unique<Dense>(hid, out, Activation::kLinear));
      what = "dropout";
      break;
    }
    default: {
      const Eigen::Index d = pick(2, 4), u1 = pick(2, 4), u2 = pick(2, 4);
      steps = pick(2, 4);
      net.add(std::make_unique<Dense>(in, d, Activation::kTanh));
      net.add(std::make_unique<Gru>(d, u1));
      net.add(std::make_unique<Dropout>(u1, 0.2));
      net.add(std::make_unique<Gru>(u1, u2));
      net.add(std::make_unique<LastStep>(u2));
      net.add(std::make_unique<Dense>(u2, out, Activation::kTanh));
      what = "stack";
      break;
    }
  }
  randomize(net, rng);
  const Seq x = random_seq(steps, batch, in, rng);
  // targets spread so that both Huber branches are exercised
  const Eigen::MatrixXd y = 1.5 * randn(batch, out, rng);
  GradCheck r = check_network(net, x, y, 0.5);
  r.what = what;
  return r;
}

}  // namespace testutil
