#include "emgkin/neural/layers.hpp"

#include "emgkin/error.hpp"

#include <cmath>
#include <string>

namespace emgkin::neural {

namespace {

struct DenseCache : LayerCache {
  Seq input;
  Seq output;  // post-activation
};

struct GruStep {
  Eigen::MatrixXd h_prev;
  Eigen::MatrixXd z, r, n;
  Eigen::MatrixXd hu_n;  // h Un + rbn
};

struct GruCache : LayerCache {
  Seq input;
  std::vector<GruStep> steps;
};

struct DropoutCache : LayerCache {
  Seq mask;  // already scaled by 1/(1-rate); empty when inactive
};

struct LastStepCache : LayerCache {
  std::size_t length = 0;
  Eigen::Index batch = 0;
};

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) { return 1.0 / (1.0 + (-x).exp()); }

void check_seq(const Seq& x, Eigen::Index dim, std::string_view who) {
  if (x.empty()) throw Error(ErrorKind::kShapeMismatch, std::string(who) + ": empty sequence");
  const auto batch = x.front().rows();
  for (const auto& m : x) {
    if (m.cols() != dim || m.rows() != batch) {
      throw Error(ErrorKind::kShapeMismatch,
                  std::string(who) + ": expected [" + std::to_string(batch) + " x " +
                      std::to_string(dim) + "] steps, got [" + std::to_string(m.rows()) + " x " +
                      std::to_string(m.cols()) + "]");
    }
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
  }
  return "unknown";
}

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kGru: return "gru";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kLastStep: return "last_step";
  }
  return "unknown";
}

std::vector<const Eigen::MatrixXd*> Layer::params() const {
  auto mutable_params = const_cast<Layer*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

void glorot_uniform(Eigen::MatrixXd& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-limit, limit);
  }
}

// ---- Dense ------------------------------------------------------------------

Dense::Dense(Eigen::Index in, Eigen::Index out, Activation act)
    : weight_(Eigen::MatrixXd::Zero(in, out)), bias_(Eigen::MatrixXd::Zero(1, out)), act_(act) {
  if (in < 1 || out < 1) throw Error(ErrorKind::kInvalidInput, "dense layer dims must be >= 1");
}

Seq Dense::forward(const Seq& x, const ForwardMode& /*mode*/,
                   std::unique_ptr<LayerCache>* cache) const {
  check_seq(x, input_dim(), "dense");
  Seq y;
  y.reserve(x.size());
  for (const auto& xt : x) {
    Eigen::MatrixXd a = xt * weight_;
    a.rowwise() += bias_.row(0);
    if (act_ == Activation::kTanh) a = a.array().tanh().matrix();
    y.push_back(std::move(a));
  }
  if (cache) {
    auto c = std::make_unique<DenseCache>();
    c->input = x;
    c->output = y;
    *cache = std::move(c);
  }
  return y;
}

Seq Dense::backward(const Seq& grad_out, const LayerCache& cache,
                    std::span<Eigen::MatrixXd> param_grads) const {
  const auto& c = static_cast<const DenseCache&>(cache);
  Seq dx;
  dx.reserve(grad_out.size());
  for (std::size_t t = 0; t < grad_out.size(); ++t) {
    Eigen::MatrixXd da = grad_out[t];
    if (act_ == Activation::kTanh) {
      da = (da.array() * (1.0 - c.output[t].array().square())).matrix();
    }
    param_grads[0].noalias() += c.input[t].transpose() * da;
    param_grads[1] += da.colwise().sum();
    dx.push_back(da * weight_.transpose());
  }
  return dx;
}

// ---- GRU --------------------------------------------------------------------

Gru::Gru(Eigen::Index in, Eigen::Index units)
    : units_(units),
      kernel_(Eigen::MatrixXd::Zero(in, 3 * units)),
      recurrent_(Eigen::MatrixXd::Zero(units, 3 * units)),
      bias_(Eigen::MatrixXd::Zero(1, 3 * units)),
      recurrent_bias_(Eigen::MatrixXd::Zero(1, 3 * units)) {
  if (in < 1 || units < 1) throw Error(ErrorKind::kInvalidInput, "GRU dims must be >= 1");
}

Seq Gru::forward(const Seq& x, const ForwardMode& /*mode*/,
                 std::unique_ptr<LayerCache>* cache) const {
  check_seq(x, input_dim(), "gru");
  return forward_impl(x, Eigen::MatrixXd::Zero(x.front().rows(), units_), cache);
}

Seq Gru::run(const Seq& x, const Eigen::MatrixXd& h0) const {
  check_seq(x, input_dim(), "gru");
  if (h0.rows() != x.front().rows() || h0.cols() != units_) {
    throw Error(ErrorKind::kShapeMismatch, "gru: initial state has the wrong shape");
  }
  return forward_impl(x, h0, nullptr);
}

Seq Gru::forward_impl(const Seq& x, const Eigen::MatrixXd& h0,
                      std::unique_ptr<LayerCache>* cache) const {
  const Eigen::Index u = units_;
  GruCache* gc = nullptr;
  std::unique_ptr<GruCache> owned;
  if (cache) {
    owned = std::make_unique<GruCache>();
    owned->input = x;
    owned->steps.reserve(x.size());
    gc = owned.get();
  }
  Seq out;
  out.reserve(x.size());
  Eigen::MatrixXd h = h0;
  for (const auto& xt : x) {
    Eigen::MatrixXd xw = xt * kernel_;
    xw.rowwise() += bias_.row(0);
    Eigen::MatrixXd hu = h * recurrent_;
    hu.rowwise() += recurrent_bias_.row(0);

    const Eigen::ArrayXXd z = sigmoid(xw.leftCols(u).array() + hu.leftCols(u).array());
    const Eigen::ArrayXXd r = sigmoid(xw.middleCols(u, u).array() + hu.middleCols(u, u).array());
    const Eigen::ArrayXXd n = (xw.rightCols(u).array() + r * hu.rightCols(u).array()).tanh();
    Eigen::MatrixXd h_next = (z * h.array() + (1.0 - z) * n).matrix();

    if (gc) {
      gc->steps.push_back({h, z.matrix(), r.matrix(), n.matrix(), hu.rightCols(u)});
    }
    h = h_next;
    out.push_back(std::move(h_next));
  }
  if (cache) *cache = std::move(owned);
  return out;
}

Seq Gru::backward(const Seq& grad_out, const LayerCache& cache,
                  std::span<Eigen::MatrixXd> param_grads) const {
  const auto& c = static_cast<const GruCache&>(cache);
  const Eigen::Index u = units_;
  const auto len = grad_out.size();
  const Eigen::Index batch = grad_out.front().rows();

  Eigen::MatrixXd& d_kernel = param_grads[0];
  Eigen::MatrixXd& d_recurrent = param_grads[1];
  Eigen::MatrixXd& d_bias = param_grads[2];
  Eigen::MatrixXd& d_recurrent_bias = param_grads[3];

  Seq dx(len);
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(batch, u);
  Eigen::MatrixXd d_xw(batch, 3 * u);
  Eigen::MatrixXd d_hu(batch, 3 * u);
  for (std::size_t ti = len; ti-- > 0;) {
    const GruStep& s = c.steps[ti];
    const Eigen::ArrayXXd dh = (grad_out[ti] + dh_next).array();
    const Eigen::ArrayXXd z = s.z.array();
    const Eigen::ArrayXXd r = s.r.array();
    const Eigen::ArrayXXd n = s.n.array();

    const Eigen::ArrayXXd dn_pre = dh * (1.0 - z) * (1.0 - n.square());
    const Eigen::ArrayXXd dz_pre = dh * (s.h_prev.array() - n) * z * (1.0 - z);
    const Eigen::ArrayXXd dr_pre = dn_pre * s.hu_n.array() * r * (1.0 - r);

    d_xw.leftCols(u) = dz_pre.matrix();
    d_xw.middleCols(u, u) = dr_pre.matrix();
    d_xw.rightCols(u) = dn_pre.matrix();
    d_hu.leftCols(u) = dz_pre.matrix();
    d_hu.middleCols(u, u) = dr_pre.matrix();
    d_hu.rightCols(u) = (dn_pre * r).matrix();

    d_kernel.noalias() += c.input[ti].transpose() * d_xw;
    d_bias += d_xw.colwise().sum();
    dx[ti].noalias() = d_xw * kernel_.transpose();

    d_recurrent.noalias() += s.h_prev.transpose() * d_hu;
    d_recurrent_bias += d_hu.colwise().sum();
    dh_next = (dh * z).matrix();
    dh_next.noalias() += d_hu * recurrent_.transpose();
  }
  return dx;
}

// ---- Dropout ----------------------------------------------------------------

Dropout::Dropout(Eigen::Index dim, double rate) : dim_(dim), rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorKind::kInvalidInput, "dropout rate must lie in [0, 1)");
  }
}

Seq Dropout::forward(const Seq& x, const ForwardMode& mode,
                     std::unique_ptr<LayerCache>* cache) const {
  check_seq(x, dim_, "dropout");
  auto c = std::make_unique<DropoutCache>();
  Seq y = x;
  if (mode.training && rate_ > 0.0) {
    if (!mode.rng) throw Error(ErrorKind::kInvalidInput, "dropout in training needs an RNG");
    const double keep_scale = 1.0 / (1.0 - rate_);
    c->mask.reserve(x.size());
    for (auto& yt : y) {
      Eigen::MatrixXd m(yt.rows(), yt.cols());
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          m(i, j) = mode.rng->uniform() >= rate_ ? keep_scale : 0.0;
        }
      }
      yt = yt.cwiseProduct(m);
      c->mask.push_back(std::move(m));
    }
  }
  if (cache) *cache = std::move(c);
  return y;
}

Seq Dropout::backward(const Seq& grad_out, const LayerCache& cache,
                      std::span<Eigen::MatrixXd> /*param_grads*/) const {
  const auto& c = static_cast<const DropoutCache&>(cache);
  if (c.mask.empty()) return grad_out;
  Seq dx(grad_out.size());
  for (std::size_t t = 0; t < grad_out.size(); ++t) dx[t] = grad_out[t].cwiseProduct(c.mask[t]);
  return dx;
}

// ---- LastStep ---------------------------------------------------------------

Seq LastStep::forward(const Seq& x, const ForwardMode& /*mode*/,
                      std::unique_ptr<LayerCache>* cache) const {
  check_seq(x, dim_, "last_step");
  if (cache) {
    auto c = std::make_unique<LastStepCache>();
    c->length = x.size();
    c->batch = x.back().rows();
    *cache = std::move(c);
  }
  return {x.back()};
}

Seq LastStep::backward(const Seq& grad_out, const LayerCache& cache,
                       std::span<Eigen::MatrixXd> /*param_grads*/) const {
  const auto& c = static_cast<const LastStepCache&>(cache);
  Seq dx(c.length, Eigen::MatrixXd::Zero(c.batch, dim_));
  dx.back() = grad_out.front();
  return dx;
}

}  // namespace emgkin::neural
