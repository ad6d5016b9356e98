#include "emgkin/riemann.hpp"

#include "emgkin/error.hpp"
#include "emgkin/signal/signal.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

namespace emgkin::riemann {

namespace {

std::atomic<std::uint64_t> g_clamp_count{0};

constexpr double kClampRatio = 1e-12;

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

template <typename F>
Eigen::MatrixXd apply_spectral(const Eigen::MatrixXd& m, F&& f) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::kInvalidInput, "eigendecomposition failed");
  }
  const Eigen::VectorXd mapped = es.eigenvalues().unaryExpr(f);
  Eigen::MatrixXd out = es.eigenvectors() * mapped.asDiagonal() * es.eigenvectors().transpose();
  return symmetrize(out);
}

// log of a symmetric matrix that is expected to be positive definite.
Eigen::MatrixXd log_spd_matrix(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::kInvalidInput, "eigendecomposition failed");
  }
  Eigen::VectorXd lambda = es.eigenvalues();
  const double lmax = lambda.maxCoeff();
  if (!(lambda.minCoeff() > 0.0)) {
    throw Error(ErrorKind::kNotSpd,
                "matrix has non-positive eigenvalue " + std::to_string(lambda.minCoeff()));
  }
  const double floor = kClampRatio * lmax;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < floor) {
      lambda(i) = floor;
      g_clamp_count.fetch_add(1, std::memory_order_relaxed);
    }
    lambda(i) = std::log(lambda(i));
  }
  Eigen::MatrixXd out = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  return symmetrize(out);
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

void check_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorKind::kInvalidInput, "matrix must be square and non-empty");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym < 1e-10 * scale)) {
    throw Error(ErrorKind::kInvalidInput,
                "matrix is not symmetric (max |m - m^T| = " + std::to_string(asym) + ")");
  }
}

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) {
  check_symmetric(m);
  m_ = symmetrize(m);
  const double lmin = min_eigenvalue(m_);
  if (!(lmin > 0.0)) {
    throw Error(ErrorKind::kNotSpd, "matrix is not positive definite (smallest eigenvalue " +
                                        std::to_string(lmin) + ")");
  }
}

SpdMatrix SpdMatrix::trusted(Eigen::MatrixXd m) {
  SpdMatrix out;
  out.m_ = std::move(m);
  return out;
}

std::uint64_t eigen_clamp_count() noexcept { return g_clamp_count.load(); }

double ledoit_wolf_alpha(const Eigen::MatrixXd& centered) {
  const auto p = static_cast<double>(centered.rows());
  const auto n = static_cast<double>(centered.cols());
  if (centered.rows() <= 1) return 0.0;
  // Follows the analytic estimator with X as [samples x features].
  const Eigen::MatrixXd x2 = centered.array().square().matrix();
  const Eigen::VectorXd emp_cov_trace = x2.rowwise().sum() / n;
  const double mu = emp_cov_trace.sum() / p;
  const double beta_sum = (x2 * x2.transpose()).sum();
  const Eigen::MatrixXd xtx = centered * centered.transpose();
  const double delta_sum = xtx.array().square().sum() / (n * n);
  double beta = 1.0 / (p * n) * (beta_sum / n - delta_sum);
  double delta = delta_sum - 2.0 * mu * emp_cov_trace.sum() + p * mu * mu;
  delta /= p;
  beta = std::min(beta, delta);
  if (beta <= 0.0 || delta <= 0.0) return 0.0;
  return beta / delta;
}

SpdMatrix covariance(const Eigen::MatrixXd& window, const Shrinkage& shrinkage) {
  if (window.cols() < 2 || window.rows() < 1) {
    throw Error(ErrorKind::kInsufficientData, "covariance needs at least 2 samples per channel");
  }
  const auto n_ch = window.rows();
  const Eigen::MatrixXd centered = window.colwise() - window.rowwise().mean();
  Eigen::MatrixXd c = symmetrize(centered * centered.transpose() / static_cast<double>(window.cols()));

  double alpha = 0.0;
  bool shrink = true;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NoShrinkage>) {
          shrink = false;
        } else if constexpr (std::is_same_v<T, LedoitWolf>) {
          alpha = std::clamp(ledoit_wolf_alpha(centered), 0.0, 1.0);
        } else {
          if (!(s.alpha >= 0.0 && s.alpha <= 1.0)) {
            throw Error(ErrorKind::kInvalidInput, "shrinkage must lie in [0, 1]");
          }
          alpha = s.alpha;
        }
      },
      shrinkage);

  const double mu = c.trace() / static_cast<double>(n_ch);
  if (!shrink) {
    const double lmin = min_eigenvalue(c);
    if (!(lmin > kClampRatio * std::max(mu, 0.0)) || !(mu > 0.0)) {
      throw Error(ErrorKind::kRankDeficient,
                  "window covariance is rank deficient (smallest eigenvalue " +
                      std::to_string(lmin) + "); enable shrinkage");
    }
    return SpdMatrix::trusted(std::move(c));
  }

  if (alpha == 1.0) {
    c = Eigen::MatrixXd::Identity(n_ch, n_ch) * mu;
  } else {
    c = (1.0 - alpha) * c;
    c.diagonal().array() += alpha * mu;
  }
  // Floor for windows whose shrunk estimate is still (numerically) singular,
  // e.g. an all-zero window.
  const double scale = mu > 0.0 ? mu : 1.0;
  if (!(min_eigenvalue(c) > kClampRatio * scale)) {
    c.diagonal().array() += kClampRatio * scale;
  }
  return SpdMatrix::trusted(std::move(c));
}

Eigen::MatrixXd spd_log(const SpdMatrix& c) {
  check_symmetric(c.matrix());
  return log_spd_matrix(c.matrix());
}

SpdMatrix spd_exp(const Eigen::MatrixXd& s) {
  check_symmetric(s);
  return SpdMatrix::trusted(apply_spectral(symmetrize(s), [](double l) { return std::exp(l); }));
}

Eigen::MatrixXd spd_sqrt(const SpdMatrix& c) {
  return apply_spectral(c.matrix(), [](double l) { return std::sqrt(std::max(l, 0.0)); });
}

Eigen::MatrixXd spd_inv_sqrt(const SpdMatrix& c) {
  return apply_spectral(c.matrix(), [](double l) {
    if (!(l > 0.0)) throw Error(ErrorKind::kNotSpd, "inverse square root of a singular matrix");
    return 1.0 / std::sqrt(l);
  });
}

SpdMatrix arithmetic_mean(std::span<const SpdMatrix> cs) {
  if (cs.empty()) throw Error(ErrorKind::kInvalidInput, "mean of an empty set");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(cs[0].dim(), cs[0].dim());
  for (const auto& c : cs) {
    if (c.dim() != cs[0].dim()) {
      throw Error(ErrorKind::kShapeMismatch, "matrices in the mean differ in dimension");
    }
    acc += c.matrix();
  }
  return SpdMatrix::trusted(acc / static_cast<double>(cs.size()));
}

MeanResult geometric_mean(std::span<const SpdMatrix> cs, double tol, int max_iter) {
  MeanResult result{arithmetic_mean(cs), false, 0, 0.0};
  const auto n = cs[0].dim();
  for (int it = 1; it <= max_iter; ++it) {
    result.iterations = it;
    const Eigen::MatrixXd g_sqrt = spd_sqrt(result.mean);
    const Eigen::MatrixXd g_isqrt = spd_inv_sqrt(result.mean);
    Eigen::MatrixXd step = Eigen::MatrixXd::Zero(n, n);
    for (const auto& c : cs) {
      step += log_spd_matrix(symmetrize(g_isqrt * c.matrix() * g_isqrt));
    }
    step /= static_cast<double>(cs.size());
    result.residual = step.norm();
    if (result.residual < tol) {
      result.converged = true;
      break;
    }
    const Eigen::MatrixXd e = apply_spectral(step, [](double l) { return std::exp(l); });
    result.mean = SpdMatrix::trusted(symmetrize(g_sqrt * e * g_sqrt));
  }
  return result;
}

Eigen::VectorXd vectorize_upper(const Eigen::MatrixXd& s) {
  const auto n = s.rows();
  Eigen::VectorXd v(tangent_dim(n));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    v(k++) = s(i, i);
    for (Eigen::Index j = i + 1; j < n; ++j) v(k++) = std::numbers::sqrt2 * s(i, j);
  }
  return v;
}

Eigen::MatrixXd unvectorize_upper(const Eigen::VectorXd& v) {
  // n(n+1)/2 = size
  const auto n = static_cast<Eigen::Index>((std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0) - 1.0) / 2.0 + 0.5);
  if (tangent_dim(n) != v.size()) {
    throw Error(ErrorKind::kShapeMismatch, "vector length is not triangular");
  }
  Eigen::MatrixXd s(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = v(k++);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      s(i, j) = s(j, i) = v(k++) / std::numbers::sqrt2;
    }
  }
  return s;
}

Eigen::VectorXd tangent_project_whitened(const SpdMatrix& c, const Eigen::MatrixXd& g_inv_sqrt) {
  if (c.dim() != g_inv_sqrt.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "tangent projection: dimension " +
                                               std::to_string(c.dim()) + " vs reference " +
                                               std::to_string(g_inv_sqrt.rows()));
  }
  return vectorize_upper(log_spd_matrix(symmetrize(g_inv_sqrt * c.matrix() * g_inv_sqrt)));
}

TangentVector tangent_project(const SpdMatrix& c, std::shared_ptr<const SpdMatrix> g) {
  if (!g) throw Error(ErrorKind::kInvalidInput, "tangent projection needs a reference point");
  if (c.dim() != g->dim()) {
    throw Error(ErrorKind::kShapeMismatch, "tangent projection: dimension " +
                                               std::to_string(c.dim()) + " vs reference " +
                                               std::to_string(g->dim()));
  }
  TangentVector out{tangent_project_whitened(c, spd_inv_sqrt(*g)), std::move(g)};
  return out;
}

SpdMatrix tangent_unproject(const TangentVector& v) {
  if (!v.reference) throw Error(ErrorKind::kInvalidInput, "tangent vector has no reference");
  if (v.coeffs.size() != tangent_dim(v.reference->dim())) {
    throw Error(ErrorKind::kShapeMismatch, "tangent vector length does not match its reference");
  }
  const Eigen::MatrixXd g_sqrt = spd_sqrt(*v.reference);
  const Eigen::MatrixXd e =
      apply_spectral(unvectorize_upper(v.coeffs), [](double l) { return std::exp(l); });
  return SpdMatrix::trusted(symmetrize(g_sqrt * e * g_sqrt));
}

ReferenceSet::ReferenceSet(std::vector<SpdMatrix> refs) : refs_(std::move(refs)) {
  inv_sqrt_.reserve(refs_.size());
  for (const auto& r : refs_) inv_sqrt_.push_back(spd_inv_sqrt(r));
}

std::vector<signal::SosCascade> band_filters(const CmtsConfig& cfg, double fs) {
  std::vector<signal::SosCascade> out;
  out.reserve(cfg.bands.size());
  for (const auto& band : cfg.bands) {
    const bool passthrough =
        band.low_hz <= cfg.prefilter.low_hz && band.high_hz >= cfg.prefilter.high_hz;
    out.push_back(passthrough ? signal::SosCascade{} : signal::design_bandpass(band, fs));
  }
  return out;
}

Eigen::MatrixXd extract_cmts_sequence(const EmgRecording& rec, const CmtsConfig& cfg,
                                      const ReferenceSet& refs) {
  const auto filters = band_filters(cfg, rec.fs);
  return extract_cmts_sequence(rec, cfg, refs, filters);
}

Eigen::MatrixXd extract_cmts_sequence(const EmgRecording& rec, const CmtsConfig& cfg,
                                      const ReferenceSet& refs,
                                      std::span<const signal::SosCascade> filters) {
  const std::size_t ctx = signal::ms_to_samples(cfg.context_ms(), rec.fs);
  const std::size_t win = signal::ms_to_samples(cfg.win_ms, rec.fs);
  const std::size_t step = signal::ms_to_samples(cfg.step_ms, rec.fs);
  if (cfg.seq_len == 0 || win < 2 || step == 0) {
    throw Error(ErrorKind::kInvalidInput, "sequence length, window and step must be positive");
  }
  if (static_cast<std::size_t>(rec.n_samples()) < ctx) {
    throw Error(ErrorKind::kInsufficientData,
                "CMTS extraction needs " + std::to_string(cfg.context_ms()) + " ms of context (" +
                    std::to_string(ctx) + " samples), got " + std::to_string(rec.n_samples()));
  }
  if (refs.size() != cfg.bands.size() || filters.size() != cfg.bands.size()) {
    throw Error(ErrorKind::kShapeMismatch, "one reference and one filter per band required");
  }
  const auto n_ch = rec.n_channels();
  const auto td = tangent_dim(n_ch);
  for (std::size_t b = 0; b < refs.size(); ++b) {
    if (refs.refs()[b].dim() != n_ch) {
      throw Error(ErrorKind::kShapeMismatch, "reference dimension does not match channel count");
    }
  }

  const auto start = static_cast<Eigen::Index>(rec.n_samples()) - static_cast<Eigen::Index>(ctx);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(cfg.seq_len),
                      td * static_cast<Eigen::Index>(cfg.bands.size()));
  for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
    Eigen::MatrixXd seg = rec.data.middleCols(start, static_cast<Eigen::Index>(ctx));
    if (!filters[b].empty()) signal::apply_rows(seg, filters[b], signal::Phase::kZero);
    for (std::size_t k = 0; k < cfg.seq_len; ++k) {
      const auto w0 = static_cast<Eigen::Index>(k * step);
      const SpdMatrix c = covariance(seg.middleCols(w0, static_cast<Eigen::Index>(win)), cfg.shrinkage);
      out.row(static_cast<Eigen::Index>(k)).segment(static_cast<Eigen::Index>(b) * td, td) =
          tangent_project_whitened(c, refs.inv_sqrt(b)).transpose();
    }
  }
  return out;
}

}  // namespace emgkin::riemann
