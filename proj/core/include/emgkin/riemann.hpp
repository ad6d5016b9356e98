#pragma once

#include "emgkin/signal/iir.hpp"
#include "emgkin/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace emgkin::riemann {

// Symmetric positive-definite matrix. Construction validates symmetry and
// strict positivity of the spectrum.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(Eigen::MatrixXd m);

  // Skips validation; for matrices that are SPD by construction.
  static SpdMatrix trusted(Eigen::MatrixXd m);

  const Eigen::MatrixXd& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  Eigen::MatrixXd m_;
};

struct TangentVector {
  Eigen::VectorXd coeffs;                       // n(n+1)/2
  std::shared_ptr<const SpdMatrix> reference;  // base point
};

inline constexpr Eigen::Index tangent_dim(Eigen::Index n) { return n * (n + 1) / 2; }

// ---- shrinkage -----------------------------------------------------------

struct NoShrinkage {};
struct LedoitWolf {};
struct FixedShrinkage {
  double alpha = 0.0;
};
using Shrinkage = std::variant<NoShrinkage, LedoitWolf, FixedShrinkage>;

// Analytic Ledoit-Wolf intensity for a centred window [channels x samples].
double ledoit_wolf_alpha(const Eigen::MatrixXd& centered);

// Covariance of a [channels x samples] window with rows centred, using the
// 1/N normalisation. Optional shrinkage toward (tr(C)/n) I. Throws
// kRankDeficient when the unshrunk estimate is not positive definite.
SpdMatrix covariance(const Eigen::MatrixXd& window, const Shrinkage& shrinkage = LedoitWolf{});

// ---- matrix functions ----------------------------------------------------

// Number of eigenvalues clamped to 1e-12 * max before taking a log.
std::uint64_t eigen_clamp_count() noexcept;

Eigen::MatrixXd spd_log(const SpdMatrix& c);
SpdMatrix spd_exp(const Eigen::MatrixXd& s);
Eigen::MatrixXd spd_sqrt(const SpdMatrix& c);
Eigen::MatrixXd spd_inv_sqrt(const SpdMatrix& c);

// Throws kInvalidInput if |m - m^T|_inf exceeds the symmetry tolerance.
void check_symmetric(const Eigen::MatrixXd& m);

// ---- geometric mean -------------------------------------------------------

struct MeanResult {
  SpdMatrix mean;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // Frobenius norm of the last mean log step
};

// Affine-invariant Karcher mean by fixed-point iteration from the arithmetic
// mean. Non-convergence is reported via `converged`, never silently.
MeanResult geometric_mean(std::span<const SpdMatrix> cs, double tol = 1e-8, int max_iter = 50);

// Arithmetic mean (the switchable alternative base point).
SpdMatrix arithmetic_mean(std::span<const SpdMatrix> cs);

// ---- tangent space ---------------------------------------------------------

// Upper-triangular (row-major) flatten with off-diagonals scaled by sqrt(2),
// so the Euclidean norm equals the Frobenius norm.
Eigen::VectorXd vectorize_upper(const Eigen::MatrixXd& s);
Eigen::MatrixXd unvectorize_upper(const Eigen::VectorXd& v);

// log(G^{-1/2} C G^{-1/2}), vectorised.
TangentVector tangent_project(const SpdMatrix& c, std::shared_ptr<const SpdMatrix> g);

// Same map with a precomputed G^{-1/2}; the hot path for feature extraction.
Eigen::VectorXd tangent_project_whitened(const SpdMatrix& c, const Eigen::MatrixXd& g_inv_sqrt);

// Exponential map back to the manifold.
SpdMatrix tangent_unproject(const TangentVector& v);

// ---- CMTS sequences ---------------------------------------------------------

struct CmtsConfig {
  std::vector<BandSpec> bands = {{5.0, 40.0}, {40.0, 80.0}, {80.0, 150.0}};
  std::size_t seq_len = 10;
  double win_ms = 300.0;
  double step_ms = 100.0;
  Shrinkage shrinkage = LedoitWolf{};
  // Band already applied upstream. A feature band that contains it is a
  // pass-through and is not filtered again.
  BandSpec prefilter = {15.0, 150.0};

  double context_ms() const {
    return static_cast<double>(seq_len - 1) * step_ms + win_ms;
  }
};

// Per-band reference points plus their cached inverse square roots.
class ReferenceSet {
 public:
  ReferenceSet() = default;
  explicit ReferenceSet(std::vector<SpdMatrix> refs);

  const std::vector<SpdMatrix>& refs() const { return refs_; }
  const Eigen::MatrixXd& inv_sqrt(std::size_t band) const { return inv_sqrt_[band]; }
  std::size_t size() const { return refs_.size(); }

 private:
  std::vector<SpdMatrix> refs_;
  std::vector<Eigen::MatrixXd> inv_sqrt_;
};

// Band-pass cascades for a configuration; empty cascade = pass-through band.
std::vector<signal::SosCascade> band_filters(const CmtsConfig& cfg, double fs);

// Single-sample extraction over the most recent context of `rec`
// (>= context_ms). Output is seq_len x (n_bands * n(n+1)/2).
Eigen::MatrixXd extract_cmts_sequence(const EmgRecording& rec, const CmtsConfig& cfg,
                                      const ReferenceSet& refs);

// Same, reusing designed filters (streaming / benchmark path).
Eigen::MatrixXd extract_cmts_sequence(const EmgRecording& rec, const CmtsConfig& cfg,
                                      const ReferenceSet& refs,
                                      std::span<const signal::SosCascade> filters);

}  // namespace emgkin::riemann
