#pragma once

#include "emgkin/random.hpp"
#include "emgkin/types.hpp"

#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <complex>
#include <numbers>

namespace testutil {

inline Eigen::MatrixXd randn(Eigen::Index r, Eigen::Index c, emgkin::Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

// Random SPD matrix with eigenvalues spread over roughly [0.1, 10].
inline Eigen::MatrixXd random_spd(Eigen::Index n, emgkin::Rng& rng) {
  const Eigen::MatrixXd a = randn(n, n, rng);
  const Eigen::MatrixXd q = a.householderQr().householderQ();
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = std::exp(rng.uniform(-2.3, 2.3));
  Eigen::MatrixXd s = q * d.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

inline emgkin::EmgRecording white_noise(Eigen::Index channels, Eigen::Index n, double fs,
                                        std::uint64_t seed) {
  emgkin::Rng rng(seed);
  emgkin::EmgRecording rec;
  rec.data = randn(channels, n, rng);
  rec.fs = fs;
  rec.channel_names = emgkin::default_channel_names(channels);
  return rec;
}

// Power of x at frequency f by a direct DFT sum (no FFT).
inline double dft_power(const Eigen::VectorXd& x, double f, double fs) {
  std::complex<double> acc = 0.0;
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    const double ph = -2.0 * std::numbers::pi * f * static_cast<double>(t) / fs;
    acc += x(t) * std::complex<double>(std::cos(ph), std::sin(ph));
  }
  return std::norm(acc) / static_cast<double>(x.size());
}

}  // namespace testutil
