#include "emgkin/signal/signal.hpp"

#include "emgkin/error.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

namespace emgkin::signal {

namespace {

bool is_fast_fft_length(std::size_t n) {
  for (std::size_t p : {2u, 3u, 5u}) {
    while (n % p == 0) n /= p;
  }
  return n == 1;
}

std::size_t next_fast_fft_length(std::size_t n) {
  while (!is_fast_fft_length(n)) ++n;
  return n;
}

}  // namespace

void check_band(const BandSpec& band, double fs) {
  if (!(fs > 0.0)) throw Error(ErrorKind::kInvalidInput, "sampling rate must be positive");
  if (!(band.low_hz > 0.0) || !(band.low_hz < band.high_hz) || !(band.high_hz < fs / 2.0)) {
    throw Error(ErrorKind::kInvalidBand,
                "band " + std::to_string(band.low_hz) + "-" + std::to_string(band.high_hz) +
                    " Hz is not inside (0, " + std::to_string(fs / 2.0) + ") Hz");
  }
}

SosCascade design_bandpass(const BandSpec& band, double fs) {
  check_band(band, fs);
  return butter_bandpass(kBandpassOrder, band.low_hz, band.high_hz, fs);
}

void apply_rows(Eigen::MatrixXd& m, const SosCascade& cascade, Phase phase) {
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    if (phase == Phase::kZero) {
      cascade.filtfilt_inplace(row);
    } else {
      cascade.filter_inplace(row);
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
}

EmgRecording bandpass(const EmgRecording& rec, const BandSpec& band, Phase phase) {
  const SosCascade cascade = design_bandpass(band, rec.fs);
  EmgRecording out = rec;
  apply_rows(out.data, cascade, phase);
  return out;
}

double bandpass_group_delay(const BandSpec& band, double fs) {
  return design_bandpass(band, fs).group_delay(std::sqrt(band.low_hz * band.high_hz), fs);
}

EmgRecording notch(const EmgRecording& rec, const std::vector<double>& freqs_hz, Phase phase) {
  SosCascade cascade;
  for (double f : freqs_hz) {
    if (!(f > 0.0) || !(f < rec.fs / 2.0)) {
      throw Error(ErrorKind::kInvalidBand, "notch frequency " + std::to_string(f) +
                                               " Hz is not below Nyquist (" +
                                               std::to_string(rec.fs / 2.0) + " Hz)");
    }
    cascade = chain(cascade, iir_notch(f, kNotchQuality, rec.fs));
  }
  EmgRecording out = rec;
  apply_rows(out.data, cascade, phase);
  return out;
}

Eigen::VectorXd lowpass(const Eigen::VectorXd& x, double cutoff_hz, double fs, int order) {
  const SosCascade cascade = butter_lowpass(order, cutoff_hz, fs);
  Eigen::VectorXd out = x;
  cascade.filtfilt_inplace(std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

KinematicsTrack resample_linear(const KinematicsTrack& track, double target_fs) {
  if (!(target_fs > 0.0)) throw Error(ErrorKind::kInvalidInput, "target rate must be positive");
  if (track.n_samples() < 2) {
    throw Error(ErrorKind::kInsufficientData, "linear resampling needs at least 2 samples");
  }
  if (target_fs == track.fs) return track;

  const Eigen::Index n = track.n_samples();
  const double duration = static_cast<double>(n - 1) / track.fs;
  const auto n_out = static_cast<Eigen::Index>(std::floor(duration * target_fs + 1e-9)) + 1;

  KinematicsTrack out;
  out.fs = target_fs;
  out.joint_names = track.joint_names;
  out.angles.resize(track.n_joints(), n_out);
  for (Eigen::Index k = 0; k < n_out; ++k) {
    const double pos = static_cast<double>(k) * track.fs / target_fs;
    auto i = static_cast<Eigen::Index>(std::floor(pos));
    double frac = pos - static_cast<double>(i);
    if (i >= n - 1) {
      i = n - 1;
      frac = 0.0;
    }
    if (frac == 0.0) {
      out.angles.col(k) = track.angles.col(i);
    } else {
      out.angles.col(k) =
          track.angles.col(i) + frac * (track.angles.col(i + 1) - track.angles.col(i));
    }
  }
  return out;
}

EmgRecording common_average_reference(const EmgRecording& rec) {
  if (rec.n_channels() < 2) {
    throw Error(ErrorKind::kInvalidInput, "common average reference needs at least 2 channels");
  }
  EmgRecording out = rec;
  const Eigen::RowVectorXd mean = rec.data.colwise().mean();
  out.data.rowwise() -= mean;
  return out;
}

Standardized standardize_per_channel(const EmgRecording& rec,
                                     const std::optional<ChannelStats>& stats) {
  ChannelStats s;
  if (stats) {
    if (stats->mean.size() != rec.n_channels() || stats->std.size() != rec.n_channels()) {
      throw Error(ErrorKind::kShapeMismatch, "standardization stats do not match channel count");
    }
    s = *stats;
  } else {
    const auto n = static_cast<double>(rec.n_samples());
    s.mean = rec.data.rowwise().mean();
    s.std.resize(rec.n_channels());
    for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
      const double var = (rec.data.row(c).array() - s.mean(c)).square().sum() / n;
      const double sd = std::sqrt(var);
      // constant channels keep unit scale
      s.std(c) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(c))) ? sd : 1.0;
    }
  }
  Standardized out{rec, s};
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    out.rec.data.row(c) = (rec.data.row(c).array() - s.mean(c)) / s.std(c);
  }
  return out;
}

Eigen::VectorXd hilbert_envelope(const Eigen::VectorXd& x) {
  const auto n = static_cast<std::size_t>(x.size());
  if (n < 8) throw Error(ErrorKind::kInsufficientData, "Hilbert envelope needs at least 8 samples");
  // Zero-pad to a 2/3/5-smooth length so odd lengths stay O(n log n).
  const std::size_t m = next_fast_fft_length(n);
  std::vector<std::complex<double>> time(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) time[i] = x(static_cast<Eigen::Index>(i));

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, time);
  // one-sided spectrum weights
  const std::size_t half = m / 2;
  for (std::size_t k = 1; k < m; ++k) {
    if (m % 2 == 0 && k == half) continue;
    spec[k] *= (k < (m + 1) / 2) ? 2.0 : 0.0;
  }
  std::vector<std::complex<double>> analytic;
  fft.inv(analytic, spec);

  Eigen::VectorXd env(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) env(static_cast<Eigen::Index>(i)) = std::abs(analytic[i]);
  return env;
}

EmgRecording hilbert_envelope(const EmgRecording& rec) {
  EmgRecording out = rec;
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    out.data.row(c) = hilbert_envelope(Eigen::VectorXd(rec.data.row(c).transpose())).transpose();
  }
  return out;
}

std::size_t ms_to_samples(double ms, double fs) {
  return static_cast<std::size_t>(std::llround(ms * fs / 1000.0));
}

std::vector<IndexRange> sliding_windows(double length_ms, double step_ms, std::size_t n_samples,
                                        double fs) {
  const std::size_t len = ms_to_samples(length_ms, fs);
  const std::size_t step = ms_to_samples(step_ms, fs);
  if (len == 0 || step == 0) {
    throw Error(ErrorKind::kInvalidInput, "window length and step must span at least one sample");
  }
  std::vector<IndexRange> out;
  if (len > n_samples) return out;
  const std::size_t count = (n_samples - len) / step + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back({i * step, i * step + len});
  return out;
}

}  // namespace emgkin::signal
