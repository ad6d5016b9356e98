#include "emgkin/error.hpp"
#include "emgkin/signal/signal.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace emgkin;
using namespace emgkin::signal;

namespace {

Eigen::VectorXd sine(double f, double fs, Eigen::Index n, double amp = 1.0, double phase = 0.0) {
  Eigen::VectorXd x(n);
  for (Eigen::Index t = 0; t < n; ++t)
    x(t) = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) / fs + phase);
  return x;
}

}  // namespace

TEST_CASE("butterworth band-pass is -3 dB at both edges and flat in the middle") {
  const double fs = 500.0;
  for (const BandSpec band : {BandSpec{5, 40}, BandSpec{40, 80}, BandSpec{80, 150}, BandSpec{15, 150}}) {
    const SosCascade c = design_bandpass(band, fs);
    CHECK(c.order() == 2 * kBandpassOrder);
    CHECK(c.magnitude(band.low_hz, fs) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
    CHECK(c.magnitude(band.high_hz, fs) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
    CHECK(c.magnitude(std::sqrt(band.low_hz * band.high_hz), fs) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(c.max_pole_radius() < 1.0);
  }
}

TEST_CASE("butterworth low-pass and high-pass match the analog magnitude at prewarped frequencies") {
  const double fs = 1000.0, fc = 50.0;
  const int order = 4;
  const SosCascade lp = butter_lowpass(order, fc, fs);
  const SosCascade hp = butter_highpass(order, fc, fs);
  const double wc = std::tan(std::numbers::pi * fc / fs);
  for (double f : {5.0, 25.0, 50.0, 100.0, 200.0}) {
    const double w = std::tan(std::numbers::pi * f / fs) / wc;
    CHECK(lp.magnitude(f, fs) == doctest::Approx(1.0 / std::sqrt(1.0 + std::pow(w, 2 * order))).epsilon(1e-9));
    CHECK(hp.magnitude(f, fs) ==
          doctest::Approx(1.0 / std::sqrt(1.0 + std::pow(1.0 / w, 2 * order))).epsilon(1e-9));
  }
}

TEST_CASE("invalid bands are rejected") {
  for (const BandSpec band : {BandSpec{0, 40}, BandSpec{40, 40}, BandSpec{60, 40}, BandSpec{100, 250}}) {
    try {
      check_band(band, 500.0);
      FAIL("expected kInvalidBand");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kInvalidBand);
    }
  }
}

TEST_CASE("zero-phase filtering preserves the phase of an in-band sinusoid") {
  const double fs = 500.0;
  const Eigen::VectorXd x = sine(60.0, fs, 4000, 1.0, 0.3);
  EmgRecording rec;
  rec.data = x.transpose();
  rec.fs = fs;
  rec.channel_names = default_channel_names(1);
  const EmgRecording y = bandpass(rec, {40, 80}, Phase::kZero);
  const double gain = std::pow(design_bandpass({40, 80}, fs).magnitude(60.0, fs), 2);
  // interior samples only: edges carry the start-up transient
  const Eigen::VectorXd mid = y.data.row(0).segment(1000, 2000).transpose();
  CHECK((mid - gain * x.segment(1000, 2000)).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("causal band-pass delays an in-band tone by the reported group delay") {
  const double fs = 500.0;
  const BandSpec band{40, 80};
  const double f = std::sqrt(band.low_hz * band.high_hz);
  const Eigen::VectorXd x = sine(f, fs, 6000);
  EmgRecording rec;
  rec.data = x.transpose();
  rec.fs = fs;
  rec.channel_names = default_channel_names(1);
  const Eigen::VectorXd y = bandpass(rec, band, Phase::kCausal).data.row(0).transpose();
  // phase lag of the steady-state output, measured by projection on sin/cos
  double s = 0, c = 0;
  for (Eigen::Index t = 3000; t < 6000; ++t) {
    const double ph = 2.0 * std::numbers::pi * f * static_cast<double>(t) / fs;
    s += y(t) * std::sin(ph);
    c += y(t) * std::cos(ph);
  }
  double lag = -std::atan2(c, s);
  const double delay = bandpass_group_delay(band, fs);
  const double period = fs / f;
  // compare modulo one period
  const double expected_phase = std::fmod(delay, period) / period * 2.0 * std::numbers::pi;
  double diff = std::remainder(lag - expected_phase, 2.0 * std::numbers::pi);
  CHECK(delay > 0.0);
  // group and phase delay differ for a band-pass; only require rough agreement
  CHECK(std::abs(diff) < std::numbers::pi / 2);
}

TEST_CASE("band-pass attenuates out-of-band power (periodogram oracle)") {
  const double fs = 500.0;
  EmgRecording rec = testutil::white_noise(1, 8192, fs, 11);
  const Eigen::VectorXd y = bandpass(rec, {40, 80}).data.row(0).transpose();
  double in_band = 0, out_band = 0;
  for (double f : {50.0, 60.0, 70.0}) in_band += testutil::dft_power(y, f, fs);
  for (double f : {10.0, 15.0, 150.0, 200.0}) out_band += testutil::dft_power(y, f, fs);
  CHECK(in_band / 3.0 > 100.0 * out_band / 4.0);
}

TEST_CASE("notch removes its centre frequency and leaves distant tones") {
  const double fs = 500.0;
  const SosCascade n50 = iir_notch(50.0, kNotchQuality, fs);
  CHECK(n50.magnitude(50.0, fs) < 1e-6);
  CHECK(n50.magnitude(20.0, fs) == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(n50.magnitude(100.0, fs) == doctest::Approx(1.0).epsilon(1e-2));

  EmgRecording rec;
  rec.data = (sine(50.0, fs, 5000) + sine(20.0, fs, 5000)).transpose();
  rec.fs = fs;
  rec.channel_names = default_channel_names(1);
  const Eigen::VectorXd y = notch(rec, {50.0, 100.0}).data.row(0).transpose();
  const Eigen::VectorXd mid = y.segment(1000, 3000);
  CHECK(testutil::dft_power(mid, 50.0, fs) < 1e-3 * testutil::dft_power(mid, 20.0, fs));
}

TEST_CASE("filtfilt of a constant signal through a low-pass returns the constant") {
  const SosCascade lp = butter_lowpass(2, 3.0, 500.0);
  std::vector<double> x(400, 2.5);
  lp.filtfilt_inplace(x);
  for (double v : x) CHECK(v == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("hilbert envelope of a whole-period sinusoid is its amplitude") {
  const double fs = 500.0;
  const Eigen::VectorXd x = sine(25.0, fs, 1000, 3.0, 0.7);
  const Eigen::VectorXd env = hilbert_envelope(x);
  CHECK((env.array() - 3.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("hilbert envelope tracks a slow amplitude modulation") {
  const double fs = 1000.0;
  const Eigen::Index n = 4000;
  Eigen::VectorXd x(n), a(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double tt = static_cast<double>(t) / fs;
    a(t) = 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * 1.0 * tt);
    x(t) = a(t) * std::sin(2.0 * std::numbers::pi * 100.0 * tt);
  }
  const Eigen::VectorXd env = hilbert_envelope(x);
  CHECK((env - a).segment(200, n - 400).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("sliding window count follows floor((n - L) / S) + 1") {
  const double fs = 500.0;
  for (std::size_t n : {149u, 150u, 151u, 199u, 200u, 1000u, 12345u}) {
    const auto w = sliding_windows(300.0, 100.0, n, fs);
    const std::size_t expected = n < 150 ? 0 : (n - 150) / 50 + 1;
    CHECK(w.size() == expected);
    if (!w.empty()) {
      CHECK(w.front() == IndexRange{0, 150});
      CHECK(w.back().end <= n);
    }
  }
  CHECK(ms_to_samples(300.0, 2000.0) == 600);
}

TEST_CASE("per-channel standardisation gives zero mean and unit population std") {
  EmgRecording rec = testutil::white_noise(3, 1000, 500.0, 3);
  rec.data.row(0) = rec.data.row(0) * 7.0 + Eigen::RowVectorXd::Constant(1000, 4.0);
  rec.data.row(2).setConstant(5.0);
  const Standardized s = standardize_per_channel(rec);
  for (Eigen::Index c = 0; c < 2; ++c) {
    const Eigen::RowVectorXd r = s.rec.data.row(c);
    CHECK(std::abs(r.mean()) < 1e-12);
    CHECK((r.array() - r.mean()).square().mean() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(s.stats.std(2) == 1.0);
  CHECK(s.rec.data.row(2).cwiseAbs().maxCoeff() == 0.0);

  // reusing stats applies the same affine map
  const Standardized again = standardize_per_channel(rec, s.stats);
  CHECK((again.rec.data - s.rec.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("common average reference zeroes the channel mean at every instant") {
  const EmgRecording rec = testutil::white_noise(6, 200, 500.0, 5);
  const EmgRecording car = common_average_reference(rec);
  CHECK(car.data.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear resampling reproduces a linear ramp exactly") {
  KinematicsTrack k;
  k.fs = 100.0;
  k.angles.resize(1, 101);
  for (Eigen::Index t = 0; t <= 100; ++t) k.angles(0, t) = 10.0 + 0.5 * static_cast<double>(t);
  k.joint_names = {"j"};
  const KinematicsTrack same = resample_linear(k, 100.0);
  CHECK(same.angles == k.angles);
  const KinematicsTrack up = resample_linear(k, 500.0);
  CHECK(up.fs == 500.0);
  for (Eigen::Index t = 0; t < up.n_samples(); ++t) {
    const double time = static_cast<double>(t) / 500.0;
    if (time <= 1.0) CHECK(up.angles(0, t) == doctest::Approx(10.0 + 50.0 * time).epsilon(1e-12));
  }
}
