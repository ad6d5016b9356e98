#include "emgkin/data.hpp"
#include "emgkin/error.hpp"
#include "emgkin/model.hpp"
#include "emgkin/sync.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace emgkin;
using namespace emgkin::sync;

namespace {

EmgRecording one_channel(const Eigen::VectorXd& x, double fs) {
  EmgRecording rec;
  rec.data = x.transpose();
  rec.fs = fs;
  rec.channel_names = default_channel_names(1);
  return rec;
}

KinematicsTrack track_of(const Eigen::MatrixXd& angles, double fs) {
  KinematicsTrack k;
  k.angles = angles;
  k.fs = fs;
  for (Eigen::Index j = 0; j < angles.rows(); ++j) k.joint_names.push_back("j" + std::to_string(j));
  return k;
}

data::Session synth(double shift_ms, std::uint64_t seed, double duration = 60.0) {
  data::SynthConfig c;
  c.duration_s = duration;
  c.sync_shift_ms = shift_ms;
  c.seed = seed;
  return data::generate_synthetic(c);
}

}  // namespace

TEST_CASE("constant-amplitude sinusoid has no move command") {
  const double fs = 500.0;
  Eigen::VectorXd x(5000);
  for (Eigen::Index t = 0; t < x.size(); ++t) x(t) = 2.0 * std::sin(2 * std::numbers::pi * 50.0 * t / fs);
  const Eigen::MatrixXd m = move_command(one_channel(x, fs));
  CHECK(m.maxCoeff() < 1e-6);
  CHECK(m.minCoeff() >= 0.0);
}

TEST_CASE("a 300 ms burst on silence gives one dominant move peak near its centre") {
  const double fs = 500.0;
  const Eigen::Index n = 5000, start = 2400, len = 150;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = start; t < start + len; ++t) x(t) = std::sin(2 * std::numbers::pi * 60.0 * t / fs);
  const Eigen::VectorXd m = move_command(one_channel(x, fs)).row(0).transpose();
  Eigen::Index peak = 0;
  m.maxCoeff(&peak);
  const double centre = static_cast<double>(start) + len / 2.0;
  CHECK(std::abs(static_cast<double>(peak) - centre) / fs * 1000.0 <= 100.0);
  // far from the burst the command is small compared with the peak
  for (Eigen::Index t = 0; t < n; ++t) {
    if (std::abs(static_cast<double>(t) - centre) > 0.5 * fs) CHECK(m(t) < 0.2 * m(peak));
  }
}

TEST_CASE("move command of a zero signal is zero and is invariant to sign flips") {
  const double fs = 500.0;
  CHECK(move_command(one_channel(Eigen::VectorXd::Zero(2000), fs)).cwiseAbs().maxCoeff() == 0.0);
  const data::Session s = synth(0.0, 3, 20.0);
  EmgRecording flipped = s.emg;
  flipped.data = -flipped.data;
  CHECK((move_command(s.emg) - move_command(flipped)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("move command needs at least one hold window of signal") {
  try {
    move_command(one_channel(Eigen::VectorXd::Ones(999), 500.0));
    FAIL("expected kInsufficientData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
  }
}

TEST_CASE("joint speed: constants, a ramp and max semantics") {
  const double fs = 500.0;
  const Eigen::Index n = 1500;
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(3, n, 45.0);
  CHECK(joint_speed(track_of(a, fs)).cwiseAbs().maxCoeff() < 1e-9);

  for (Eigen::Index t = 0; t < n; ++t) a(1, t) = 10.0 + 90.0 * t / fs;
  const Eigen::VectorXd v = joint_speed(track_of(a, fs));
  CHECK(v.segment(400, 700).minCoeff() >= 0.95 * 90.0);
  CHECK(v.segment(400, 700).maxCoeff() <= 1.05 * 90.0);

  for (Eigen::Index t = 0; t < n; ++t) {
    a(0, t) = 30.0 * t / fs;
    a(1, t) = 300.0 - 80.0 * t / fs;
  }
  const Eigen::VectorXd w = joint_speed(track_of(a, fs));
  CHECK(w.segment(400, 700).minCoeff() >= 0.95 * 80.0);
  CHECK(w.segment(400, 700).maxCoeff() <= 1.05 * 80.0);

  CHECK_THROWS_AS(joint_speed(track_of(Eigen::MatrixXd::Zero(1, 2), fs)), Error);
}

TEST_CASE("pearson matches a naive two-pass oracle") {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.below(500));
    Eigen::VectorXd a = testutil::randn(n, 1, rng), b = testutil::randn(n, 1, rng);
    b += rng.uniform(-1, 1) * a;
    a.array() += rng.uniform(-100, 100);
    long double ma = 0, mb = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
      ma += a(t);
      mb += b(t);
    }
    ma /= n;
    mb /= n;
    long double sab = 0, saa = 0, sbb = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
      sab += (a(t) - ma) * (b(t) - mb);
      saa += (a(t) - ma) * (a(t) - ma);
      sbb += (b(t) - mb) * (b(t) - mb);
    }
    const double expected = static_cast<double>(sab / std::sqrt(saa * sbb));
    CHECK(std::abs(pearson(std::span<const double>(a.data(), n), std::span<const double>(b.data(), n)) -
                   expected) < 1e-12);
  }
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(10, 1.0), d = Eigen::VectorXd::LinSpaced(10, 0, 1);
  CHECK(std::isnan(pearson(std::span<const double>(c.data(), 10), std::span<const double>(d.data(), 10))));
}

TEST_CASE("find_offset recovers an injected +160 ms shift and a zero shift") {
  const data::Session s = synth(160.0, 21);
  const SyncResult r = find_offset(s.emg, s.kin);
  CHECK(std::abs(r.offset_ms - 160.0) <= 20.0);
  const data::Session z = synth(0.0, 22);
  const SyncResult r0 = find_offset(z.emg, z.kin);
  CHECK(std::abs(r0.offset_ms) <= 20.0);

  // contract: the curve at the returned offset is the peak, offsets stay in range
  bool seen = false;
  for (const auto& [ms, c] : r.curve) {
    CHECK(std::abs(ms) <= 1000.0 + 1e-9);
    if (!std::isnan(c)) CHECK(c <= r.peak_correlation);
    if (ms == r.offset_ms) {
      CHECK(c == r.peak_correlation);
      seen = true;
    }
  }
  CHECK(seen);
  CHECK(r.curve.size() == 1001);
  CHECK(r.offset_samples == std::llround(r.offset_ms * s.emg.fs / 1000.0));
}

TEST_CASE("find_offset is antisymmetric under relabelling") {
  // same generated streams, kinematics cropped k later: kin'(t) = kin(t + k)
  const data::Session s = synth(40.0, 23);
  const SyncResult base = find_offset(s.emg, s.kin);
  for (double k : {100.0, -150.0}) {
    const data::Session shifted = synth(40.0 - k, 23);
    REQUIRE(shifted.emg.data == s.emg.data);
    const SyncResult r = find_offset(shifted.emg, shifted.kin);
    CHECK(std::abs(r.offset_ms - (base.offset_ms - k)) <= 1000.0 / s.kin.fs + 1e-9);
  }
}

TEST_CASE("find_offset errors: constant streams and too little overlap") {
  data::SynthConfig c;
  c.duration_s = 30.0;
  c.coupling = Eigen::MatrixXd::Zero(8, 15);
  c.posture_coupling = Eigen::MatrixXd::Zero(8, 15);
  c.noise = 0.0;
  c.baseline = 0.0;
  const data::Session s = data::generate_synthetic(c);
  try {
    find_offset(s.emg, s.kin);
    FAIL("expected kUndefinedCorrelation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUndefinedCorrelation);
  }

  const data::Session short_s = synth(0.0, 4, 10.5);
  try {
    find_offset(short_s.emg, short_s.kin);
    FAIL("expected kInsufficientData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
  }
}

TEST_CASE("apply_sync aligns once and refuses to realign") {
  const data::Session s = synth(120.0, 24, 30.0);
  const SyncResult r = find_offset(s.emg, s.kin);
  const data::Session a = apply_sync(s, r);
  CHECK(a.sync_applied);
  CHECK(a.sync_offset_ms == r.offset_ms);
  CHECK(a.emg.n_samples() == s.emg.n_samples() - std::abs(r.offset_samples));
  CHECK(a.kin.angles.col(0) == s.kin.angles.col(r.offset_samples));
  try {
    apply_sync(a, r);
    FAIL("expected kValidation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
  }
}

TEST_CASE("each half of a session is synchronised independently") {
  const data::Session s = synth(-80.0, 25, 60.0);
  const HalfSync h = find_offset_halves(s);
  CHECK(h.split == s.emg.n_samples() / 2);
  CHECK(std::abs(h.first.offset_ms + 80.0) <= 20.0);
  CHECK(std::abs(h.second.offset_ms + 80.0) <= 20.0);
  const data::Session a = apply_sync(s, h);
  CHECK(a.sync_applied);
  CHECK(a.attributes.count("sync_offset_ms_half2") == 1);
  CHECK(a.emg.n_samples() == a.kin.n_samples());
  data::validate(a);
}

TEST_CASE("offset sweep: NMSE grows as the kinematics are pushed into the future") {
  const data::Session s = synth(0.0, 26, 120.0);
  eval::CvConfig cv;
  cv.k = 5;
  const PipelineBuilder ridge(ModelSpec::defaults(ModelKind::kRidge));
  const auto rows = offset_sweep_eval(s, {0.0, 200.0, 500.0, 1000.0}, ridge, cv);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].offset_ms == 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    INFO("offset " << rows[i].offset_ms);
    CHECK(rows[i].mean_nmse >= rows[i - 1].mean_nmse);
  }
  CHECK(rows[2].mean_nmse > rows[0].mean_nmse);
}
