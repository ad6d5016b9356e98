#include "emgkin/data.hpp"

#include "emgkin/error.hpp"
#include "emgkin/random.hpp"
#include "emgkin/signal/signal.hpp"

#include <cmath>
#include <cstdio>

namespace emgkin::data {

namespace {

constexpr double kAngleLow = 10.0;
constexpr double kAngleRange = 160.0;

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

// Sparse non-negative [channels x joints]; every joint drives at least one channel.
Eigen::MatrixXd draw_coupling(int channels, int joints, Rng& rng) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(channels, joints);
  for (int j = 0; j < joints; ++j) {
    for (int m = 0; m < channels; ++m) {
      if (rng.uniform() < 0.35) c(m, j) = rng.uniform(0.1, 0.4);
    }
    if (c.col(j).sum() == 0.0) {
      c(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(channels))), j) =
          rng.uniform(0.1, 0.4);
    }
  }
  return c;
}

double circular_distance(double a, double b, int n) {
  double d = std::fmod(std::abs(a - b), static_cast<double>(n));
  return std::min(d, static_cast<double>(n) - d);
}

Eigen::VectorXd white(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Eigen::VectorXd unit_std(Eigen::VectorXd v) {
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().mean());
  if (sd > 0.0) v = (v.array() - mean) / sd;
  return v;
}

}  // namespace

nlohmann::json SynthConfig::to_json() const {
  nlohmann::json j;
  j["n_joints"] = n_joints;
  j["n_channels"] = n_channels;
  j["duration_s"] = duration_s;
  j["fs"] = fs;
  if (coupling.size()) j["coupling"] = matrix_json(coupling);
  if (posture_coupling.size()) j["posture_coupling"] = matrix_json(posture_coupling);
  j["baseline"] = baseline;
  j["speed_ref"] = speed_ref;
  j["noise"] = noise;
  j["n_attractors"] = n_attractors;
  j["dwell_s"] = dwell_s;
  j["jitter"] = jitter;
  j["smoothing_hz"] = smoothing_hz;
  j["crosstalk"] = crosstalk;
  j["electrode_shift"] = electrode_shift;
  if (channel_gain.size()) {
    j["channel_gain"] = std::vector<double>(channel_gain.data(), channel_gain.data() + channel_gain.size());
  }
  j["sync_shift_ms"] = sync_shift_ms;
  j["seed"] = seed;
  return j;
}

void SynthConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidInput, "synth: " + msg); };
  if (n_joints < 1 || n_channels < 1) fail("need at least one joint and one channel");
  if (!(duration_s > 0.0) || !(fs >= 100.0)) fail("duration must be positive and fs >= 100 Hz");
  const auto check = [&](const Eigen::MatrixXd& m, const char* name) {
    if (m.size() == 0) return;
    if (m.rows() != n_channels || m.cols() != n_joints) {
      fail(std::string(name) + " must be [channels x joints]");
    }
    if (!m.allFinite() || (m.array() < 0.0).any()) fail(std::string(name) + " must be non-negative");
  };
  check(coupling, "coupling");
  check(posture_coupling, "posture_coupling");
  if (!(baseline >= 0.0) || !(noise >= 0.0) || !(speed_ref > 0.0)) {
    fail("baseline and noise must be >= 0, speed_ref > 0");
  }
  if (n_attractors < 1 || !(dwell_s > 0.0) || !(jitter >= 0.0) || !(crosstalk >= 0.0) ||
      !(smoothing_hz > 0.0 && smoothing_hz < fs / 2.0)) {
    fail("attractors >= 1, dwell > 0, jitter and crosstalk >= 0, 0 < smoothing < fs/2");
  }
  if (channel_gain.size() != 0 && channel_gain.size() != n_channels) {
    fail("channel_gain must have one entry per channel");
  }
}

Session generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const int J = cfg.n_joints;
  const int C = cfg.n_channels;
  const double fs = cfg.fs;
  const auto N = static_cast<Eigen::Index>(std::llround(cfg.duration_s * fs));
  if (N < 16) throw Error(ErrorKind::kInvalidInput, "synth: duration too short");
  const auto shift = static_cast<Eigen::Index>(std::llround(cfg.sync_shift_ms * fs / 1000.0));
  // fixed margin: shifts within +-2 s reuse the same underlying streams
  const Eigen::Index margin = std::max<Eigen::Index>(std::abs(shift), std::llround(2.0 * fs));
  const Eigen::Index L = N + 2 * margin;

  Eigen::MatrixXd coupling = cfg.coupling;
  Eigen::MatrixXd posture = cfg.posture_coupling;
  {
    Rng rng(derive_seed(cfg.seed, "coupling"));
    if (coupling.size() == 0) coupling = draw_coupling(C, J, rng);
    if (posture.size() == 0) posture = draw_coupling(C, J, rng);
  }

  // Kinematics: attractor switching, smoothed, plus slow wander.
  Eigen::MatrixXd u(J, L);
  {
    Rng rng(derive_seed(cfg.seed, "kinematics"));
    Eigen::MatrixXd attractors(cfg.n_attractors, J);
    for (Eigen::Index i = 0; i < attractors.size(); ++i) attractors.data()[i] = rng.uniform(0.05, 0.95);
    Eigen::Index t = 0;
    auto current = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(cfg.n_attractors)));
    while (t < L) {
      const double dwell = std::max(0.25, -cfg.dwell_s * std::log(1.0 - rng.uniform()));
      const Eigen::Index len = std::min<Eigen::Index>(L - t, std::max<Eigen::Index>(1, std::llround(dwell * fs)));
      for (int j = 0; j < J; ++j) {
        u.row(j).segment(t, len).setConstant(attractors(current, j) + cfg.jitter * rng.normal());
      }
      t += len;
      if (cfg.n_attractors > 1) {
        const auto step = 1 + rng.below(static_cast<std::uint64_t>(cfg.n_attractors - 1));
        current = (current + static_cast<Eigen::Index>(step)) % cfg.n_attractors;
      }
    }
    for (int j = 0; j < J; ++j) {
      Eigen::VectorXd smooth = signal::lowpass(u.row(j).transpose(), cfg.smoothing_hz, fs, 2);
      const Eigen::VectorXd wander = unit_std(signal::lowpass(white(L, rng), 2.0, fs, 2));
      u.row(j) = (smooth + 0.03 * wander).transpose().cwiseMax(0.0).cwiseMin(1.0);
    }
  }
  const Eigen::MatrixXd theta = (kAngleLow + kAngleRange * u.array()).matrix();

  Eigen::MatrixXd speed(J, L);
  for (Eigen::Index t = 0; t < L; ++t) {
    const Eigen::Index a = std::max<Eigen::Index>(t - 1, 0);
    const Eigen::Index b = std::min<Eigen::Index>(t + 1, L - 1);
    speed.col(t) = ((theta.col(b) - theta.col(a)) * fs / static_cast<double>(b - a)).cwiseAbs();
  }

  const Eigen::MatrixXd activation =
      ((coupling * speed / cfg.speed_ref + posture * u).array() + cfg.baseline).matrix();

  // Sources: one band-limited carrier per muscle.
  Eigen::MatrixXd sources(C, L);
  {
    Rng rng(derive_seed(cfg.seed, "carriers"));
    const BandSpec band{15.0, std::min(150.0, 0.45 * fs)};
    const signal::SosCascade bp = signal::design_bandpass(band, fs);
    for (int m = 0; m < C; ++m) {
      Eigen::VectorXd carrier = white(L, rng);
      bp.filtfilt_inplace(std::span<double>(carrier.data(), static_cast<std::size_t>(L)));
      sources.row(m) = activation.row(m).cwiseProduct(unit_std(carrier).transpose());
    }
  }

  Eigen::MatrixXd mixing = Eigen::MatrixXd::Identity(C, C);
  if (cfg.crosstalk > 0.0 || cfg.electrode_shift != 0.0) {
    const double sigma = std::max(cfg.crosstalk, 1e-3);
    for (int c = 0; c < C; ++c) {
      for (int m = 0; m < C; ++m) {
        const double d = circular_distance(c + cfg.electrode_shift, m, C);
        mixing(c, m) = std::exp(-d * d / (2.0 * sigma * sigma));
      }
    }
  }
  if (cfg.channel_gain.size()) mixing = cfg.channel_gain.asDiagonal() * mixing;

  Eigen::MatrixXd emg = mixing * sources.middleCols(margin, N);
  if (cfg.noise > 0.0) {
    Rng rng(derive_seed(cfg.seed, "noise"));
    for (Eigen::Index i = 0; i < emg.size(); ++i) emg.data()[i] += cfg.noise * rng.normal();
  }

  Session s;
  s.subject_id = "synthetic";
  s.emg.fs = fs;
  s.emg.data = std::move(emg);
  s.emg.channel_names = default_channel_names(C);
  s.kin.fs = fs;
  s.kin.angles = theta.middleCols(margin - shift, N);
  if (J == kJointCount) {
    s.kin.joint_names = joint_names();
  } else {
    for (int j = 0; j < J; ++j) s.kin.joint_names.push_back("joint" + std::to_string(j));
  }
  quantize_to_storage(s.emg.data);
  quantize_to_storage(s.kin.angles);
  s.provenance.kind = Provenance::Kind::kSynthetic;
  s.provenance.seed = cfg.seed;
  s.provenance.params = cfg.to_json();
  validate(s);
  return s;
}

std::vector<Session> generate_population(const SynthConfig& base, int n_subjects,
                                         double placement_variation) {
  if (n_subjects < 1) throw Error(ErrorKind::kInvalidInput, "population needs >= 1 subject");
  SynthConfig shared = base;
  {
    Rng rng(derive_seed(base.seed, "coupling"));
    if (shared.coupling.size() == 0) shared.coupling = draw_coupling(base.n_channels, base.n_joints, rng);
    if (shared.posture_coupling.size() == 0) {
      shared.posture_coupling = draw_coupling(base.n_channels, base.n_joints, rng);
    }
  }
  std::vector<Session> out;
  for (int i = 0; i < n_subjects; ++i) {
    SynthConfig cfg = shared;
    cfg.seed = derive_seed(base.seed, static_cast<std::uint64_t>(i));
    Rng rng(derive_seed(cfg.seed, "placement"));
    cfg.electrode_shift = base.electrode_shift + rng.uniform(-placement_variation, placement_variation);
    cfg.channel_gain.resize(base.n_channels);
    for (int c = 0; c < base.n_channels; ++c) cfg.channel_gain(c) = std::exp(0.2 * rng.normal());
    Session s = generate_synthetic(cfg);
    char id[16];
    std::snprintf(id, sizeof id, "S%02d", i + 1);
    s.subject_id = id;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace emgkin::data
