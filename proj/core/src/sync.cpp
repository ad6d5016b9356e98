#include "emgkin/sync.hpp"

#include "emgkin/error.hpp"
#include "emgkin/parallel.hpp"
#include "emgkin/signal/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace emgkin::sync {

nlohmann::json SyncConfig::to_json() const {
  return {{"search_ms", search_ms},
          {"hold_window_ms", hold_window_ms},
          {"smooth_hz", smooth_hz},
          {"min_overlap_s", min_overlap_s}};
}

nlohmann::json SyncResult::to_json() const {
  auto c = nlohmann::json::array();
  for (const auto& [ms, r] : curve) {
    c.push_back({ms, std::isnan(r) ? nlohmann::json(nullptr) : nlohmann::json(r)});
  }
  return {{"offset_ms", offset_ms}, {"offset_samples", offset_samples}, {"peak_correlation", peak_correlation},
          {"curve", c}};
}

namespace {

Eigen::VectorXd centred_moving_average(const Eigen::VectorXd& x, Eigen::Index half) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd prefix(n + 1);
  prefix(0) = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) prefix(i + 1) = prefix(i) + x(i);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index a = std::max<Eigen::Index>(0, i - half);
    const Eigen::Index b = std::min<Eigen::Index>(n, i + half + 1);
    out(i) = (prefix(b) - prefix(a)) / static_cast<double>(b - a);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd move_command(const EmgRecording& rec, const SyncConfig& cfg) {
  validate(rec);
  const auto hold = static_cast<Eigen::Index>(signal::ms_to_samples(cfg.hold_window_ms, rec.fs));
  if (rec.n_samples() < hold) {
    throw Error(ErrorKind::kInsufficientData,
                "move command needs at least the " + std::to_string(cfg.hold_window_ms) + " ms hold window (" +
                    std::to_string(hold) + " samples), got " + std::to_string(rec.n_samples()));
  }
  const EmgRecording env = signal::hilbert_envelope(rec);
  Eigen::MatrixXd out(rec.n_channels(), rec.n_samples());
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    const Eigen::VectorXd e = env.data.row(c).transpose();
    const Eigen::VectorXd move = (e - centred_moving_average(e, hold / 2)).cwiseMax(0.0);
    out.row(c) = signal::lowpass(move, cfg.smooth_hz, rec.fs).cwiseMax(0.0).transpose();
  }
  return out;
}

Eigen::VectorXd joint_speed(const KinematicsTrack& track, double smooth_hz) {
  validate(track);
  const Eigen::Index n = track.n_samples();
  if (n < 3) throw Error(ErrorKind::kInsufficientData, "joint speed needs at least 3 samples");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < track.n_joints(); ++j) {
    Eigen::VectorXd v(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::Index a = std::max<Eigen::Index>(t - 1, 0);
      const Eigen::Index b = std::min<Eigen::Index>(t + 1, n - 1);
      v(t) = (track.angles(j, b) - track.angles(j, a)) * track.fs / static_cast<double>(b - a);
    }
    out = out.cwiseMax(signal::lowpass(v, smooth_hz, track.fs).cwiseAbs());
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kShapeMismatch, "pearson: lengths differ");
  const std::size_t n = a.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

SyncResult find_offset(const Eigen::VectorXd& move, const Eigen::VectorXd& speed, double fs, const SyncConfig& cfg) {
  if (move.size() != speed.size()) {
    throw Error(ErrorKind::kShapeMismatch, "move command and joint speed differ in length");
  }
  const Eigen::Index n = move.size();
  const auto max_shift = static_cast<Eigen::Index>(signal::ms_to_samples(cfg.search_ms, fs));
  const auto min_overlap = static_cast<Eigen::Index>(std::llround(cfg.min_overlap_s * fs));
  if (n - max_shift < min_overlap) {
    throw Error(ErrorKind::kInsufficientData,
                "synchronisation needs >= " + std::to_string(cfg.min_overlap_s) + " s of overlap at every shift; " +
                    "recording is " + std::to_string(static_cast<double>(n) / fs) + " s with a +/-" +
                    std::to_string(cfg.search_ms) + " ms search");
  }
  const auto constant = [](const Eigen::VectorXd& v) { return !(v.maxCoeff() - v.minCoeff() > 0.0); };
  if (constant(move) || constant(speed)) {
    throw Error(ErrorKind::kUndefinedCorrelation,
                std::string("correlation undefined: ") + (constant(move) ? "move command" : "joint speed") +
                    " is constant (no movement signal)");
  }

  const Eigen::Index n_shifts = 2 * max_shift + 1;
  std::vector<double> corr(static_cast<std::size_t>(n_shifts));
  parallel_for(static_cast<std::size_t>(n_shifts), cfg.threads, [&](std::size_t k) {
    const Eigen::Index d = static_cast<Eigen::Index>(k) - max_shift;
    // M(t) with V(t + d) over the overlap
    const Eigen::Index m0 = std::max<Eigen::Index>(0, -d);
    const Eigen::Index len = n - std::abs(d);
    corr[k] = pearson(std::span<const double>(move.data() + m0, static_cast<std::size_t>(len)),
                      std::span<const double>(speed.data() + m0 + d, static_cast<std::size_t>(len)));
  });

  SyncResult r;
  r.peak_correlation = -std::numeric_limits<double>::infinity();
  bool found = false;
  // Visit shifts by increasing |d| so that strict improvement keeps the smallest.
  for (Eigen::Index a = 0; a <= max_shift; ++a) {
    for (Eigen::Index d : {a, -a}) {
      if (a == 0 && d != 0) continue;
      if (a == 0 && found) continue;
      const double c = corr[static_cast<std::size_t>(d + max_shift)];
      if (!std::isnan(c) && c > r.peak_correlation) {
        r.peak_correlation = c;
        r.offset_samples = d;
        found = true;
      }
    }
  }
  if (!found) throw Error(ErrorKind::kUndefinedCorrelation, "correlation undefined at every candidate shift");
  r.offset_ms = static_cast<double>(r.offset_samples) * 1000.0 / fs;
  r.curve.reserve(corr.size());
  for (Eigen::Index k = 0; k < n_shifts; ++k) {
    r.curve.emplace_back(static_cast<double>(k - max_shift) * 1000.0 / fs, corr[static_cast<std::size_t>(k)]);
  }
  return r;
}

SyncResult find_offset(const EmgRecording& rec, const KinematicsTrack& track, const SyncConfig& cfg) {
  if (rec.fs != track.fs) {
    throw Error(ErrorKind::kValidation, "EMG and kinematics must share a sampling rate; resample first");
  }
  if (rec.n_samples() != track.n_samples()) {
    throw Error(ErrorKind::kShapeMismatch, "EMG and kinematics differ in sample count");
  }
  const Eigen::MatrixXd move = move_command(rec, cfg);
  const Eigen::VectorXd m = move.colwise().maxCoeff().transpose();
  return find_offset(m, joint_speed(track, cfg.smooth_hz), rec.fs, cfg);
}

data::Session apply_sync(const data::Session& s, const SyncResult& result) {
  if (s.sync_applied) {
    throw Error(ErrorKind::kValidation, "session " + s.subject_id + " is already synchronised (offset " +
                                            std::to_string(s.sync_offset_ms) + " ms)");
  }
  data::Session out = data::apply_offset(s, result.offset_ms);
  out.sync_offset_ms = result.offset_ms;
  out.sync_applied = true;
  return out;
}

HalfSync find_offset_halves(const data::Session& s, const SyncConfig& cfg) {
  data::validate(s);
  HalfSync h;
  h.split = s.emg.n_samples() / 2;
  const data::Session a = data::slice(s, 0, h.split);
  const data::Session b = data::slice(s, h.split, s.emg.n_samples());
  h.first = find_offset(a.emg, a.kin, cfg);
  h.second = find_offset(b.emg, b.kin, cfg);
  return h;
}

data::Session apply_sync(const data::Session& s, const HalfSync& halves) {
  if (s.sync_applied) {
    throw Error(ErrorKind::kValidation, "session " + s.subject_id + " is already synchronised");
  }
  const data::Session a = data::apply_offset(data::slice(s, 0, halves.split), halves.first.offset_ms);
  const data::Session b =
      data::apply_offset(data::slice(s, halves.split, s.emg.n_samples()), halves.second.offset_ms);
  data::Session out = s;
  out.emg.data.resize(s.emg.n_channels(), a.emg.n_samples() + b.emg.n_samples());
  out.emg.data << a.emg.data, b.emg.data;
  out.kin.angles.resize(s.kin.n_joints(), a.kin.n_samples() + b.kin.n_samples());
  out.kin.angles << a.kin.angles, b.kin.angles;
  out.sync_offset_ms = halves.first.offset_ms;
  out.sync_applied = true;
  out.attributes["sync_offset_ms_half2"] = std::to_string(halves.second.offset_ms);
  out.attributes["sync_split_sample"] = std::to_string(a.emg.n_samples());
  return out;
}

std::vector<OffsetRow> offset_sweep_eval(const data::Session& s, const std::vector<double>& offsets_ms,
                                         const ModelBuilder& builder, const eval::CvConfig& cfg) {
  data::validate(s);
  double max_abs = 0.0;
  for (double o : offsets_ms) max_abs = std::max(max_abs, std::abs(o));
  const auto trim = static_cast<Eigen::Index>(signal::ms_to_samples(max_abs, s.emg.fs));
  const Eigen::Index len = s.emg.n_samples() - trim;
  std::vector<OffsetRow> out;
  for (double o : offsets_ms) {
    const data::Session shifted = data::apply_offset(s, o);
    const eval::EvalReport r = eval::intra_subject_cv(data::slice(shifted, 0, len), builder, cfg);
    out.push_back({o, r.mean_nmse, r.mean_abs_error});
  }
  return out;
}

}  // namespace emgkin::sync
