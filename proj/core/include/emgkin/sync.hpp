#pragma once

#include "emgkin/data.hpp"
#include "emgkin/eval.hpp"
#include "emgkin/model.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <span>
#include <utility>
#include <vector>

namespace emgkin::sync {

struct SyncConfig {
  double search_ms = 1000.0;      // candidate shifts in [-search, +search]
  double hold_window_ms = 2000.0;  // moving-average baseline of the envelope
  double smooth_hz = 3.0;          // low-pass on move command and joint speed
  double min_overlap_s = 10.0;
  std::size_t threads = 0;         // 0 = default_threads()

  nlohmann::json to_json() const;
};

struct SyncResult {
  double offset_ms = 0.0;
  Eigen::Index offset_samples = 0;
  double peak_correlation = 0.0;
  // (shift in ms, Pearson correlation), ascending shift.
  std::vector<std::pair<double, double>> curve;

  nlohmann::json to_json() const;
};

// Per channel: Hilbert envelope minus its centred moving-average baseline,
// rectified and low-pass smoothed. Non-negative.
Eigen::MatrixXd move_command(const EmgRecording& rec, const SyncConfig& cfg = {});

// Per time step, max over joints of the smoothed |d angle / dt| (deg/s).
Eigen::VectorXd joint_speed(const KinematicsTrack& track, double smooth_hz = 3.0);

// Two-pass Pearson correlation. NaN when either side is constant.
double pearson(std::span<const double> a, std::span<const double> b);

// Shift d maximising corr(M(t), V(t + d)). Pairing kin(t + d) with emg(t)
// (data::apply_offset with the returned offset) aligns the streams. Ties go
// to the smallest |d|.
SyncResult find_offset(const EmgRecording& rec, const KinematicsTrack& track, const SyncConfig& cfg = {});

// Same search on precomputed move command and speed series.
SyncResult find_offset(const Eigen::VectorXd& move, const Eigen::VectorXd& speed, double fs,
                       const SyncConfig& cfg = {});

// Aligns the session with `result` and records the offset. Throws
// kValidation when the session is already synchronised.
data::Session apply_sync(const data::Session& s, const SyncResult& result);

struct HalfSync {
  Eigen::Index split = 0;  // first sample of the second half
  SyncResult first;
  SyncResult second;
};

// Independent offsets for the first and second half of a session.
HalfSync find_offset_halves(const data::Session& s, const SyncConfig& cfg = {});

// Aligns each half with its own offset and joins them.
data::Session apply_sync(const data::Session& s, const HalfSync& halves);

struct OffsetRow {
  double offset_ms = 0.0;
  double mean_nmse = 0.0;
  double mean_abs_error = 0.0;
};

// Re-runs intra-subject CV after shifting the kinematics by each offset. All
// offsets are evaluated on the same number of samples.
std::vector<OffsetRow> offset_sweep_eval(const data::Session& s, const std::vector<double>& offsets_ms,
                                         const ModelBuilder& builder, const eval::CvConfig& cfg = {});

}  // namespace emgkin::sync
