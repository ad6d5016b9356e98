#pragma once

#include "emgkin/types.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace emgkin::data {

struct Provenance {
  enum class Kind { kReal, kSynthetic };
  Kind kind = Kind::kReal;
  std::uint64_t seed = 0;
  nlohmann::json params;  // generator or importer parameters
};

struct Session {
  EmgRecording emg;
  KinematicsTrack kin;
  std::string subject_id;
  double sync_offset_ms = 0.0;
  bool sync_applied = false;
  Provenance provenance;
  std::map<std::string, std::string> attributes;  // free-form metadata, round-tripped
};

// Session invariants: both streams valid, same rate, same sample count.
void validate(const Session& s);

// ---- joint map ------------------------------------------------------------------

inline constexpr int kLandmarkCount = 21;
inline constexpr int kJointCount = 15;

struct JointTriplet {
  int a, b, c;  // angle measured at b
  const char* name;
};

// Three joints per finger on the standard 21-point hand topology
// (0 wrist; thumb 1-4; index 5-8; middle 9-12; ring 13-16; pinky 17-20).
const std::array<JointTriplet, kJointCount>& joint_map();
std::vector<std::string> joint_names();

// Finger label of a joint name ("thumb", "index", ...), from its prefix.
std::string finger_of(const std::string& joint_name);

using HandFrame = std::array<Eigen::Vector3d, kLandmarkCount>;

struct LandmarkAngles {
  KinematicsTrack track;
  std::size_t filled = 0;  // degenerate (joint, frame) entries in-filled
};

// Angle at b between (a - b) and (c - b), degrees in [0, 180]. Degenerate
// triplets are linearly in-filled from neighbouring frames.
LandmarkAngles angles_from_landmarks(const std::vector<HandFrame>& frames, double fs);

// ---- canonical directory format ----------------------------------------------------

void save_session(const Session& s, const std::filesystem::path& dir);
Session load_session(const std::filesystem::path& dir);

// Raw matrix file: magic, row count, row length, float32 little-endian rows.
void write_matrix_file(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_file(const std::filesystem::path& path);

// Rounds every entry to the nearest float32, the storage precision.
void quantize_to_storage(Eigen::MatrixXd& m);

// Trims both streams so that kin(t) := kin(t + offset). Positive offsets
// pair EMG with later kinematics.
Session apply_offset(const Session& s, double offset_ms);

// Samples [begin, end) of both streams.
Session slice(const Session& s, Eigen::Index begin, Eigen::Index end);

// ---- synthetic generator -------------------------------------------------------------

struct SynthConfig {
  int n_joints = kJointCount;
  int n_channels = 8;
  double duration_s = 300.0;
  double fs = 500.0;
  // [channels x joints], non-negative. Empty = drawn from the seed.
  Eigen::MatrixXd coupling;
  // [channels x joints], non-negative posture (hold) drive. Empty = drawn.
  Eigen::MatrixXd posture_coupling;
  double baseline = 0.1;       // tonic activation floor
  double speed_ref = 400.0;    // deg/s mapped to unit activation
  double noise = 0.05;         // additive broadband noise std
  int n_attractors = 6;
  double dwell_s = 2.0;        // mean time between posture switches
  double jitter = 0.04;        // per-joint posture noise (fraction of range)
  double smoothing_hz = 2.0;   // low-pass on posture switches
  double crosstalk = 0.6;      // spatial spread of each source, in channels
  double electrode_shift = 0.0;  // rotation of the armband, in channels
  Eigen::VectorXd channel_gain;  // per channel; empty = ones
  double sync_shift_ms = 0.0;  // kinematics delayed by this much
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  void validate() const;
};

// Joint angles follow smoothed posture-attractor trajectories in
// [10, 170] deg. Muscle m drives a 15-150 Hz noise carrier with amplitude
//   baseline + sum_j coupling(m,j) |dtheta_j/dt| / speed_ref
//            + sum_j posture_coupling(m,j) (theta_j - 10) / 160
// and each channel picks up its neighbours' carriers (crosstalk) plus white
// noise. Fully determined by the seed.
Session generate_synthetic(const SynthConfig& cfg);

// Subjects sharing one coupling (the mapping to learn) but differing in
// electrode placement and channel gains.
std::vector<Session> generate_population(const SynthConfig& base, int n_subjects,
                                         double placement_variation = 0.5);

// ---- dataset import ---------------------------------------------------------------------

// Adapter for one on-disk archive layout.
class ArchiveAdapter {
 public:
  virtual ~ArchiveAdapter() = default;
  virtual std::string name() const = 0;
  virtual bool detect(const std::filesystem::path& archive) const = 0;
  virtual std::vector<Session> load(const std::filesystem::path& archive) const = 0;
};

void register_adapter(std::unique_ptr<ArchiveAdapter> adapter);

// Runs the first adapter whose detect() accepts the path. Throws
// kUnsupportedLayout when none does.
std::vector<Session> import_emgfk(const std::filesystem::path& archive);

// Acquisition-band preprocessing applied to raw EMG streams:
// 15-150 Hz band-pass and 50/100 Hz notches, zero phase.
EmgRecording acquisition_filter(const EmgRecording& raw);

}  // namespace emgkin::data
