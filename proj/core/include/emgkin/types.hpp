#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace emgkin {

// Multi-channel surface EMG, channel-major: data(c, t).
struct EmgRecording {
  Eigen::MatrixXd data;
  double fs = 0.0;
  std::vector<std::string> channel_names;

  Eigen::Index n_channels() const { return data.rows(); }
  Eigen::Index n_samples() const { return data.cols(); }
  double duration_s() const { return fs > 0 ? static_cast<double>(n_samples()) / fs : 0.0; }
};

// Joint angles in degrees, joint-major: angles(j, t).
struct KinematicsTrack {
  Eigen::MatrixXd angles;
  double fs = 0.0;
  std::vector<std::string> joint_names;

  Eigen::Index n_joints() const { return angles.rows(); }
  Eigen::Index n_samples() const { return angles.cols(); }
};

struct BandSpec {
  double low_hz = 0.0;
  double high_hz = 0.0;

  friend bool operator==(const BandSpec&, const BandSpec&) = default;
};

// Throws kValidation when the recording breaks its invariants
// (empty, non-positive fs, non-finite samples, name count mismatch).
void validate(const EmgRecording& rec);
void validate(const KinematicsTrack& track);

// Default names "ch0".."chN-1".
std::vector<std::string> default_channel_names(Eigen::Index n);

}  // namespace emgkin
