#include "emgkin/types.hpp"

#include "emgkin/error.hpp"

#include <string>

namespace emgkin {

void validate(const EmgRecording& rec) {
  if (rec.n_channels() < 1 || rec.n_samples() < 1) {
    throw Error(ErrorKind::kValidation, "EMG recording is empty");
  }
  if (!(rec.fs > 0.0)) {
    throw Error(ErrorKind::kValidation, "EMG sampling rate must be positive");
  }
  if (!rec.data.allFinite()) {
    throw Error(ErrorKind::kValidation, "EMG recording contains NaN or Inf samples");
  }
  if (static_cast<Eigen::Index>(rec.channel_names.size()) != rec.n_channels()) {
    throw Error(ErrorKind::kValidation,
                "EMG channel name count " + std::to_string(rec.channel_names.size()) +
                    " does not match channel count " + std::to_string(rec.n_channels()));
  }
}

void validate(const KinematicsTrack& track) {
  if (track.n_joints() < 1 || track.n_samples() < 1) {
    throw Error(ErrorKind::kValidation, "kinematics track is empty");
  }
  if (!(track.fs > 0.0)) {
    throw Error(ErrorKind::kValidation, "kinematics sampling rate must be positive");
  }
  if (!track.angles.allFinite()) {
    throw Error(ErrorKind::kValidation, "kinematics track contains NaN or Inf angles");
  }
  if (track.angles.minCoeff() < 0.0 || track.angles.maxCoeff() > 360.0) {
    throw Error(ErrorKind::kValidation, "joint angles must lie within [0, 360] degrees");
  }
  if (static_cast<Eigen::Index>(track.joint_names.size()) != track.n_joints()) {
    throw Error(ErrorKind::kValidation,
                "joint name count " + std::to_string(track.joint_names.size()) +
                    " does not match joint count " + std::to_string(track.n_joints()));
  }
}

std::vector<std::string> default_channel_names(Eigen::Index n) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) names.push_back("ch" + std::to_string(i));
  return names;
}

}  // namespace emgkin
