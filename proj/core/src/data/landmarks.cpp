#include "emgkin/data.hpp"

#include "emgkin/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <numbers>

namespace emgkin::data {

const std::array<JointTriplet, kJointCount>& joint_map() {
  static const std::array<JointTriplet, kJointCount> map = {{
      {0, 1, 2, "thumb_cmc"},   {1, 2, 3, "thumb_mcp"},    {2, 3, 4, "thumb_ip"},
      {0, 5, 6, "index_mcp"},   {5, 6, 7, "index_pip"},    {6, 7, 8, "index_dip"},
      {0, 9, 10, "middle_mcp"}, {9, 10, 11, "middle_pip"}, {10, 11, 12, "middle_dip"},
      {0, 13, 14, "ring_mcp"},  {13, 14, 15, "ring_pip"},  {14, 15, 16, "ring_dip"},
      {0, 17, 18, "pinky_mcp"}, {17, 18, 19, "pinky_pip"}, {18, 19, 20, "pinky_dip"},
  }};
  return map;
}

std::vector<std::string> joint_names() {
  std::vector<std::string> out;
  for (const auto& t : joint_map()) out.emplace_back(t.name);
  return out;
}

std::string finger_of(const std::string& joint_name) {
  const auto cut = joint_name.find('_');
  return cut == std::string::npos ? joint_name : joint_name.substr(0, cut);
}

namespace {

double triplet_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d u = a - b;
  const Eigen::Vector3d v = c - b;
  const double nu = u.norm();
  const double nv = v.norm();
  const double scale = std::max({a.norm(), b.norm(), c.norm(), 1.0});
  if (!std::isfinite(nu) || !std::isfinite(nv) || nu <= 1e-12 * scale || nv <= 1e-12 * scale) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  // atan2 form keeps precision near 0 and 180 degrees
  const double angle = std::atan2(u.cross(v).norm(), u.dot(v));
  return angle * 180.0 / std::numbers::pi;
}

}  // namespace

LandmarkAngles angles_from_landmarks(const std::vector<HandFrame>& frames, double fs) {
  if (!(fs > 0.0)) throw Error(ErrorKind::kInvalidInput, "frame rate must be positive");
  if (frames.empty()) throw Error(ErrorKind::kInsufficientData, "no landmark frames");
  const auto n = static_cast<Eigen::Index>(frames.size());
  LandmarkAngles out;
  out.track.fs = fs;
  out.track.joint_names = joint_names();
  out.track.angles.resize(kJointCount, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& f = frames[static_cast<std::size_t>(t)];
    for (int j = 0; j < kJointCount; ++j) {
      const auto& trip = joint_map()[static_cast<std::size_t>(j)];
      out.track.angles(j, t) = triplet_angle(f[trip.a], f[trip.b], f[trip.c]);
    }
  }

  // Linear in-fill of flagged frames; edges hold the nearest valid value.
  for (int j = 0; j < kJointCount; ++j) {
    auto row = out.track.angles.row(j);
    Eigen::Index prev = -1;
    for (Eigen::Index t = 0; t <= n; ++t) {
      if (t < n && std::isnan(row(t))) continue;
      const Eigen::Index gap_begin = prev + 1;
      if (t - gap_begin > 0) {
        if (prev < 0 && t == n) {
          throw Error(ErrorKind::kInsufficientData,
                      std::string("joint ") + joint_map()[static_cast<std::size_t>(j)].name +
                          " is degenerate in every frame");
        }
        for (Eigen::Index k = gap_begin; k < t; ++k) {
          if (prev < 0) {
            row(k) = row(t);
          } else if (t == n) {
            row(k) = row(prev);
          } else {
            const double w = static_cast<double>(k - prev) / static_cast<double>(t - prev);
            row(k) = (1.0 - w) * row(prev) + w * row(t);
          }
          ++out.filled;
        }
      }
      prev = t;
    }
  }
  return out;
}

}  // namespace emgkin::data
