#pragma once

#include <Eigen/Core>

namespace emgkin::neural {

inline constexpr int kTdfPerChannel = 7;

struct TdfThresholds {
  double ssc = 0.0;    // slope sign change: (x_t - x_{t-1})(x_t - x_{t+1}) > ssc
  double wamp = 0.05;  // Willison amplitude: |x_{t+1} - x_t| > wamp
};

// Per channel, in this order: MAV, RMS, max |x|, waveform length, slope sign
// changes, Willison amplitude, maximum fractal length. Output is channel-major
// (7 consecutive values per channel).
Eigen::VectorXd tdf_features(const Eigen::MatrixXd& window, const TdfThresholds& thresholds = {});

}  // namespace emgkin::neural
