#include "emgkin/neural/tdf.hpp"

#include "emgkin/error.hpp"

#include <algorithm>
#include <cmath>

namespace emgkin::neural {

Eigen::VectorXd tdf_features(const Eigen::MatrixXd& window, const TdfThresholds& thresholds) {
  if (window.cols() < 3) throw Error(ErrorKind::kInsufficientData, "TDF needs at least 3 samples");
  const Eigen::Index n = window.cols();
  Eigen::VectorXd out(kTdfPerChannel * window.rows());
  for (Eigen::Index c = 0; c < window.rows(); ++c) {
    const Eigen::ArrayXd x = window.row(c).transpose().array();
    const Eigen::ArrayXd d = x.tail(n - 1) - x.head(n - 1);

    double ssc = 0.0;
    for (Eigen::Index t = 1; t + 1 < n; ++t) {
      if ((x(t) - x(t - 1)) * (x(t) - x(t + 1)) > thresholds.ssc) ssc += 1.0;
    }
    const double wamp = (d.abs() > thresholds.wamp).count();
    // floor keeps the log finite on flat windows
    const double mfl = std::log10(std::sqrt(std::max(d.square().sum(), 1e-24)));

    auto f = out.segment(kTdfPerChannel * c, kTdfPerChannel);
    f(0) = x.abs().mean();
    f(1) = std::sqrt(x.square().mean());
    f(2) = x.abs().maxCoeff();
    f(3) = d.abs().sum();
    f(4) = ssc;
    f(5) = wamp;
    f(6) = mfl;
  }
  return out;
}

}  // namespace emgkin::neural
