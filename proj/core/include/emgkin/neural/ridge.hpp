#pragma once

#include <Eigen/Core>

#include <vector>

namespace emgkin::neural {

// Multi-output linear model y = x W + b.
struct RidgeModel {
  Eigen::MatrixXd coef;       // [features x outputs]
  Eigen::RowVectorXd intercept;
  double lambda = 0.0;
  std::vector<double> lambda_grid;
  std::vector<double> val_nmse;  // per grid entry; empty when not selected by validation

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

// 10^-3 .. 10^3, log-spaced, one per decade.
std::vector<double> default_lambda_grid();

// Closed form (Xc^T Xc + lambda I)^-1 Xc^T yc on centred data, intercept
// recovered from the means.
RidgeModel ridge_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda);

// Fits every lambda on (x, y) and keeps the one with the lowest mean NMSE on
// (x_val, y_val). All grid values must be positive.
RidgeModel ridge_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& x_val,
                     const Eigen::MatrixXd& y_val, const std::vector<double>& lambda_grid = default_lambda_grid());

}  // namespace emgkin::neural
