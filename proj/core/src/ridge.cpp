#include "emgkin/neural/ridge.hpp"

#include "emgkin/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace emgkin::neural {

namespace {

double mean_nmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  double total = 0.0;
  int used = 0;
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    const double mean = truth.col(j).mean();
    const double den = (truth.col(j).array() - mean).square().sum();
    if (den <= 0.0) continue;
    total += (pred.col(j) - truth.col(j)).squaredNorm() / den;
    ++used;
  }
  return used > 0 ? total / used : std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::MatrixXd RidgeModel::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != coef.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "ridge: feature width does not match the model");
  }
  Eigen::MatrixXd y = x * coef;
  y.rowwise() += intercept;
  return y;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -3; e <= 3; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

RidgeModel ridge_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda) {
  if (x.rows() != y.rows() || x.rows() == 0) {
    throw Error(ErrorKind::kShapeMismatch, "ridge: X and y must have the same non-zero row count");
  }
  if (!(lambda > 0.0)) throw Error(ErrorKind::kInvalidInput, "ridge: lambda must be positive");
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::MatrixXd yc = y.rowwise() - y_mean;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda;
  RidgeModel m;
  m.coef = gram.ldlt().solve(xc.transpose() * yc);
  m.intercept = y_mean - x_mean * m.coef;
  m.lambda = lambda;
  return m;
}

RidgeModel ridge_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& x_val,
                     const Eigen::MatrixXd& y_val, const std::vector<double>& lambda_grid) {
  if (lambda_grid.empty()) throw Error(ErrorKind::kInvalidInput, "ridge: empty lambda grid");
  RidgeModel best;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  for (double lambda : lambda_grid) {
    RidgeModel m = ridge_solve(x, y, lambda);
    const double score = mean_nmse(m.predict(x_val), y_val);
    scores.push_back(score);
    if (score < best_score || best.coef.size() == 0) {
      best_score = score;
      best = std::move(m);
    }
  }
  best.lambda_grid = lambda_grid;
  best.val_nmse = std::move(scores);
  return best;
}

}  // namespace emgkin::neural
