#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "qmed/stats.hpp"

namespace qmed {

struct PathFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
};

// Ordinary least squares with classical standard errors.
inline PathFit ols_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("ols_regression: singular design");
  PathFit f;
  f.coef = ldlt.solve(x.transpose() * y);
  const double n = static_cast<double>(y.size());
  const double p = static_cast<double>(x.cols());
  const double s2 = (y - x * f.coef).squaredNorm() / std::max(n - p, 1.0);
  const Eigen::MatrixXd cov = s2 * ldlt.solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  f.se = cov.diagonal().cwiseSqrt();
  return f;
}

// tau-level least-absolute-deviation (check-loss) regression by iteratively
// reweighted least squares, with large-sample standard errors from the iid
// sparsity form tau(1-tau) s(0)^2 (X'X)^{-1}, s(0) = 1/f(0) estimated by a
// Gaussian kernel on the residuals.
inline PathFit lad_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                              double tau, int max_iter = 60) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::domain_error("lad_regression: tau must lie in (0,1)");
  const Eigen::Index n = y.size();
  Eigen::VectorXd beta = ols_regression(y, x).coef;
  const double eps = 1e-6;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd r = y - x * beta;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = r[i] >= 0.0 ? tau : 1.0 - tau;
      w[i] = a / std::max(std::abs(r[i]), eps);
    }
    const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("lad_regression: singular design");
    const Eigen::VectorXd beta_new = ldlt.solve(x.transpose() * w.asDiagonal() * y);
    const double change = (beta_new - beta).lpNorm<Eigen::Infinity>();
    beta = beta_new;
    if (change < 1e-10) break;
  }
  const Eigen::VectorXd r = y - x * beta;
  // residual density at 0, Gaussian kernel, Silverman bandwidth
  std::vector<double> rv(r.data(), r.data() + n);
  const double sd = sample_sd(rv);
  const double h = 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
  double f0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) f0 += norm_pdf(r[i] / h);
  f0 /= static_cast<double>(n) * h;
  f0 = std::max(f0, 1e-10);
  const Eigen::MatrixXd xtx_inv =
      (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  PathFit f;
  f.coef = beta;
  f.se = (tau * (1.0 - tau) / (f0 * f0) * xtx_inv.diagonal()).cwiseSqrt();
  return f;
}

}  // namespace qmed
