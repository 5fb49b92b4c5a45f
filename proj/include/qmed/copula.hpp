#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace qmed {

// Log density of the trivariate Gaussian copula at normal scores z:
//   -1/2 log det R - 1/2 z^T (R^{-1} - I) z.
inline double gaussian_copula_log_density(const Eigen::Vector3d& z,
                                          const Eigen::Matrix3d& r) {
  Eigen::LLT<Eigen::Matrix3d> llt(r);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "gaussian_copula_log_density: singular correlation matrix "
        "(degenerate DAG parameters)");
  const Eigen::Matrix3d l = llt.matrixL();
  const double log_det = 2.0 * std::log(l(0, 0) * l(1, 1) * l(2, 2));
  const Eigen::Vector3d w = llt.solve(z);
  return -0.5 * log_det - 0.5 * (z.dot(w) - z.squaredNorm());
}

// Summed copula log density over n rows given S = sum_i z_i z_i^T. Used by the
// stage-2 likelihood, which then costs O(1) per parameter evaluation.
inline double gaussian_copula_log_density_sum(const Eigen::Matrix3d& zz_sum,
                                              double n,
                                              const Eigen::Matrix3d& r) {
  Eigen::LLT<Eigen::Matrix3d> llt(r);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "gaussian_copula_log_density_sum: singular correlation matrix");
  const Eigen::Matrix3d l = llt.matrixL();
  const double log_det = 2.0 * std::log(l(0, 0) * l(1, 1) * l(2, 2));
  const Eigen::Matrix3d rinv = llt.solve(Eigen::Matrix3d::Identity());
  const double quad = (rinv - Eigen::Matrix3d::Identity()).cwiseProduct(zz_sum).sum();
  return -0.5 * n * log_det - 0.5 * quad;
}

}  // namespace qmed
