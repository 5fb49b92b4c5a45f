#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace qmed {

// Structural coefficients of the S -> M -> Y DAG on the latent-normal scale,
// plus an optional hypothesized corr(eps_M, eps_Y) used in sensitivity
// analysis (rho = 0 everywhere else).
struct DagParams {
  double alpha_s = 0.0;  // S -> M
  double beta_m = 0.0;   // M -> Y
  double gamma_s = 0.0;  // S -> Y
  double rho = 0.0;      // corr(eps_M, eps_Y)

  DagParams() = default;
  DagParams(double a, double b, double g, double r = 0.0)
      : alpha_s(a), beta_m(b), gamma_s(g), rho(r) {
    if (!(std::abs(rho) < 1.0))
      throw std::domain_error("DagParams: |rho| must be < 1");
  }

  double eta() const { return alpha_s * beta_m + gamma_s; }
  double delta_m() const { return std::sqrt(alpha_s * alpha_s + 1.0); }
  // Latent sd of W_Y; reduces to (eta^2 + beta^2 + 1)^{1/2} at rho = 0.
  double delta_y() const {
    const double e = eta();
    return std::sqrt(e * e + beta_m * beta_m + 1.0 + 2.0 * beta_m * rho);
  }
};

// Weighted adjacency matrix LT(alpha_S, gamma_S, beta_M), rows/cols (S,M,Y).
inline Eigen::Matrix3d adjacency(const DagParams& dag) {
  Eigen::Matrix3d theta = Eigen::Matrix3d::Zero();
  theta(1, 0) = dag.alpha_s;
  theta(2, 0) = dag.gamma_s;
  theta(2, 1) = dag.beta_m;
  return theta;
}

// Correlation matrix of the latent system W_S = eps_S, W_M = alpha W_S + eps_M,
// W_Y = gamma W_S + beta W_M + eps_Y with corr(eps_M, eps_Y) = rho.
inline Eigen::Matrix3d implied_correlation(const DagParams& dag) {
  const double e = dag.eta();
  const double dm = dag.delta_m();
  const double dy = dag.delta_y();
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r(0, 1) = r(1, 0) = dag.alpha_s / dm;
  r(0, 2) = r(2, 0) = e / dy;
  r(1, 2) = r(2, 1) = (dag.alpha_s * e + dag.beta_m + dag.rho) / (dm * dy);
  Eigen::LLT<Eigen::Matrix3d> llt(r);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("implied_correlation: matrix not positive definite");
  return r;
}

}  // namespace qmed
