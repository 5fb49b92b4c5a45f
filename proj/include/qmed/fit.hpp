#pragma once

#include <Eigen/Dense>
#include <array>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "qmed/copula.hpp"
#include "qmed/dag.hpp"
#include "qmed/dataset.hpp"
#include "qmed/model.hpp"
#include "qmed/optim.hpp"

namespace qmed {

// Marginal families for (S, M, Y).
using ModelSpec = std::array<Family, 3>;

struct FitResult {
  GsemModel model;
  std::array<double, 3> stage1_loglik = {0.0, 0.0, 0.0};
  double stage2_loglik = 0.0;
  int stage2_iterations = 0;
  bool converged = false;
  long clamp_count = 0;
};

namespace detail {

inline void check_full_rank(const Eigen::MatrixXd& x) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols())
    throw std::runtime_error("fit_marginal: rank-deficient design matrix");
}

inline double marginal_loglik(const MarginalModel& m, const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& x) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) ll += m.log_density(y[i], x.row(i));
  return ll;
}

inline MarginalModel fit_normal(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd zeta = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  const double rss = (y - x * zeta).squaredNorm();
  const double phi = std::max(rss / static_cast<double>(y.size()), 1e-12);
  return MarginalModel(Family::Normal, zeta, phi);
}

// Newton iterations on the exponential rate log-likelihood
//   sum_i { x_i'zeta - y_i exp(x_i'zeta) }.
inline MarginalModel fit_exponential(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                     int max_iter = 100) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] <= 0.0)
      throw std::domain_error("fit_marginal: exponential family requires values > 0");
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(x.cols());
  zeta[0] = -std::log(y.mean());
  double gnorm = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd rate = (x * zeta).array().exp();
    const Eigen::VectorXd w = y.cwiseProduct(rate);
    const Eigen::VectorXd grad = x.transpose() * (Eigen::VectorXd::Ones(y.size()) - w);
    gnorm = grad.norm();
    if (gnorm < 1e-10 * static_cast<double>(y.size())) break;
    const Eigen::MatrixXd hess = x.transpose() * w.asDiagonal() * x;
    zeta += hess.ldlt().solve(grad);
    if (it == max_iter - 1)
      throw std::runtime_error("fit_marginal: exponential fit did not converge, "
                               "gradient norm " + std::to_string(gnorm));
  }
  return MarginalModel(Family::Exponential, zeta, 1.0);
}

// Gamma with log link: Newton for zeta (phi cancels from the score), then the
// dispersion by maximizing the profile likelihood in log shape.
inline MarginalModel fit_gamma(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                               int max_iter = 100) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] <= 0.0)
      throw std::domain_error("fit_marginal: gamma family requires values > 0");
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(x.cols());
  zeta[0] = std::log(y.mean());
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd mu = (x * zeta).array().exp();
    const Eigen::VectorXd ratio = y.cwiseQuotient(mu);
    const Eigen::VectorXd grad =
        x.transpose() * (ratio - Eigen::VectorXd::Ones(y.size()));
    if (grad.norm() < 1e-10 * static_cast<double>(y.size())) break;
    const Eigen::MatrixXd hess = x.transpose() * ratio.asDiagonal() * x;
    zeta += hess.ldlt().solve(grad);
    if (it == max_iter - 1)
      throw std::runtime_error("fit_marginal: gamma fit did not converge, "
                               "gradient norm " + std::to_string(grad.norm()));
  }
  const Eigen::VectorXd mu = (x * zeta).array().exp();
  const double n = static_cast<double>(y.size());
  // d ell / d k = n(log k + 1) + sum(log y_i - log mu_i - y_i/mu_i) - n psi(k)
  double c = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    c += std::log(y[i]) - std::log(mu[i]) - y[i] / mu[i];
  c /= n;
  double log_k = 0.0;  // Newton in log k keeps the shape positive
  for (int it = 0; it < 100; ++it) {
    const double k = std::exp(log_k);
    const double score = std::log(k) + 1.0 + c - boost::math::digamma(k);
    const double dscore_dlogk = k * (1.0 / k - boost::math::polygamma(1, k));
    const double next = log_k - std::clamp(score / dscore_dlogk, -2.0, 2.0);
    if (std::abs(next - log_k) < 1e-12) { log_k = next; break; }
    log_k = next;
  }
  const double phi = 1.0 / std::exp(log_k);
  return MarginalModel(Family::Gamma, zeta, phi);
}

}  // namespace detail

enum class Role { S, M, Y };

inline MarginalModel fit_marginal(const Dataset& data, Role role, Family family) {
  detail::check_full_rank(data.x);
  const Eigen::VectorXd& y =
      role == Role::S ? data.s : (role == Role::M ? data.m : data.y);
  switch (family) {
    case Family::Normal: return detail::fit_normal(y, data.x);
    case Family::Exponential: return detail::fit_exponential(y, data.x);
    case Family::Gamma: return detail::fit_gamma(y, data.x);
  }
  throw std::logic_error("unreachable");
}

struct DagFit {
  DagParams dag;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  long clamp_count = 0;
};

struct DagFitOptions {
  double fixed_rho = 0.0;   // rho held at this value unless estimate_rho
  bool estimate_rho = false;  // 4-dim search with rho = tanh(u)
};

// Normal scores of all rows under the three fitted marginals, as an n x 3
// matrix, plus the sufficient statistic sum_i z_i z_i^T for the stage-2
// likelihood.
inline Eigen::MatrixXd normal_scores(const Dataset& data, const MarginalModel& ms,
                                     const MarginalModel& mm, const MarginalModel& my,
                                     long* clamp_count = nullptr) {
  Eigen::MatrixXd z(data.n(), 3);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const Eigen::VectorXd xi = data.x.row(i);
    z(i, 0) = normal_score(ms, data.s[i], xi, clamp_count);
    z(i, 1) = normal_score(mm, data.m[i], xi, clamp_count);
    z(i, 2) = normal_score(my, data.y[i], xi, clamp_count);
  }
  return z;
}

// Stage-2 MLE of (alpha_S, beta_M, gamma_S) given the score cross-product
// matrix; the copula likelihood depends on the data only through it.
inline DagFit fit_dag_scores(const Eigen::Matrix3d& zz_sum, double n,
                             const DagFitOptions& opts = {}) {
  const auto objective = [&](const Eigen::VectorXd& th) -> double {
    const double rho = opts.estimate_rho ? std::tanh(th[3]) : opts.fixed_rho;
    try {
      const Eigen::Matrix3d r =
          implied_correlation(DagParams(th[0], th[1], th[2], rho));
      return -gaussian_copula_log_density_sum(zz_sum, n, r);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(opts.estimate_rho ? 4 : 3);
  const OptimResult opt = minimize(objective, x0);
  if (!opt.converged)
    throw std::runtime_error("fit_dag: stage-2 optimizer did not converge, "
                             "gradient norm " + std::to_string(opt.grad_norm));
  DagFit out;
  const double rho = opts.estimate_rho ? std::tanh(opt.x[3]) : opts.fixed_rho;
  out.dag = DagParams(opt.x[0], opt.x[1], opt.x[2], rho);
  out.loglik = -opt.f;
  out.iterations = opt.iterations;
  out.converged = opt.converged;
  return out;
}

inline DagFit fit_dag(const Dataset& data, const MarginalModel& ms,
                      const MarginalModel& mm, const MarginalModel& my,
                      const DagFitOptions& opts = {}) {
  long clamps = 0;
  const Eigen::MatrixXd z = normal_scores(data, ms, mm, my, &clamps);
  const Eigen::Matrix3d zz_sum = z.transpose() * z;
  DagFit out = fit_dag_scores(zz_sum, static_cast<double>(data.n()), opts);
  out.clamp_count = clamps;
  return out;
}

// Two-stage IFM fit: marginal GLMs first, then the DAG parameters on the
// resulting normal scores.
inline FitResult fit(const Dataset& data, const ModelSpec& spec,
                     const DagFitOptions& opts = {}) {
  data.validate();
  FitResult r;
  r.model.marginal_s = fit_marginal(data, Role::S, spec[0]);
  r.model.marginal_m = fit_marginal(data, Role::M, spec[1]);
  r.model.marginal_y = fit_marginal(data, Role::Y, spec[2]);
  r.stage1_loglik[0] = detail::marginal_loglik(r.model.marginal_s, data.s, data.x);
  r.stage1_loglik[1] = detail::marginal_loglik(r.model.marginal_m, data.m, data.x);
  r.stage1_loglik[2] = detail::marginal_loglik(r.model.marginal_y, data.y, data.x);
  const DagFit df = fit_dag(data, r.model.marginal_s, r.model.marginal_m,
                            r.model.marginal_y, opts);
  r.model.dag = df.dag;
  r.stage2_loglik = df.loglik;
  r.stage2_iterations = df.iterations;
  r.converged = df.converged;
  r.clamp_count = df.clamp_count;
  return r;
}

}  // namespace qmed
