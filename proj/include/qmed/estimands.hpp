#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "qmed/model.hpp"
#include "qmed/stats.hpp"

namespace qmed {

// One quantile mediation contrast: exposure change s -> s_prime at quantile
// level tau, conditional on confounder profile x (intercept first).
struct EstimandQuery {
  double tau = 0.5;
  double s = 0.0;
  double s_prime = 1.0;
  Eigen::VectorXd x;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0))
      throw std::domain_error("EstimandQuery: tau must lie in (0,1)");
    if (x.size() == 0) throw std::invalid_argument("EstimandQuery: empty x");
  }
};

struct EstimandValue {
  double qnde = 0.0;
  double qnie = 0.0;
  double qte = 0.0;
  // Delta_{s',s'}, Delta_{s',s}, Delta_{s,s} in that order.
  double delta_terms[3] = {0.0, 0.0, 0.0};
};

// {gamma_S z_{s'} + alpha_S beta_M z_s + Phi^{-1}(tau)(1+beta_M^2)^{1/2}} / delta_Y.
inline double delta_term(const DagParams& dag, double tau, double z_sprime, double z_s) {
  if (dag.rho != 0.0)
    throw std::invalid_argument("delta_term: closed forms require rho = 0");
  const double drift = norm_quantile(tau) * std::sqrt(1.0 + dag.beta_m * dag.beta_m);
  return (dag.gamma_s * z_sprime + dag.alpha_s * dag.beta_m * z_s + drift) /
         dag.delta_y();
}

// Shared evaluation of the three Delta terms keeps qte = qnde + qnie exact.
inline EstimandValue estimands(const GsemModel& model, const EstimandQuery& q) {
  q.validate();
  if (model.dag.rho != 0.0)
    throw std::invalid_argument("estimands: closed forms require rho = 0");
  const double z_s = normal_score(model.marginal_s, q.s, q.x);
  const double z_sp = normal_score(model.marginal_s, q.s_prime, q.x);
  EstimandValue v;
  v.delta_terms[0] = delta_term(model.dag, q.tau, z_sp, z_sp);
  v.delta_terms[1] = delta_term(model.dag, q.tau, z_sp, z_s);
  v.delta_terms[2] = delta_term(model.dag, q.tau, z_s, z_s);
  const double q_spsp = model.marginal_y.quantile(norm_cdf(v.delta_terms[0]), q.x);
  const double q_sps = model.marginal_y.quantile(norm_cdf(v.delta_terms[1]), q.x);
  const double q_ss = model.marginal_y.quantile(norm_cdf(v.delta_terms[2]), q.x);
  v.qnde = q_sps - q_ss;
  v.qnie = q_spsp - q_sps;
  v.qte = v.qnde + v.qnie;
  return v;
}

inline double qnde(const GsemModel& model, const EstimandQuery& q) {
  return estimands(model, q).qnde;
}

inline double qnie(const GsemModel& model, const EstimandQuery& q) {
  return estimands(model, q).qnie;
}

inline double qte(const GsemModel& model, const EstimandQuery& q) {
  return estimands(model, q).qte;
}

// Per-tau estimand values over a grid; the CLI emits these as tables.
inline std::vector<EstimandValue> estimand_curve(const GsemModel& model,
                                                 EstimandQuery q,
                                                 const std::vector<double>& tau_grid) {
  std::vector<EstimandValue> out;
  out.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    q.tau = tau;
    out.push_back(estimands(model, q));
  }
  return out;
}

}  // namespace qmed
