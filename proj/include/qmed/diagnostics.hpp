#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmed/estimands.hpp"
#include "qmed/fit.hpp"
#include "qmed/mediation_tests.hpp"
#include "qmed/parallel.hpp"
#include "qmed/rng.hpp"

namespace qmed {

// ---- sensitivity analysis over hypothesized error correlation rho ----------

struct SensitivityCurve {
  std::vector<double> rho_grid;
  std::vector<double> qnie_at_rho;  // NaN where the refit failed
  std::optional<double> breakpoint_abs_rho;
  double observed_abs_corr = 0.0;
};

inline std::vector<double> default_rho_grid() {
  std::vector<double> g;
  for (int k = -90; k <= 90; ++k) g.push_back(k / 100.0);
  return g;
}

// Re-runs the stage-2 fit with rho held at each grid value and evaluates the
// closed-form qNIE at the rho-adjusted structural coefficients. The residual
// scores eps_M = Z_M - alpha Z_S and eps_Y = Z_Y - gamma Z_S - beta delta_M Z_M
// give the observed correlation the breakpoint is compared against.
inline SensitivityCurve sensitivity_curve(const Dataset& data, const ModelSpec& spec,
                                          const EstimandQuery& q,
                                          std::vector<double> rho_grid =
                                              default_rho_grid()) {
  if (std::find(rho_grid.begin(), rho_grid.end(), 0.0) == rho_grid.end())
    throw std::invalid_argument("sensitivity_curve: grid must include rho = 0");
  for (double r : rho_grid)
    if (!(std::abs(r) < 1.0))
      throw std::invalid_argument("sensitivity_curve: grid must lie in (-1,1)");
  std::sort(rho_grid.begin(), rho_grid.end());

  GsemModel stage1;
  stage1.marginal_s = fit_marginal(data, Role::S, spec[0]);
  stage1.marginal_m = fit_marginal(data, Role::M, spec[1]);
  stage1.marginal_y = fit_marginal(data, Role::Y, spec[2]);
  const Eigen::MatrixXd z =
      normal_scores(data, stage1.marginal_s, stage1.marginal_m, stage1.marginal_y);
  const Eigen::Matrix3d zz_sum = z.transpose() * z;
  const double n = static_cast<double>(data.n());

  const auto qnie_at = [&](double rho) -> double {
    DagFitOptions opts;
    opts.fixed_rho = rho;
    const DagFit df = fit_dag_scores(zz_sum, n, opts);
    GsemModel m = stage1;
    m.dag = DagParams(df.dag.alpha_s, df.dag.beta_m, df.dag.gamma_s, 0.0);
    return qnie(m, q);
  };

  SensitivityCurve curve;
  curve.rho_grid = rho_grid;
  curve.qnie_at_rho.resize(rho_grid.size(),
                           std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < rho_grid.size(); ++i) {
    try {
      curve.qnie_at_rho[i] = qnie_at(rho_grid[i]);
    } catch (const std::exception&) {
      // non-convergent grid point: flagged as NaN, not fatal
    }
  }

  // observed residual correlation at the rho = 0 fit
  {
    const DagFit df = fit_dag_scores(zz_sum, n, DagFitOptions{});
    const double a = df.dag.alpha_s, b = df.dag.beta_m, g = df.dag.gamma_s;
    const double dm = df.dag.delta_m();
    std::vector<double> em(data.n()), ey(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      em[i] = z(i, 1) - a * z(i, 0);
      ey[i] = z(i, 2) - g * z(i, 0) - b * dm * z(i, 1);
    }
    curve.observed_abs_corr = std::abs(correlation(em, ey));
  }

  // smallest |rho| at which qnie crosses zero, refined by bisection refits
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < rho_grid.size(); ++i) {
    const double f0 = curve.qnie_at_rho[i], f1 = curve.qnie_at_rho[i + 1];
    if (std::isnan(f0) || std::isnan(f1)) continue;
    if (f0 == 0.0) best = std::min(best, std::abs(rho_grid[i]));
    if (f1 == 0.0) best = std::min(best, std::abs(rho_grid[i + 1]));
    if (f0 * f1 < 0.0) {
      double lo = rho_grid[i], hi = rho_grid[i + 1], flo = f0;
      for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        double fmid;
        try {
          fmid = qnie_at(mid);
        } catch (const std::exception&) {
          break;
        }
        if (flo * fmid <= 0.0) hi = mid;
        else { lo = mid; flo = fmid; }
        if (hi - lo < 1e-4) break;
      }
      const double root = 0.5 * (lo + hi);
      best = std::min(best, std::abs(root));
    }
  }
  if (std::isfinite(best)) curve.breakpoint_abs_rho = best;
  return curve;
}

// ---- copula goodness of fit -------------------------------------------------

namespace detail {

inline double copula_pseudo_loglik(const Dataset& data, const GsemModel& model) {
  const Eigen::MatrixXd z = normal_scores(data, model.marginal_s, model.marginal_m,
                                          model.marginal_y);
  const Eigen::Matrix3d zz_sum = z.transpose() * z;
  return gaussian_copula_log_density_sum(zz_sum, static_cast<double>(data.n()),
                                         model.correlation());
}

// Cross-validated pseudo-likelihood-ratio statistic: per fold, fit on the
// complement and compare the scaled in-sample pseudo-likelihood against the
// held-out one.
inline double gof_statistic(const Dataset& data, const ModelSpec& spec, int folds,
                            std::uint64_t shuffle_seed) {
  const Eigen::Index n = data.n();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(shuffle_seed, {0x60fu});
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const Eigen::Index j = static_cast<Eigen::Index>(
        rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  double stat = 0.0;
  for (int k = 0; k < folds; ++k) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<int>(i) % folds == k) test.push_back(order[i]);
      else train.push_back(order[i]);
    }
    const Dataset dtrain = data.resample(train);
    const Dataset dtest = data.resample(test);
    const FitResult fr = fit(dtrain, spec);
    const double scale =
        static_cast<double>(dtest.n()) / static_cast<double>(dtrain.n());
    stat += scale * copula_pseudo_loglik(dtrain, fr.model) -
            copula_pseudo_loglik(dtest, fr.model);
  }
  return stat;
}

// Parametric simulation from a fitted model reusing the observed X rows.
inline Dataset simulate_from_model(const GsemModel& model, const Eigen::MatrixXd& x,
                                   Rng& rng) {
  const double dm = model.dag.delta_m();
  const double dy = model.dag.delta_y();
  const double rho = model.dag.rho;
  Dataset d;
  const Eigen::Index n = x.rows();
  d.s.resize(n);
  d.m.resize(n);
  d.y.resize(n);
  d.x = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eps_s = rng.normal();
    const double eps_m = rng.normal();
    const double e3 = rng.normal();
    const double eps_y = rho * eps_m + std::sqrt(1.0 - rho * rho) * e3;
    const double w_s = eps_s;
    const double w_m = model.dag.alpha_s * w_s + eps_m;
    const double w_y = model.dag.gamma_s * w_s + model.dag.beta_m * w_m + eps_y;
    const Eigen::VectorXd xi = x.row(i);
    d.s[i] = model.marginal_s.quantile(norm_cdf(w_s), xi);
    d.m[i] = model.marginal_m.quantile(norm_cdf(w_m / dm), xi);
    d.y[i] = model.marginal_y.quantile(norm_cdf(w_y / dy), xi);
  }
  return d;
}

}  // namespace detail

// Cross-validated pseudo-likelihood-ratio test of the Gaussian-copula
// specification, calibrated by B parametric-bootstrap refits from the fitted
// model. Returns the bootstrap p-value.
inline double gof_test(const Dataset& data, const ModelSpec& spec, int folds = 5,
                       int B = 200, std::uint64_t seed = 0, int jobs = 1) {
  if (data.n() < 4 * folds)
    throw std::invalid_argument("gof_test: need n >= 4*folds");
  const double observed = detail::gof_statistic(data, spec, folds, seed);
  const FitResult full = fit(data, spec);
  std::vector<double> null_stats(B, std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<std::size_t>(B), jobs, [&](std::size_t b) {
    Rng rng = Rng::stream(seed, {0x60f2u, b});
    try {
      const Dataset sim = detail::simulate_from_model(full.model, data.x, rng);
      null_stats[b] = detail::gof_statistic(sim, spec, folds, seed + 1 + b);
    } catch (const std::exception&) {
      // counted below
    }
  });
  int fails = 0, ge = 0, got = 0;
  for (double s : null_stats) {
    if (std::isnan(s)) { ++fails; continue; }
    ++got;
    if (s >= observed) ++ge;
  }
  if (fails > B / 5)
    throw std::runtime_error("gof_test: > 20% bootstrap refit failures");
  return (1.0 + ge) / (1.0 + got);
}

// ---- p-value machinery -------------------------------------------------------

// Cauchy combination: T = mean of tan{(0.5 - p_i) pi}; returns 0.5 - atan(T)/pi.
inline double cauchy_combination(std::vector<double> p) {
  if (p.empty()) throw std::invalid_argument("cauchy_combination: empty list");
  double t = 0.0;
  for (double& pi_v : p) {
    if (!(pi_v > 0.0 && pi_v < 1.0))
      pi_v = std::clamp(pi_v, 1e-15, 1.0 - 1e-15);
    t += std::tan((0.5 - pi_v) * kPi);
  }
  t /= static_cast<double>(p.size());
  return 0.5 - std::atan(t) / kPi;
}

// Benjamini-Hochberg step-up selection at FDR level q_level.
inline std::vector<std::size_t> bh_fdr(const std::vector<double>& p, double q_level) {
  if (!(q_level > 0.0 && q_level < 1.0))
    throw std::domain_error("bh_fdr: q must lie in (0,1)");
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  double threshold = -1.0;
  for (std::size_t k = m; k >= 1; --k) {
    const double cutoff =
        static_cast<double>(k) * q_level / static_cast<double>(m);
    if (p[order[k - 1]] <= cutoff) {
      threshold = cutoff;
      break;
    }
  }
  std::vector<std::size_t> selected;
  if (threshold < 0.0) return selected;
  for (std::size_t i = 0; i < m; ++i)
    if (p[i] <= threshold) selected.push_back(i);
  return selected;
}

}  // namespace qmed
