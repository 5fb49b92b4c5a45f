#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmed/estimands.hpp"
#include "qmed/fit.hpp"
#include "qmed/mediation_tests.hpp"
#include "qmed/parallel.hpp"
#include "qmed/rng.hpp"

namespace qmed {

// Data-generating design. benchmark_defaults() is the reference setup:
// normal S and M, exponential-rate Y, three correlated normal confounders.
struct SimScenario {
  Eigen::Index n = 300;
  DagParams dag{0.0, 0.0, 0.5};
  Eigen::VectorXd zeta_s, zeta_m, zeta_y;
  double sigma_s = 0.3, sigma_m = 0.3;
  double phi_y = 1.0;  // used only for a Gamma outcome
  ModelSpec families = {Family::Normal, Family::Normal, Family::Exponential};
  double x_sd = 0.3;        // sd of each non-intercept confounder
  double x_corr = 0.2;      // compound-symmetry correlation
  int R = 500;              // study replications
  AbConfig ab;              // bootstrap configuration (B, omega, lambda, seed)
  EstimandQuery query;
  int jobs = 1;

  static SimScenario benchmark_defaults() {
    SimScenario sc;
    sc.zeta_s = (Eigen::VectorXd(4) << 0.5, 0.2, 0.2, 0.0).finished();
    sc.zeta_m = (Eigen::VectorXd(4) << 0.8, 0.3, 0.3, 0.4).finished();
    sc.zeta_y = (Eigen::VectorXd(4) << -0.2, 0.4, -0.2, 0.7).finished();
    sc.query.tau = 0.5;
    sc.query.s = 0.0;
    sc.query.s_prime = 1.0;
    sc.query.x = (Eigen::VectorXd(4) << 1.0, 0.0, 0.0, 0.0).finished();
    sc.ab.B = 300;
    return sc;
  }

  Eigen::Index p() const { return zeta_s.size(); }

  // The generating GsemModel (true marginals + true DAG).
  GsemModel true_model() const {
    GsemModel m;
    m.marginal_s = MarginalModel(families[0], zeta_s, sigma_s * sigma_s);
    m.marginal_m = MarginalModel(families[1], zeta_m, sigma_m * sigma_m);
    m.marginal_y = MarginalModel(families[2], zeta_y,
                                 families[2] == Family::Gamma ? phi_y : 1.0);
    m.dag = dag;
    return m;
  }
};

// One draw of the generalized SEM: X, then latent W = (I-Theta)^{-1} eps,
// standardized to Z by (1, delta_M, delta_Y), then each margin via the
// probability-integral transform.
inline Dataset sample_gsem(const SimScenario& sc, Rng& rng) {
  const GsemModel model = sc.true_model();
  const Eigen::Index p = sc.p();
  // Cholesky factor of the confounder covariance x_sd^2 * CS(x_corr)
  Eigen::MatrixXd cs = Eigen::MatrixXd::Constant(p - 1, p - 1, sc.x_corr);
  cs.diagonal().setOnes();
  const Eigen::MatrixXd xchol =
      (sc.x_sd * sc.x_sd * cs).llt().matrixL();

  const double dm = sc.dag.delta_m();
  const double dy = sc.dag.delta_y();
  const double rho = sc.dag.rho;

  Dataset d;
  d.s.resize(sc.n);
  d.m.resize(sc.n);
  d.y.resize(sc.n);
  d.x.resize(sc.n, p);
  Eigen::VectorXd g(p - 1);
  for (Eigen::Index i = 0; i < sc.n; ++i) {
    d.x(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < p - 1; ++j) g[j] = rng.normal();
    d.x.row(i).tail(p - 1) = (xchol * g).transpose();

    const double eps_s = rng.normal();
    const double eps_m = rng.normal();
    const double e3 = rng.normal();
    const double eps_y = rho * eps_m + std::sqrt(1.0 - rho * rho) * e3;
    const double w_s = eps_s;
    const double w_m = sc.dag.alpha_s * w_s + eps_m;
    const double w_y = sc.dag.gamma_s * w_s + sc.dag.beta_m * w_m + eps_y;

    const Eigen::VectorXd xi = d.x.row(i);
    d.s[i] = model.marginal_s.quantile(norm_cdf(w_s), xi);
    d.m[i] = model.marginal_m.quantile(norm_cdf(w_m / dm), xi);
    d.y[i] = model.marginal_y.quantile(norm_cdf(w_y / dy), xi);
  }
  return d;
}

// Counterfactual Monte Carlo estimate of (qNDE, qNIE): simulate the latent
// outcome W_Y(a, b) = gamma z_a + beta(alpha z_b + eps_M) + eps_Y for the
// three exposure pairs and difference the empirical tau-quantiles. Standard
// errors by batching.
struct OracleResult {
  double qnde = 0.0, qnie = 0.0;
  double se_qnde = 0.0, se_qnie = 0.0;
};

inline OracleResult counterfactual_oracle(const GsemModel& model,
                                          const EstimandQuery& q,
                                          std::size_t n_mc, Rng& rng,
                                          int n_batches = 20) {
  q.validate();
  if (model.dag.rho != 0.0)
    throw std::invalid_argument("counterfactual_oracle: requires rho = 0");
  const double z_s = normal_score(model.marginal_s, q.s, q.x);
  const double z_sp = normal_score(model.marginal_s, q.s_prime, q.x);
  const double a = model.dag.alpha_s, b = model.dag.beta_m, g = model.dag.gamma_s;
  const double dy = model.dag.delta_y();

  std::vector<double> y_ss(n_mc), y_sps(n_mc), y_spsp(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double eps_m = rng.normal();
    const double eps_y = rng.normal();
    const auto to_y = [&](double z_direct, double z_med) {
      const double w = g * z_direct + b * (a * z_med + eps_m) + eps_y;
      return model.marginal_y.quantile(norm_cdf(w / dy), q.x);
    };
    y_ss[i] = to_y(z_s, z_s);
    y_sps[i] = to_y(z_sp, z_s);
    y_spsp[i] = to_y(z_sp, z_sp);
  }

  OracleResult r;
  r.qnde = empirical_quantile(y_sps, q.tau) - empirical_quantile(y_ss, q.tau);
  r.qnie = empirical_quantile(y_spsp, q.tau) - empirical_quantile(y_sps, q.tau);

  const std::size_t bs = n_mc / static_cast<std::size_t>(n_batches);
  std::vector<double> b_qnde, b_qnie;
  for (int k = 0; k < n_batches; ++k) {
    const auto slice = [&](const std::vector<double>& v) {
      return std::vector<double>(v.begin() + k * bs, v.begin() + (k + 1) * bs);
    };
    const double q_ss = empirical_quantile(slice(y_ss), q.tau);
    const double q_sps = empirical_quantile(slice(y_sps), q.tau);
    const double q_spsp = empirical_quantile(slice(y_spsp), q.tau);
    b_qnde.push_back(q_sps - q_ss);
    b_qnie.push_back(q_spsp - q_sps);
  }
  const double nb = std::sqrt(static_cast<double>(n_batches));
  r.se_qnde = sample_sd(b_qnde) / nb;
  r.se_qnie = sample_sd(b_qnie) / nb;
  return r;
}

// ---- study harness ---------------------------------------------------------

// Per-method p-values and rejection decisions over R replications.
struct MethodOutcome {
  std::vector<double> pvalues;
  std::vector<char> rejects;
  int failures = 0;

  double rejection_rate() const {
    if (rejects.empty()) return 0.0;
    double s = 0.0;
    for (char c : rejects) s += c;
    return s / static_cast<double>(rejects.size());
  }
  double rejection_se() const {
    const double p = rejection_rate();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(std::max<std::size_t>(
                                         rejects.size(), 1)));
  }
};

struct StudyReport {
  std::string study;
  std::vector<std::string> row_labels;
  // outcomes[row][method]
  std::vector<std::map<TestMethod, MethodOutcome>> outcomes;
  // mse rows (populated by the mse study only)
  struct MseRow {
    double alpha = 0.0, beta = 0.0;
    Eigen::Index n = 0;
    double mse_qnie = 0.0, mse_qnde = 0.0;
    double ratio_qnie = 1.0, ratio_qnde = 1.0;  // relative to the smallest n
  };
  std::vector<MseRow> mse_rows;
};

namespace detail {

// Runs all requested methods on one dataset; AB and naive QMA share the
// bootstrap, path competitors share theirs.
inline std::map<TestMethod, TestResult> run_methods(
    const Dataset& data, const SimScenario& sc,
    const std::vector<TestMethod>& methods, std::uint64_t rep_seed) {
  std::map<TestMethod, TestResult> out;
  AbConfig cfg = sc.ab;
  cfg.seed = rep_seed;
  cfg.jobs = 1;  // parallelism lives at the replication level
  const bool want_qma = [&] {
    for (auto m : methods)
      if (m == TestMethod::QmaAb || m == TestMethod::QmaB) return true;
    return false;
  }();
  const bool want_paths = [&] {
    for (auto m : methods)
      if (m == TestMethod::PocB || m == TestMethod::PocYm ||
          m == TestMethod::JsB || m == TestMethod::JsYm)
        return true;
    return false;
  }();
  if (want_qma) {
    const QmaTestPair pair =
        qma_tests_from_bootstrap(qma_bootstrap(data, sc.families, sc.query, cfg), cfg);
    out[TestMethod::QmaAb] = pair.ab;
    out[TestMethod::QmaB] = pair.naive;
  }
  if (want_paths) {
    const PathCompetitorResults pr = path_competitor_tests(data, sc.query, cfg);
    out[TestMethod::PocYm] = pr.poc_ym;
    out[TestMethod::PocB] = pr.poc_b;
    out[TestMethod::JsYm] = pr.js_ym;
    out[TestMethod::JsB] = pr.js_b;
  }
  return out;
}

inline std::map<TestMethod, MethodOutcome> replicate_loop(
    const SimScenario& sc, const std::vector<TestMethod>& methods,
    std::uint64_t case_key, const std::vector<DagParams>* dag_per_rep) {
  std::vector<std::map<TestMethod, TestResult>> results(sc.R);
  std::vector<char> ok(sc.R, 0);
  parallel_for(static_cast<std::size_t>(sc.R), sc.jobs, [&](std::size_t r) {
    SimScenario local = sc;
    if (dag_per_rep) local.dag = (*dag_per_rep)[r];
    Rng rng = Rng::stream(sc.ab.seed, {case_key, r, 0});
    const Dataset data = sample_gsem(local, rng);
    const std::uint64_t rep_seed =
        Rng::stream(sc.ab.seed, {case_key, r, 1}).next_u64();
    try {
      results[r] = run_methods(data, local, methods, rep_seed);
      ok[r] = 1;
    } catch (const std::exception&) {
      ok[r] = 0;
    }
  });
  std::map<TestMethod, MethodOutcome> agg;
  for (auto m : methods) agg[m] = MethodOutcome{};
  for (int r = 0; r < sc.R; ++r) {
    for (auto m : methods) {
      if (!ok[r]) {
        ++agg[m].failures;
        continue;
      }
      agg[m].pvalues.push_back(results[r].at(m).p_value);
      agg[m].rejects.push_back(results[r].at(m).reject);
    }
  }
  return agg;
}

}  // namespace detail

// The three fixed-null cases of the type I error study (gamma_S stays at the
// scenario value).
inline std::vector<std::pair<std::string, DagParams>> fixed_null_cases(
    const SimScenario& sc) {
  return {{"omega01", DagParams(0.5, 0.0, sc.dag.gamma_s)},
          {"omega02", DagParams(0.0, 0.5, sc.dag.gamma_s)},
          {"omega03", DagParams(0.0, 0.0, sc.dag.gamma_s)}};
}

inline StudyReport run_null_study(const SimScenario& sc,
                                  const std::vector<TestMethod>& methods,
                                  const std::vector<std::string>& cases = {}) {
  if (sc.R < 100) throw std::invalid_argument("run_null_study: need R >= 100");
  StudyReport rep;
  rep.study = "null";
  std::uint64_t case_key = 100;
  for (const auto& [name, dag] : fixed_null_cases(sc)) {
    ++case_key;
    if (!cases.empty() &&
        std::find(cases.begin(), cases.end(), name) == cases.end())
      continue;
    SimScenario local = sc;
    local.dag = dag;
    rep.row_labels.push_back(name);
    rep.outcomes.push_back(detail::replicate_loop(local, methods, case_key, nullptr));
  }
  return rep;
}

inline StudyReport run_mixture_null_study(const SimScenario& sc,
                                          const std::array<double, 3>& probs,
                                          const std::vector<TestMethod>& methods) {
  const double total = probs[0] + probs[1] + probs[2];
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("run_mixture_null_study: probabilities must sum to 1");
  const auto cases = fixed_null_cases(sc);
  std::vector<DagParams> dag_per_rep(sc.R);
  for (int r = 0; r < sc.R; ++r) {
    Rng rng = Rng::stream(sc.ab.seed, {0x313du, static_cast<std::uint64_t>(r)});
    const double u = rng.uniform();
    const int k = u < probs[0] ? 0 : (u < probs[0] + probs[1] ? 1 : 2);
    dag_per_rep[r] = cases[static_cast<std::size_t>(k)].second;
  }
  StudyReport rep;
  rep.study = "mixture";
  rep.row_labels.push_back("mixture");
  rep.outcomes.push_back(detail::replicate_loop(sc, methods, 0x31337u, &dag_per_rep));
  return rep;
}

// grid_type: "equal" varies alpha = beta over the grid values; "ratio" keeps
// alpha*beta = signal^2 and varies alpha/beta over the grid values.
inline StudyReport run_power_study(const SimScenario& sc,
                                   const std::vector<TestMethod>& methods,
                                   const std::vector<double>& grid,
                                   const std::string& grid_type = "equal",
                                   double signal = 0.2) {
  StudyReport rep;
  rep.study = "power";
  std::uint64_t case_key = 7000;
  for (double gval : grid) {
    ++case_key;
    SimScenario local = sc;
    if (grid_type == "equal") {
      local.dag = DagParams(gval, gval, sc.dag.gamma_s);
    } else if (grid_type == "ratio") {
      if (!(gval > 0.0))
        throw std::invalid_argument("run_power_study: ratio grid must be > 0");
      const double alpha = signal * std::sqrt(gval);
      local.dag = DagParams(alpha, signal * signal / alpha, sc.dag.gamma_s);
    } else {
      throw std::invalid_argument("run_power_study: unknown grid type " + grid_type);
    }
    rep.row_labels.push_back(grid_type + "=" + std::to_string(gval));
    rep.outcomes.push_back(detail::replicate_loop(local, methods, case_key, nullptr));
  }
  return rep;
}

// MSE of the plug-in estimands over R replications per (dag, n) cell, with
// ratios relative to the smallest n in the grid.
inline StudyReport run_mse_study(const SimScenario& sc,
                                 const std::vector<Eigen::Index>& n_grid,
                                 const std::vector<std::pair<double, double>>& dag_grid) {
  StudyReport rep;
  rep.study = "mse";
  std::uint64_t case_key = 5000;
  for (const auto& [alpha, beta] : dag_grid) {
    double base_qnie = -1.0, base_qnde = -1.0;
    for (Eigen::Index n : n_grid) {
      ++case_key;
      SimScenario local = sc;
      local.dag = DagParams(alpha, beta, sc.dag.gamma_s);
      local.n = n;
      const EstimandValue truth = estimands(local.true_model(), local.query);
      std::vector<double> err_qnie(local.R), err_qnde(local.R);
      parallel_for(static_cast<std::size_t>(local.R), sc.jobs, [&](std::size_t r) {
        Rng rng = Rng::stream(sc.ab.seed, {case_key, r});
        const Dataset data = sample_gsem(local, rng);
        const FitResult fr = fit(data, local.families);
        const EstimandValue est = estimands(fr.model, local.query);
        err_qnie[r] = est.qnie - truth.qnie;
        err_qnde[r] = est.qnde - truth.qnde;
      });
      StudyReport::MseRow row;
      row.alpha = alpha;
      row.beta = beta;
      row.n = n;
      for (int r = 0; r < local.R; ++r) {
        row.mse_qnie += err_qnie[r] * err_qnie[r];
        row.mse_qnde += err_qnde[r] * err_qnde[r];
      }
      row.mse_qnie /= local.R;
      row.mse_qnde /= local.R;
      if (base_qnie < 0.0) {
        base_qnie = row.mse_qnie;
        base_qnde = row.mse_qnde;
      }
      row.ratio_qnie = base_qnie / row.mse_qnie;
      row.ratio_qnde = base_qnde / row.mse_qnde;
      rep.mse_rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace qmed
