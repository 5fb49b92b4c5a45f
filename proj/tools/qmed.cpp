// qmed: quantile mediation analysis on a Gaussian-copula generalized SEM.
// Subcommands: fit, estimate, test, simulate, study, sensitivity, gof,
// screen, combine, fdr.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qmed/qmed.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Removes any files created by a failed subcommand so that no partial
// outputs survive.
class OutputGuard {
 public:
  std::ofstream& open(const std::string& path) {
    files_.emplace_back(path, std::ofstream(path));
    auto& [p, stream] = files_.back();
    if (!stream) throw std::runtime_error("cannot open output file: " + p);
    return stream;
  }
  void commit() {
    for (auto& [p, stream] : files_) stream.close();
    committed_ = true;
  }
  ~OutputGuard() {
    if (committed_) return;
    for (auto& [p, stream] : files_) {
      stream.close();
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

 private:
  std::vector<std::pair<std::string, std::ofstream>> files_;
  bool committed_ = false;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

// "a:b:step" inclusive grid
std::vector<double> parse_grid(const std::string& s) {
  double a, b, step;
  if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 || step <= 0.0)
    throw CLI::ValidationError("grid must have the form start:stop:step");
  std::vector<double> g;
  for (double v = a; v <= b + 1e-12; v += step) g.push_back(v);
  return g;
}

json to_json(const qmed::TestResult& t) {
  return json{{"method", qmed::method_name(t.method)},
              {"estimate", t.estimate},
              {"p_value", t.p_value},
              {"reject", t.reject},
              {"interval", {t.lower, t.upper}},
              {"diagnostics",
               {{"flag_fraction", t.flag_fraction},
                {"t_alpha", t.t_alpha},
                {"t_beta", t.t_beta},
                {"lambda_n", t.lambda_n},
                {"b_effective", t.b_effective}}}};
}

json to_json(const qmed::MarginalModel& m) {
  return json{{"family", qmed::family_name(m.family)},
              {"zeta", std::vector<double>(m.zeta.data(), m.zeta.data() + m.zeta.size())},
              {"phi", m.phi}};
}

void write_manifest(bool enabled, const std::string& anchor_path, const json& cfg) {
  if (!enabled) return;
  std::ofstream out(anchor_path + ".manifest.json");
  out << cfg.dump(2) << "\n";
}

void write_svg_xy(std::ostream& out, const std::vector<double>& xs,
                  const std::vector<std::pair<std::string, std::vector<double>>>& series,
                  const std::string& title, bool scatter) {
  const int w = 480, h = 480, margin = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (double x : xs) { xmin = std::min(xmin, x); xmax = std::max(xmax, x); }
  for (const auto& [name, ys] : series)
    for (double y : ys) { ymin = std::min(ymin, y); ymax = std::max(ymax, y); }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  const auto px = [&](double x) {
    return margin + (x - xmin) / (xmax - xmin) * (w - 2 * margin);
  };
  const auto py = [&](double y) {
    return h - margin - (y - ymin) / (ymax - ymin) * (h - 2 * margin);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#ff7f0e", "#9467bd", "#8c564b"};
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << w / 2 << "' y='20' text-anchor='middle'>" << title
      << "</text>\n"
      << "<line x1='" << margin << "' y1='" << h - margin << "' x2='" << w - margin
      << "' y2='" << h - margin << "' stroke='black'/>\n"
      << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin
      << "' y2='" << h - margin << "' stroke='black'/>\n";
  int ci = 0;
  for (const auto& [name, ys] : series) {
    const char* color = colors[ci % 6];
    if (scatter) {
      for (std::size_t i = 0; i < xs.size(); ++i)
        out << "<circle cx='" << px(xs[i]) << "' cy='" << py(ys[i])
            << "' r='2' fill='" << color << "'/>\n";
    } else {
      out << "<polyline fill='none' stroke='" << color << "' points='";
      for (std::size_t i = 0; i < xs.size(); ++i)
        out << px(xs[i]) << ',' << py(ys[i]) << ' ';
      out << "'/>\n";
    }
    out << "<text x='" << w - margin << "' y='" << margin + 15 * ci
        << "' text-anchor='end' fill='" << color << "'>" << name << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

struct CommonOpts {
  std::string input, output = "-";
  std::uint64_t seed = 0;
  int jobs = qmed::default_jobs();
  bool manifest = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_input = true) {
  if (needs_input)
    cmd->add_option("--input", o.input, "input dataset CSV")->required();
  cmd->add_option("--output", o.output, "output path ('-' for stdout)");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--jobs", o.jobs, "worker threads (env QMED_JOBS)");
  cmd->add_flag("--manifest", o.manifest, "write resolved config next to outputs");
}

struct FamilyOpts {
  std::string s = "normal", m = "normal", y = "exponential";
  qmed::ModelSpec spec() const {
    return {qmed::family_from_name(s), qmed::family_from_name(m),
            qmed::family_from_name(y)};
  }
};

void add_families(CLI::App* cmd, FamilyOpts& f) {
  const auto check = CLI::IsMember({"normal", "exponential", "gamma"});
  cmd->add_option("--family-s", f.s, "S marginal family")->check(check);
  cmd->add_option("--family-m", f.m, "M marginal family")->check(check);
  cmd->add_option("--family-y", f.y, "Y marginal family")->check(check);
}

struct QueryOpts {
  double tau = 0.5, s = 0.0, s_prime = 1.0;
  std::string x = "1";
  qmed::EstimandQuery query() const {
    qmed::EstimandQuery q;
    q.tau = tau;
    q.s = s;
    q.s_prime = s_prime;
    q.x = to_vector(parse_list(x));
    return q;
  }
};

void add_query(CLI::App* cmd, QueryOpts& q) {
  cmd->add_option("--tau", q.tau, "quantile level in (0,1)");
  cmd->add_option("--s", q.s, "baseline exposure");
  cmd->add_option("--s-prime", q.s_prime, "comparison exposure");
  cmd->add_option("--x", q.x, "confounder profile, comma list, intercept first");
}

std::ostream& output_stream(OutputGuard& guard, const std::string& path,
                            std::ostream& fallback = std::cout) {
  if (path == "-") return fallback;
  return guard.open(path);
}

void emit_study_report(const qmed::StudyReport& rep, const std::string& outdir,
                       const std::string& format, OutputGuard& guard) {
  fs::create_directories(outdir);
  json j{{"study", rep.study}, {"rows", json::array()}};
  std::ostringstream rates;
  rates << "row,method,rejection_rate,rejection_se,failures\n";
  for (std::size_t i = 0; i < rep.row_labels.size(); ++i) {
    json row{{"label", rep.row_labels[i]}, {"methods", json::object()}};
    for (const auto& [method, oc] : rep.outcomes[i]) {
      row["methods"][qmed::method_name(method)] = {
          {"rejection_rate", oc.rejection_rate()},
          {"rejection_se", oc.rejection_se()},
          {"failures", oc.failures}};
      rates << rep.row_labels[i] << ',' << qmed::method_name(method) << ','
            << oc.rejection_rate() << ',' << oc.rejection_se() << ','
            << oc.failures << "\n";
      // QQ-plot-ready table: sorted p-values vs uniform quantiles
      std::vector<double> p = oc.pvalues;
      std::sort(p.begin(), p.end());
      const std::string base =
          outdir + "/qq_" + rep.row_labels[i] + "_" + qmed::method_name(method);
      auto& qq = guard.open(base + ".csv");
      qq << "uniform_quantile,p_value\n";
      std::vector<double> uq(p.size());
      for (std::size_t k = 0; k < p.size(); ++k) {
        uq[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(p.size());
        qq << uq[k] << ',' << p[k] << "\n";
      }
      if (format == "svg") {
        auto& svg = guard.open(base + ".svg");
        write_svg_xy(svg, uq, {{qmed::method_name(method), p}},
                     "p-value QQ: " + rep.row_labels[i], true);
      }
    }
    j["rows"].push_back(row);
  }
  for (const auto& r : rep.mse_rows) {
    j["mse"].push_back({{"alpha", r.alpha},
                        {"beta", r.beta},
                        {"n", r.n},
                        {"mse_qnie", r.mse_qnie},
                        {"ratio_qnie", r.ratio_qnie},
                        {"mse_qnde", r.mse_qnde},
                        {"ratio_qnde", r.ratio_qnde}});
  }
  if (!rep.mse_rows.empty()) {
    auto& mse = guard.open(outdir + "/mse.csv");
    mse << "alpha,beta,n,mse_qnie,ratio_qnie,mse_qnde,ratio_qnde\n";
    for (const auto& r : rep.mse_rows)
      mse << r.alpha << ',' << r.beta << ',' << r.n << ',' << r.mse_qnie << ','
          << r.ratio_qnie << ',' << r.mse_qnde << ',' << r.ratio_qnde << "\n";
  }
  if (!rep.outcomes.empty()) {
    auto& rc = guard.open(outdir + "/rates.csv");
    rc << rates.str();
  }
  auto& js = guard.open(outdir + "/report.json");
  js << j.dump(2) << "\n";
}

std::vector<qmed::TestMethod> parse_methods(const std::string& list) {
  std::vector<qmed::TestMethod> out;
  std::stringstream ss(list);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(qmed::method_from_name(cell));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantile mediation analysis for Gaussian-copula generalized SEMs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags override");

  // ---- fit ----
  CommonOpts fit_o;
  FamilyOpts fit_f;
  bool fit_rho = false;
  auto* cmd_fit = app.add_subcommand("fit", "two-stage maximum-likelihood fit");
  add_common(cmd_fit, fit_o);
  add_families(cmd_fit, fit_f);
  cmd_fit->add_flag("--estimate-rho", fit_rho, "also estimate corr(eps_M, eps_Y)");

  // ---- estimate ----
  CommonOpts est_o;
  FamilyOpts est_f;
  QueryOpts est_q;
  std::string est_tau_grid = "0.05:0.95:0.05";
  double est_alpha = 0.0, est_beta = 0.0, est_gamma = 0.0;
  std::string est_zeta_s, est_zeta_m, est_zeta_y;
  double est_phi_s = 1.0, est_phi_m = 1.0, est_phi_y = 1.0;
  auto* cmd_est = app.add_subcommand(
      "estimate", "closed-form qNDE/qNIE/qTE table over a tau grid");
  add_common(cmd_est, est_o, false);
  cmd_est->add_option("--input", est_o.input,
                      "dataset CSV to fit (omit to pass model parameters)");
  add_families(cmd_est, est_f);
  add_query(cmd_est, est_q);
  cmd_est->add_option("--tau-grid", est_tau_grid, "start:stop:step");
  cmd_est->add_option("--alpha", est_alpha, "alpha_S (when no --input)");
  cmd_est->add_option("--beta", est_beta, "beta_M");
  cmd_est->add_option("--gamma", est_gamma, "gamma_S");
  cmd_est->add_option("--zeta-s", est_zeta_s, "S coefficients, comma list");
  cmd_est->add_option("--zeta-m", est_zeta_m, "M coefficients");
  cmd_est->add_option("--zeta-y", est_zeta_y, "Y coefficients");
  cmd_est->add_option("--phi-s", est_phi_s, "S dispersion");
  cmd_est->add_option("--phi-m", est_phi_m, "M dispersion");
  cmd_est->add_option("--phi-y", est_phi_y, "Y dispersion");

  // ---- test ----
  CommonOpts test_o;
  FamilyOpts test_f;
  QueryOpts test_q;
  std::string test_method = "qma-ab", test_u_csv;
  int test_B = 500;
  double test_lambda = 2.0, test_omega = 0.05;
  bool test_centered = true;
  auto* cmd_test = app.add_subcommand("test", "mediation hypothesis test");
  add_common(cmd_test, test_o);
  add_families(cmd_test, test_f);
  add_query(cmd_test, test_q);
  cmd_test->add_option("--method", test_method, "test method")
      ->check(CLI::IsMember({"qma-ab", "qma-b", "poc-b", "poc-ym", "js-b", "js-ym"}));
  cmd_test->add_option("--B", test_B, "bootstrap replicates");
  cmd_test->add_option("--lambda-scale", test_lambda, "pretest threshold scale");
  cmd_test->add_option("--omega", test_omega, "nominal level");
  cmd_test->add_flag("--centered-z,!--uncentered-z", test_centered,
                     "use centered bootstrap Z* in the local statistic (default on)");
  cmd_test->add_option("--u-csv", test_u_csv, "also write raw U*_b values as CSV");

  // ---- simulate ----
  CommonOpts sim_o;
  double sim_alpha = 0.0, sim_beta = 0.0, sim_gamma = 0.5, sim_rho = 0.0;
  Eigen::Index sim_n = 300;
  auto* cmd_sim = app.add_subcommand("simulate", "draw a dataset from the SEM");
  add_common(cmd_sim, sim_o, false);
  cmd_sim->add_option("--n", sim_n, "sample size");
  cmd_sim->add_option("--alpha", sim_alpha, "alpha_S");
  cmd_sim->add_option("--beta", sim_beta, "beta_M");
  cmd_sim->add_option("--gamma", sim_gamma, "gamma_S");
  cmd_sim->add_option("--rho", sim_rho, "corr(eps_M, eps_Y)");

  // ---- study ----
  CommonOpts study_o;
  std::string study_kind, study_case, study_methods =
      "qma-ab,qma-b,poc-b,poc-ym,js-b,js-ym";
  std::string study_probs = "0.333333,0.333333,0.333334";
  std::string study_grid = "0:0.2:0.05", study_grid_type = "equal";
  std::string study_ngrid = "200,400,600,800", study_format = "csv";
  Eigen::Index study_n = 300;
  int study_R = 500, study_B = 300;
  double study_omega = 0.05, study_lambda = 2.0;
  auto* cmd_study = app.add_subcommand("study", "simulation studies");
  cmd_study->add_option("kind", study_kind, "null | mixture | power | mse")
      ->required()
      ->check(CLI::IsMember({"null", "mixture", "power", "mse"}));
  add_common(cmd_study, study_o, false);
  cmd_study->add_option("--case", study_case, "null case: omega01|omega02|omega03");
  cmd_study->add_option("--n", study_n, "sample size");
  cmd_study->add_option("--R", study_R, "replications");
  cmd_study->add_option("--B", study_B, "bootstrap replicates per test");
  cmd_study->add_option("--omega", study_omega, "nominal level");
  cmd_study->add_option("--lambda-scale", study_lambda, "pretest threshold scale");
  cmd_study->add_option("--methods", study_methods, "comma list of methods");
  cmd_study->add_option("--probs", study_probs, "mixture probabilities, comma list");
  cmd_study->add_option("--grid", study_grid, "power grid start:stop:step");
  cmd_study->add_option("--grid-type", study_grid_type, "equal | ratio");
  cmd_study->add_option("--n-grid", study_ngrid, "mse sample sizes, comma list");
  cmd_study->add_option("--format", study_format, "csv | json | svg")
      ->check(CLI::IsMember({"csv", "json", "svg"}));

  // ---- sensitivity ----
  CommonOpts sens_o;
  FamilyOpts sens_f;
  QueryOpts sens_q;
  std::string sens_grid = "-0.9:0.9:0.01";
  auto* cmd_sens = app.add_subcommand(
      "sensitivity", "qNIE as a function of hypothesized error correlation rho");
  add_common(cmd_sens, sens_o);
  add_families(cmd_sens, sens_f);
  add_query(cmd_sens, sens_q);
  cmd_sens->add_option("--rho-grid", sens_grid, "start:stop:step in (-1,1)");

  // ---- gof ----
  CommonOpts gof_o;
  FamilyOpts gof_f;
  int gof_folds = 5, gof_B = 200;
  auto* cmd_gof = app.add_subcommand("gof", "copula goodness-of-fit test");
  add_common(cmd_gof, gof_o);
  add_families(cmd_gof, gof_f);
  cmd_gof->add_option("--folds", gof_folds, "cross-validation folds");
  cmd_gof->add_option("--B", gof_B, "parametric bootstrap refits");

  // ---- combine ----
  CommonOpts comb_o;
  std::string comb_method = "cauchy", comb_p;
  auto* cmd_comb = app.add_subcommand("combine", "combine p-values");
  add_common(cmd_comb, comb_o, false);
  cmd_comb->add_option("--method", comb_method)->check(CLI::IsMember({"cauchy"}));
  cmd_comb->add_option("--p", comb_p, "comma list of p-values")->required();

  // ---- fdr ----
  CommonOpts fdr_o;
  std::string fdr_p;
  double fdr_q = 0.1;
  auto* cmd_fdr = app.add_subcommand("fdr", "Benjamini-Hochberg selection");
  add_common(cmd_fdr, fdr_o, false);
  cmd_fdr->add_option("--p", fdr_p, "comma list of p-values")->required();
  cmd_fdr->add_option("--q", fdr_q, "FDR level");

  // ---- screen ----
  CommonOpts scr_o;
  FamilyOpts scr_f;
  QueryOpts scr_q;
  int scr_B = 500;
  double scr_qlevel = 0.1, scr_lambda = 2.0, scr_omega = 0.05;
  auto* cmd_scr = app.add_subcommand(
      "screen", "multi-mediator screen: AB test per mediator + Cauchy + FDR");
  add_common(cmd_scr, scr_o);
  add_families(cmd_scr, scr_f);
  add_query(cmd_scr, scr_q);
  cmd_scr->add_option("--B", scr_B, "bootstrap replicates per mediator");
  cmd_scr->add_option("--q", scr_qlevel, "FDR level");
  cmd_scr->add_option("--lambda-scale", scr_lambda, "pretest threshold scale");
  cmd_scr->add_option("--omega", scr_omega, "nominal level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    OutputGuard guard;

    if (*cmd_fit) {
      const qmed::Dataset data = qmed::read_dataset_csv(fit_o.input);
      qmed::DagFitOptions opts;
      opts.estimate_rho = fit_rho;
      const qmed::FitResult fr = qmed::fit(data, fit_f.spec(), opts);
      json j{{"marginal_s", to_json(fr.model.marginal_s)},
             {"marginal_m", to_json(fr.model.marginal_m)},
             {"marginal_y", to_json(fr.model.marginal_y)},
             {"dag",
              {{"alpha_s", fr.model.dag.alpha_s},
               {"beta_m", fr.model.dag.beta_m},
               {"gamma_s", fr.model.dag.gamma_s},
               {"rho", fr.model.dag.rho}}},
             {"stage1_loglik", fr.stage1_loglik},
             {"stage2_loglik", fr.stage2_loglik},
             {"stage2_iterations", fr.stage2_iterations},
             {"converged", fr.converged},
             {"clamp_count", fr.clamp_count}};
      output_stream(guard, fit_o.output) << j.dump(2) << "\n";
      write_manifest(fit_o.manifest, fit_o.output == "-" ? "qmed_fit" : fit_o.output,
                     json{{"subcommand", "fit"},
                          {"input", fit_o.input},
                          {"families", {fit_f.s, fit_f.m, fit_f.y}},
                          {"estimate_rho", fit_rho}});
      guard.commit();
      return 0;
    }

    if (*cmd_est) {
      qmed::GsemModel model;
      if (!est_o.input.empty()) {
        const qmed::Dataset data = qmed::read_dataset_csv(est_o.input);
        model = qmed::fit(data, est_f.spec()).model;
        model.dag = qmed::DagParams(model.dag.alpha_s, model.dag.beta_m,
                                    model.dag.gamma_s, 0.0);
      } else {
        if (est_zeta_s.empty() || est_zeta_m.empty() || est_zeta_y.empty())
          throw std::runtime_error(
              "estimate: pass --input or all of --zeta-s/--zeta-m/--zeta-y");
        const auto spec = est_f.spec();
        model.marginal_s =
            qmed::MarginalModel(spec[0], to_vector(parse_list(est_zeta_s)), est_phi_s);
        model.marginal_m =
            qmed::MarginalModel(spec[1], to_vector(parse_list(est_zeta_m)), est_phi_m);
        model.marginal_y =
            qmed::MarginalModel(spec[2], to_vector(parse_list(est_zeta_y)), est_phi_y);
        model.dag = qmed::DagParams(est_alpha, est_beta, est_gamma);
      }
      const auto grid = parse_grid(est_tau_grid);
      const auto values = qmed::estimand_curve(model, est_q.query(), grid);
      auto& out = output_stream(guard, est_o.output);
      out << "tau,qnde,qnie,qte\n";
      out.precision(12);
      for (std::size_t i = 0; i < grid.size(); ++i)
        out << grid[i] << ',' << values[i].qnde << ',' << values[i].qnie << ','
            << values[i].qte << "\n";
      write_manifest(est_o.manifest,
                     est_o.output == "-" ? "qmed_estimate" : est_o.output,
                     json{{"subcommand", "estimate"},
                          {"tau_grid", est_tau_grid},
                          {"query", {{"s", est_q.s}, {"s_prime", est_q.s_prime},
                                     {"x", est_q.x}}}});
      guard.commit();
      return 0;
    }

    if (*cmd_test) {
      const qmed::Dataset data = qmed::read_dataset_csv(test_o.input);
      const qmed::EstimandQuery q = test_q.query();
      qmed::AbConfig cfg;
      cfg.B = test_B;
      cfg.lambda_scale = test_lambda;
      cfg.omega = test_omega;
      cfg.seed = test_o.seed;
      cfg.centered_z = test_centered;
      cfg.jobs = test_o.jobs;
      const qmed::TestMethod method = qmed::method_from_name(test_method);
      qmed::TestResult result;
      std::vector<double> u_values;
      if (method == qmed::TestMethod::QmaAb || method == qmed::TestMethod::QmaB) {
        const auto pair = qmed::qma_tests_from_bootstrap(
            qmed::qma_bootstrap(data, test_f.spec(), q, cfg), cfg);
        result = method == qmed::TestMethod::QmaAb ? pair.ab : pair.naive;
        u_values = method == qmed::TestMethod::QmaAb ? pair.u_ab : pair.u_naive;
      } else if (method == qmed::TestMethod::PocYm) {
        result = qmed::sobel_poc_test(data, q, cfg.omega);
      } else {
        const auto pr = qmed::path_competitor_tests(data, q, cfg);
        result = method == qmed::TestMethod::PocB
                     ? pr.poc_b
                     : (method == qmed::TestMethod::JsB ? pr.js_b : pr.js_ym);
      }
      output_stream(guard, test_o.output) << to_json(result).dump(2) << "\n";
      if (!test_u_csv.empty()) {
        auto& uout = guard.open(test_u_csv);
        uout << "u\n";
        uout.precision(17);
        for (double u : u_values) uout << u << "\n";
      }
      write_manifest(test_o.manifest,
                     test_o.output == "-" ? "qmed_test" : test_o.output,
                     json{{"subcommand", "test"},
                          {"method", test_method},
                          {"B", test_B},
                          {"lambda_scale", test_lambda},
                          {"omega", test_omega},
                          {"seed", test_o.seed},
                          {"tau", test_q.tau},
                          {"s", test_q.s},
                          {"s_prime", test_q.s_prime},
                          {"x", test_q.x}});
      guard.commit();
      return 0;
    }

    if (*cmd_sim) {
      qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
      sc.n = sim_n;
      sc.dag = qmed::DagParams(sim_alpha, sim_beta, sim_gamma, sim_rho);
      qmed::Rng rng = qmed::Rng::stream(sim_o.seed, {0x51313u});
      const qmed::Dataset data = qmed::sample_gsem(sc, rng);
      if (sim_o.output == "-") {
        qmed::write_dataset_csv(data, std::cout);
      } else {
        qmed::write_dataset_csv(data, guard.open(sim_o.output));
      }
      write_manifest(sim_o.manifest,
                     sim_o.output == "-" ? "qmed_simulate" : sim_o.output,
                     json{{"subcommand", "simulate"},
                          {"n", sim_n},
                          {"dag", {sim_alpha, sim_beta, sim_gamma, sim_rho}},
                          {"seed", sim_o.seed}});
      guard.commit();
      return 0;
    }

    if (*cmd_study) {
      qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
      sc.n = study_n;
      sc.R = study_R;
      sc.ab.B = study_B;
      sc.ab.omega = study_omega;
      sc.ab.lambda_scale = study_lambda;
      sc.ab.seed = study_o.seed;
      sc.jobs = study_o.jobs;
      const auto methods = parse_methods(study_methods);
      const std::string outdir =
          study_o.output == "-" ? "qmed_study_" + study_kind : study_o.output;
      qmed::StudyReport rep;
      if (study_kind == "null") {
        std::vector<std::string> cases;
        if (!study_case.empty()) cases.push_back(study_case);
        rep = qmed::run_null_study(sc, methods, cases);
      } else if (study_kind == "mixture") {
        const auto probs = parse_list(study_probs);
        if (probs.size() != 3)
          throw std::runtime_error("study mixture: --probs needs 3 values");
        rep = qmed::run_mixture_null_study(sc, {probs[0], probs[1], probs[2]}, methods);
      } else if (study_kind == "power") {
        rep = qmed::run_power_study(sc, methods, parse_grid(study_grid),
                                    study_grid_type);
      } else {
        std::vector<Eigen::Index> ngrid;
        for (double v : parse_list(study_ngrid))
          ngrid.push_back(static_cast<Eigen::Index>(v));
        rep = qmed::run_mse_study(sc, ngrid,
                                  {{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.5}, {0.5, 0.5}});
      }
      emit_study_report(rep, outdir, study_format, guard);
      write_manifest(study_o.manifest, outdir + "/study",
                     json{{"subcommand", "study"},
                          {"kind", study_kind},
                          {"n", study_n},
                          {"R", study_R},
                          {"B", study_B},
                          {"seed", study_o.seed},
                          {"methods", study_methods}});
      guard.commit();
      return 0;
    }

    if (*cmd_sens) {
      const qmed::Dataset data = qmed::read_dataset_csv(sens_o.input);
      const auto curve = qmed::sensitivity_curve(data, sens_f.spec(), sens_q.query(),
                                                 parse_grid(sens_grid));
      auto& out = output_stream(guard, sens_o.output);
      out << "rho,qnie\n";
      out.precision(12);
      for (std::size_t i = 0; i < curve.rho_grid.size(); ++i)
        out << curve.rho_grid[i] << ',' << curve.qnie_at_rho[i] << "\n";
      json j{{"observed_abs_corr", curve.observed_abs_corr}};
      if (curve.breakpoint_abs_rho)
        j["breakpoint_abs_rho"] = *curve.breakpoint_abs_rho;
      std::cerr << j.dump(2) << "\n";
      write_manifest(sens_o.manifest,
                     sens_o.output == "-" ? "qmed_sensitivity" : sens_o.output,
                     json{{"subcommand", "sensitivity"}, {"rho_grid", sens_grid}});
      guard.commit();
      return 0;
    }

    if (*cmd_gof) {
      const qmed::Dataset data = qmed::read_dataset_csv(gof_o.input);
      const double p = qmed::gof_test(data, gof_f.spec(), gof_folds, gof_B,
                                      gof_o.seed, gof_o.jobs);
      output_stream(guard, gof_o.output)
          << json{{"p_value", p}, {"folds", gof_folds}, {"B", gof_B}}.dump(2) << "\n";
      guard.commit();
      return 0;
    }

    if (*cmd_comb) {
      const double p = qmed::cauchy_combination(parse_list(comb_p));
      output_stream(guard, comb_o.output) << json{{"p_value", p}}.dump(2) << "\n";
      guard.commit();
      return 0;
    }

    if (*cmd_fdr) {
      const auto p = parse_list(fdr_p);
      const auto sel = qmed::bh_fdr(p, fdr_q);
      output_stream(guard, fdr_o.output)
          << json{{"selected", sel}, {"q", fdr_q}}.dump(2) << "\n";
      guard.commit();
      return 0;
    }

    if (*cmd_scr) {
      // CSV schema: S, Y, X1..Xp as usual; every remaining column is a
      // candidate mediator.
      std::ifstream in(scr_o.input);
      if (!in) throw std::runtime_error("cannot open: " + scr_o.input);
      std::string line;
      std::getline(in, line);
      std::vector<std::string> header;
      {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
          while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
            cell.pop_back();
          header.push_back(cell);
        }
      }
      std::vector<std::vector<double>> rows;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != header.size())
          throw std::runtime_error("screen: ragged CSV row");
        rows.push_back(std::move(row));
      }
      long si = -1, yi = -1;
      std::vector<long> xi;
      std::vector<long> med_cols;
      std::vector<std::string> med_names;
      for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == "S") si = static_cast<long>(j);
        else if (header[j] == "Y") yi = static_cast<long>(j);
        else if (header[j].size() >= 2 && header[j][0] == 'X' &&
                 std::isdigit(static_cast<unsigned char>(header[j][1])))
          xi.push_back(static_cast<long>(j));
        else {
          med_cols.push_back(static_cast<long>(j));
          med_names.push_back(header[j]);
        }
      }
      if (si < 0 || yi < 0 || xi.empty() || med_cols.empty())
        throw std::runtime_error("screen: need columns S, Y, X1..Xp and mediators");

      qmed::Dataset base;
      const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
      base.s.resize(n);
      base.y.resize(n);
      base.m.resize(n);
      base.x.resize(n, static_cast<Eigen::Index>(xi.size()));
      for (Eigen::Index i = 0; i < n; ++i) {
        base.s[i] = rows[i][si];
        base.y[i] = rows[i][yi];
        for (std::size_t j = 0; j < xi.size(); ++j)
          base.x(i, static_cast<Eigen::Index>(j)) = rows[i][xi[j]];
      }
      const qmed::EstimandQuery q = scr_q.query();
      std::vector<double> pvals(med_cols.size());
      std::vector<double> estimates(med_cols.size());
      qmed::parallel_for(med_cols.size(), scr_o.jobs, [&](std::size_t k) {
        qmed::Dataset d = base;
        for (Eigen::Index i = 0; i < n; ++i) d.m[i] = rows[i][med_cols[k]];
        qmed::AbConfig cfg;
        cfg.B = scr_B;
        cfg.lambda_scale = scr_lambda;
        cfg.omega = scr_omega;
        cfg.seed = qmed::Rng::stream(scr_o.seed, {0x5c4ee0u, k}).next_u64();
        cfg.jobs = 1;
        const auto t = qmed::ab_test(d, scr_f.spec(), q, cfg);
        pvals[k] = t.p_value;
        estimates[k] = t.estimate;
      });
      const double overall = qmed::cauchy_combination(pvals);
      const auto selected = qmed::bh_fdr(pvals, scr_qlevel);
      json j{{"overall_cauchy_p", overall}, {"fdr_q", scr_qlevel},
             {"mediators", json::array()}};
      std::vector<char> is_sel(med_cols.size(), 0);
      for (auto k : selected) is_sel[k] = 1;
      for (std::size_t k = 0; k < med_cols.size(); ++k)
        j["mediators"].push_back({{"name", med_names[k]},
                                  {"qnie", estimates[k]},
                                  {"p_value", pvals[k]},
                                  {"selected", static_cast<bool>(is_sel[k])}});
      output_stream(guard, scr_o.output) << j.dump(2) << "\n";
      write_manifest(scr_o.manifest,
                     scr_o.output == "-" ? "qmed_screen" : scr_o.output,
                     json{{"subcommand", "screen"},
                          {"B", scr_B},
                          {"q", scr_qlevel},
                          {"seed", scr_o.seed}});
      guard.commit();
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "qmed: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qmed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
