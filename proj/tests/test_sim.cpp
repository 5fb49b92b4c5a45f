#include <gtest/gtest.h>

#include "qmed/sim.hpp"

namespace {

TEST(SampleGsem, ShapesAndIntercept) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.n = 50;
  qmed::Rng rng = qmed::Rng::stream(1, {1});
  const qmed::Dataset d = qmed::sample_gsem(sc, rng);
  EXPECT_EQ(d.n(), 50);
  EXPECT_EQ(d.p(), 4);
  for (Eigen::Index i = 0; i < d.n(); ++i) EXPECT_DOUBLE_EQ(d.x(i, 0), 1.0);
  EXPECT_NO_THROW(d.validate());
}

TEST(SampleGsem, Deterministic) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.n = 40;
  qmed::Rng r1 = qmed::Rng::stream(7, {3});
  qmed::Rng r2 = qmed::Rng::stream(7, {3});
  const qmed::Dataset a = qmed::sample_gsem(sc, r1);
  const qmed::Dataset b = qmed::sample_gsem(sc, r2);
  EXPECT_TRUE(a.s.isApprox(b.s, 0.0));
  EXPECT_TRUE(a.m.isApprox(b.m, 0.0));
  EXPECT_TRUE(a.y.isApprox(b.y, 0.0));
  EXPECT_TRUE(a.x.isApprox(b.x, 0.0));
}

// The probability integral transform must hold marginally: pushing each
// column through its own conditional cdf gives uniforms.
TEST(SampleGsem, PitUniformity) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.dag = qmed::DagParams(0.5, 0.5, 0.5);
  sc.n = 4000;
  qmed::Rng rng = qmed::Rng::stream(1, {5});
  const qmed::Dataset d = qmed::sample_gsem(sc, rng);
  const qmed::GsemModel truth = sc.true_model();
  std::vector<double> us(d.n()), um(d.n()), uy(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const Eigen::VectorXd xi = d.x.row(i);
    us[i] = truth.marginal_s.cdf(d.s[i], xi);
    um[i] = truth.marginal_m.cdf(d.m[i], xi);
    uy[i] = truth.marginal_y.cdf(d.y[i], xi);
  }
  const double band = 1.36 / std::sqrt(static_cast<double>(d.n()));
  EXPECT_LT(qmed::ks_uniform(us), band);
  EXPECT_LT(qmed::ks_uniform(um), band);
  EXPECT_LT(qmed::ks_uniform(uy), band);
}

// Normal scores of a large sample must reproduce the implied correlation.
TEST(SampleGsem, ScoresMatchImpliedCorrelation) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.dag = qmed::DagParams(0.6, -0.4, 0.3, 0.2);
  sc.n = 20000;
  qmed::Rng rng = qmed::Rng::stream(10, {5});
  const qmed::Dataset d = qmed::sample_gsem(sc, rng);
  const qmed::GsemModel truth = sc.true_model();
  const Eigen::MatrixXd z = qmed::normal_scores(d, truth.marginal_s,
                                                truth.marginal_m, truth.marginal_y);
  const Eigen::Matrix3d sample = (z.transpose() * z) / static_cast<double>(d.n());
  const Eigen::Matrix3d want = qmed::implied_correlation(sc.dag);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(sample(i, j), want(i, j), 0.03);
}

TEST(SampleGsem, ConfounderMomentsMatchDesign) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.n = 30000;
  qmed::Rng rng = qmed::Rng::stream(11, {5});
  const qmed::Dataset d = qmed::sample_gsem(sc, rng);
  for (int j = 1; j < 4; ++j) {
    std::vector<double> col(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) col[i] = d.x(i, j);
    EXPECT_NEAR(qmed::mean(col), 0.0, 0.01);
    EXPECT_NEAR(qmed::sample_sd(col), sc.x_sd, 0.01);
  }
  std::vector<double> c1(d.n()), c2(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    c1[i] = d.x(i, 1);
    c2[i] = d.x(i, 2);
  }
  EXPECT_NEAR(qmed::correlation(c1, c2), sc.x_corr, 0.03);
}

TEST(Oracle, NullHasZeroIndirectEffect) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.dag = qmed::DagParams(0.0, 0.5, 0.5);
  qmed::Rng rng = qmed::Rng::stream(12, {5});
  const auto r = qmed::counterfactual_oracle(sc.true_model(), sc.query, 100000, rng);
  EXPECT_NEAR(r.qnie, 0.0, 3.0 * r.se_qnie + 1e-12);
  EXPECT_GT(r.qnde, 0.0);
}

TEST(ReplicateLoop, InvariantToWorkerCount) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.n = 120;
  sc.R = 8;
  sc.ab.B = 120;
  sc.ab.seed = 33;
  sc.dag = qmed::DagParams(0.0, 0.0, 0.5);
  const std::vector<qmed::TestMethod> methods{qmed::TestMethod::QmaAb};
  sc.jobs = 1;
  const auto one = qmed::detail::replicate_loop(sc, methods, 4242, nullptr);
  sc.jobs = 4;
  const auto four = qmed::detail::replicate_loop(sc, methods, 4242, nullptr);
  const auto& p1 = one.at(qmed::TestMethod::QmaAb).pvalues;
  const auto& p4 = four.at(qmed::TestMethod::QmaAb).pvalues;
  ASSERT_EQ(p1.size(), p4.size());
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_DOUBLE_EQ(p1[i], p4[i]);
}

TEST(Studies, ValidateInputs) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.R = 10;  // too small for a null study
  EXPECT_THROW(qmed::run_null_study(sc, {qmed::TestMethod::QmaAb}),
               std::invalid_argument);
  sc.R = 100;
  EXPECT_THROW(
      qmed::run_mixture_null_study(sc, {0.5, 0.4, 0.2}, {qmed::TestMethod::QmaAb}),
      std::invalid_argument);
  EXPECT_THROW(qmed::run_power_study(sc, {qmed::TestMethod::QmaAb}, {0.1}, "bogus"),
               std::invalid_argument);
}

TEST(MseStudy, ErrorShrinksWithSampleSize) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.R = 60;
  sc.ab.seed = 15;
  sc.dag = qmed::DagParams(0.5, 0.5, 0.5);
  const auto rep = qmed::run_mse_study(sc, {150, 600}, {{0.5, 0.5}});
  ASSERT_EQ(rep.mse_rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.mse_rows[0].ratio_qnie, 1.0);
  EXPECT_GT(rep.mse_rows[1].ratio_qnie, 1.5);
  EXPECT_GT(rep.mse_rows[1].ratio_qnde, 1.5);
}

}  // namespace
