#include <gtest/gtest.h>

#include "qmed/diagnostics.hpp"
#include "qmed/sim.hpp"

namespace {

TEST(CauchyCombination, PinnedExamples) {
  EXPECT_DOUBLE_EQ(qmed::cauchy_combination({0.5, 0.5, 0.5}), 0.5);
  EXPECT_NEAR(qmed::cauchy_combination({0.37}), 0.37, 1e-12);
  EXPECT_NEAR(qmed::cauchy_combination({0.01, 0.5}), 0.0199, 5e-4);
}

TEST(CauchyCombination, PermutationInvariantAndMonotone) {
  const std::vector<double> p{0.03, 0.4, 0.77, 0.12};
  std::vector<double> q{0.77, 0.12, 0.03, 0.4};
  EXPECT_DOUBLE_EQ(qmed::cauchy_combination(p), qmed::cauchy_combination(q));
  std::vector<double> lower(p);
  lower[1] = 0.1;  // decreasing one input cannot increase the output
  EXPECT_LE(qmed::cauchy_combination(lower), qmed::cauchy_combination(p));
}

TEST(CauchyCombination, ClampsBoundaryInputs) {
  const double at_zero = qmed::cauchy_combination({0.0, 0.5});
  EXPECT_GT(at_zero, 0.0);
  EXPECT_LT(at_zero, 1e-10);
  EXPECT_THROW(qmed::cauchy_combination({}), std::invalid_argument);
}

TEST(BhFdr, PinnedExamples) {
  const auto sel = qmed::bh_fdr({0.01, 0.02, 0.9}, 0.1);
  EXPECT_EQ(sel, (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(qmed::bh_fdr({1.0, 1.0, 1.0}, 0.1).empty());
  EXPECT_EQ(qmed::bh_fdr({0.05}, 0.1), (std::vector<std::size_t>{0}));
}

TEST(BhFdr, MonotoneInLevel) {
  const std::vector<double> p{0.001, 0.02, 0.04, 0.2, 0.6};
  std::vector<std::size_t> prev;
  for (double q : {0.01, 0.05, 0.1, 0.3}) {
    auto sel = qmed::bh_fdr(p, q);
    std::sort(sel.begin(), sel.end());
    for (auto i : prev) EXPECT_NE(std::find(sel.begin(), sel.end(), i), sel.end());
    prev = sel;
  }
}

class SensitivityFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    sc_ = qmed::SimScenario::benchmark_defaults();
    sc_.dag = qmed::DagParams(0.5, 0.5, 0.5);
    sc_.n = 400;
    qmed::Rng rng = qmed::Rng::stream(3, {8});
    data_ = qmed::sample_gsem(sc_, rng);
  }
  qmed::SimScenario sc_;
  qmed::Dataset data_;
};

TEST_F(SensitivityFixture, ZeroRhoReproducesPrimaryEstimate) {
  const std::vector<double> grid{-0.2, -0.1, 0.0, 0.1, 0.2};
  const auto curve = qmed::sensitivity_curve(data_, sc_.families, sc_.query, grid);
  const qmed::FitResult fr = qmed::fit(data_, sc_.families);
  const double primary = qmed::qnie(fr.model, sc_.query);
  ASSERT_EQ(curve.rho_grid.size(), grid.size());
  EXPECT_DOUBLE_EQ(curve.qnie_at_rho[2], primary);
  EXPECT_GE(curve.observed_abs_corr, 0.0);
}

TEST_F(SensitivityFixture, CurveIsContinuousOnTheGrid) {
  std::vector<double> grid;
  for (double r = -0.3; r <= 0.301; r += 0.05) grid.push_back(r);
  // keep an exact zero on the grid
  grid[6] = 0.0;
  const auto curve = qmed::sensitivity_curve(data_, sc_.families, sc_.query, grid);
  for (std::size_t i = 1; i < curve.qnie_at_rho.size(); ++i) {
    ASSERT_TRUE(std::isfinite(curve.qnie_at_rho[i]));
    EXPECT_LT(std::abs(curve.qnie_at_rho[i] - curve.qnie_at_rho[i - 1]), 0.15);
  }
}

TEST_F(SensitivityFixture, RequiresZeroOnGrid) {
  EXPECT_THROW(qmed::sensitivity_curve(data_, sc_.families, sc_.query, {0.1, 0.2}),
               std::invalid_argument);
}

TEST(DefaultRhoGrid, CoversSymmetricRangeWithZero) {
  const auto g = qmed::default_rho_grid();
  EXPECT_NEAR(g.front(), -0.9, 1e-12);
  EXPECT_NEAR(g.back(), 0.9, 1e-12);
  bool has_zero = false;
  for (double v : g) has_zero |= std::abs(v) < 1e-12;
  EXPECT_TRUE(has_zero);
}

TEST(Gof, WellSpecifiedDataGivesModeratePvalue) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.dag = qmed::DagParams(0.5, 0.5, 0.5);
  sc.n = 200;
  qmed::Rng rng = qmed::Rng::stream(6, {8});
  const qmed::Dataset data = qmed::sample_gsem(sc, rng);
  const double p = qmed::gof_test(data, sc.families, 4, 60, 19, 1);
  EXPECT_GT(p, 0.01);
  EXPECT_LE(p, 1.0);
}

TEST(Gof, Deterministic) {
  qmed::SimScenario sc = qmed::SimScenario::benchmark_defaults();
  sc.dag = qmed::DagParams(0.3, 0.3, 0.3);
  sc.n = 150;
  qmed::Rng rng = qmed::Rng::stream(7, {8});
  const qmed::Dataset data = qmed::sample_gsem(sc, rng);
  const double p1 = qmed::gof_test(data, sc.families, 4, 40, 5, 1);
  const double p2 = qmed::gof_test(data, sc.families, 4, 40, 5, 1);
  EXPECT_DOUBLE_EQ(p1, p2);
}

}  // namespace
