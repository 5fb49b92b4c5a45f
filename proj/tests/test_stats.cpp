#include <gtest/gtest.h>

#include "qmed/rng.hpp"
#include "qmed/stats.hpp"

namespace {

TEST(NormQuantile, KnownValues) {
  EXPECT_NEAR(qmed::norm_quantile(0.5), 0.0, 1e-14);
  EXPECT_NEAR(qmed::norm_quantile(0.975), 1.9599639845400545, 1e-10);
  EXPECT_NEAR(qmed::norm_quantile(0.025), -1.9599639845400545, 1e-10);
  EXPECT_NEAR(qmed::norm_quantile(1e-10), -6.361340902404056, 1e-7);
}

TEST(NormQuantile, RoundTripWithCdf) {
  for (double p : {1e-8, 1e-4, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0 - 1e-6}) {
    EXPECT_NEAR(qmed::norm_cdf(qmed::norm_quantile(p)), p, 1e-12 + 1e-9 * p);
  }
  for (double z : {-8.0, -3.0, -0.5, 0.0, 1.0, 4.5}) {
    EXPECT_NEAR(qmed::norm_quantile(qmed::norm_cdf(z)), z, 1e-8);
  }
}

TEST(NormPdf, MatchesCdfDerivative) {
  const double h = 1e-6;
  for (double z : {-2.0, -0.3, 0.0, 1.4}) {
    const double d = (qmed::norm_cdf(z + h) - qmed::norm_cdf(z - h)) / (2 * h);
    EXPECT_NEAR(qmed::norm_pdf(z), d, 1e-8);
  }
}

TEST(EmpiricalQuantile, MatchesLinearInterpolation) {
  std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(qmed::empirical_quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(qmed::empirical_quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(qmed::empirical_quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(qmed::empirical_quantile(v, 1.0 / 3.0), 2.0);
}

TEST(Moments, MeanSdCorrelation) {
  std::vector<double> a{1.0, 2.0, 3.0, 4.0};
  std::vector<double> b{2.0, 4.0, 6.0, 8.0};
  EXPECT_DOUBLE_EQ(qmed::mean(a), 2.5);
  EXPECT_NEAR(qmed::sample_sd(a), std::sqrt(5.0 / 3.0), 1e-14);
  EXPECT_NEAR(qmed::correlation(a, b), 1.0, 1e-14);
  std::vector<double> c{-1.0, -2.0, -3.0, -4.0};
  EXPECT_NEAR(qmed::correlation(a, c), -1.0, 1e-14);
}

TEST(KsDistance, UniformSampleIsSmall) {
  qmed::Rng rng = qmed::Rng::stream(11, {1});
  std::vector<double> u(4000);
  for (auto& v : u) v = rng.uniform();
  EXPECT_LT(qmed::ks_uniform(u), 1.36 / std::sqrt(4000.0));
}

TEST(KsDistance, ShiftedSampleIsLarge) {
  std::vector<double> u(500);
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = 0.5 + 0.5 * (static_cast<double>(i) + 0.5) / 500.0;
  EXPECT_GT(qmed::ks_uniform(u), 0.4);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  qmed::Rng a = qmed::Rng::stream(42, {7, 1});
  qmed::Rng b = qmed::Rng::stream(42, {7, 1});
  qmed::Rng c = qmed::Rng::stream(42, {7, 2});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  bool differs = false;
  qmed::Rng a2 = qmed::Rng::stream(42, {7, 1});
  for (int i = 0; i < 100; ++i) differs |= (a2.next_u64() != c.next_u64());
  EXPECT_TRUE(differs);
}

TEST(Rng, NormalMomentsSane) {
  qmed::Rng rng = qmed::Rng::stream(3, {9});
  std::vector<double> z(20000);
  for (auto& v : z) v = rng.normal();
  EXPECT_NEAR(qmed::mean(z), 0.0, 0.03);
  EXPECT_NEAR(qmed::sample_sd(z), 1.0, 0.03);
}

}  // namespace
