#include <gtest/gtest.h>

#include <cmath>

#include "kinex/error.hpp"
#include "kinex/histogram.hpp"
#include "test_util.hpp"

using namespace kinex;

TEST(Binning, LinearEdgesAndIndex) {
  const auto b = Binning::linear(0.0, 1.0, 4);
  ASSERT_EQ(b.bins(), 4u);
  EXPECT_EQ(b.index(0.0), 0u);
  EXPECT_EQ(b.index(0.25), 1u);
  EXPECT_EQ(b.index(0.999), 3u);
  EXPECT_EQ(b.index(7.0), 3u);
  EXPECT_EQ(b.index(-1.0), 0u);
  EXPECT_THROW(Binning::linear(1.0, 1.0, 3), ContractViolation);
}

TEST(Binning, LogarithmicHasUnderflowForZeros) {
  const auto b = Binning::logarithmic(1e-3, 10.0, 4);
  EXPECT_TRUE(b.has_underflow());
  EXPECT_EQ(b.edges().front(), 0.0);
  EXPECT_EQ(b.bins(), 1u + 16u);
  EXPECT_EQ(b.index(0.0), 0u);
  EXPECT_EQ(b.index(5e-4), 0u);
  EXPECT_EQ(b.index(1e-3), 1u);
  EXPECT_NEAR(b.edges().back(), 10.0, 1e-12);
}

TEST(Binning, IndexAgreesWithEdgesEverywhere) {
  const auto b = Binning::logarithmic(1e-4, 1e3, 32);
  RngStream rng(5);
  for (int k = 0; k < 200'000; ++k) {
    const double x = std::pow(10.0, -5.0 + 8.5 * rng.uniform01());
    const std::size_t i = b.index(x);
    if (x >= b.edges().back()) {
      ASSERT_EQ(i, b.bins() - 1);
      continue;
    }
    ASSERT_LE(b.edges()[i], x);
    ASSERT_LT(x, b.edges()[i + 1]);
  }
  // Exact edges land in the bin they open.
  for (std::size_t i = 0; i + 1 < b.edges().size(); ++i) EXPECT_EQ(b.index(b.edges()[i]), i);
}

TEST(Binning, FromEdgesRoundTrip) {
  const auto b = Binning::logarithmic(0.01, 100.0, 8);
  const auto c = Binning::from_edges(b.edges(), BinScale::logarithmic);
  EXPECT_EQ(c.edges(), b.edges());
  EXPECT_TRUE(c.has_underflow());
  for (double x : {0.0, 0.005, 0.01, 0.3, 42.0, 1e4}) EXPECT_EQ(c.index(x), b.index(x));
  EXPECT_THROW(Binning::from_edges({1.0, 1.0}, BinScale::linear), ContractViolation);
}

TEST(DistributionEstimate, DensityIntegratesToOne) {
  const auto samples = kinex::test::exponential_samples(1.0, 100'000, 3);
  for (const auto& b : {Binning::linear(0.0, 30.0, 300), Binning::logarithmic(1e-6, 1e3, 32)}) {
    const auto est = DistributionEstimate::from_samples(samples, b);
    double mass = 0.0;
    for (std::size_t i = 0; i < est.bins(); ++i) mass += est.density(i) * est.width(i);
    EXPECT_NEAR(mass, 1.0, 1e-6);
    EXPECT_EQ(est.total(), 100'000.0);
  }
}

TEST(DistributionEstimate, LogAndLinearDensitiesAgree) {
  // Heavy tailed sample; compare wherever both estimators hold >= 100 counts.
  const auto samples = kinex::test::pareto_samples(1.5, 1.0, 1'000'000, 4);
  const auto lin = DistributionEstimate::from_samples(samples, Binning::linear(0.0, 20.0, 400));
  const auto log = DistributionEstimate::from_samples(samples, Binning::logarithmic(0.5, 1e4, 32));
  int compared = 0;
  for (std::size_t i = 0; i < log.bins(); ++i) {
    if (log.counts[i] < 100.0) continue;
    const double lo = log.left(i), hi = log.right(i);
    if (lo < 1.0 || hi > 20.0) continue;
    // Aggregate the linear bins fully inside [lo, hi).
    double count = 0.0, width = 0.0;
    for (std::size_t k = 0; k < lin.bins(); ++k) {
      if (lin.left(k) >= lo && lin.right(k) <= hi) {
        count += lin.counts[k];
        width += lin.width(k);
      }
    }
    if (count < 100.0 || width <= 0.0) continue;
    const double d_lin = count / (lin.total() * width);
    const double d_log = log.density(i);
    const double sigma = d_log * std::sqrt(1.0 / count + 1.0 / log.counts[i]);
    // The two cover slightly different intervals; allow for the local slope.
    const double slope_bias = d_log * 2.5 * std::abs(hi - lo - width) / lo;
    EXPECT_NEAR(d_lin, d_log, 4.0 * sigma + slope_bias) << "bin at " << lo;
    ++compared;
  }
  EXPECT_GT(compared, 5);
}

TEST(DistributionEstimate, UpperQuantileEdge) {
  DistributionEstimate e{Binning::linear(0.0, 10.0, 10), std::vector<double>(10, 1.0)};
  EXPECT_EQ(e.upper_quantile_edge(0.1), 9.0);
  EXPECT_EQ(e.upper_quantile_edge(0.2), 8.0);
  EXPECT_EQ(e.upper_quantile_edge(0.25), 7.0);
  EXPECT_EQ(e.max_support(), 10.0);
}

TEST(Histogram, MergeIsExactAddition) {
  const auto b = Binning::linear(0.0, 1.0, 5);
  Histogram h1(b), h2(b), all(b);
  RngStream rng(6);
  for (int k = 0; k < 1000; ++k) {
    const double x = rng.uniform01();
    (k % 2 ? h1 : h2).add(x);
    all.add(x);
  }
  h1.merge(h2);
  EXPECT_EQ(h1, all);
  EXPECT_EQ(h1.total(), 1000u);
  Histogram other(Binning::linear(0.0, 2.0, 5));
  EXPECT_THROW(h1.merge(other), ContractViolation);
}
