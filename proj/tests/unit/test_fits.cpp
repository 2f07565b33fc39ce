#include <gtest/gtest.h>

#include <cmath>

#include "kinex/error.hpp"
#include "kinex/fits.hpp"
#include "test_util.hpp"

using namespace kinex;
using namespace kinex::test;

TEST(ParetoFit, NuOneFromSamples) {
  const auto s = pareto_samples(1.0, 1.0, 1'000'000, 11);
  const auto fit = fit_pareto_tail(s);
  EXPECT_EQ(fit.method, "pareto_tail");
  EXPECT_NEAR(fit.value("nu"), 1.0, 0.05);
  EXPECT_NEAR(fit.value("nu_ls"), 1.0, 0.05);
  EXPECT_TRUE(fit.healthy) << fit.note;
  EXPECT_GT(fit.window.lo, 0.0);
  EXPECT_NEAR(fit.window.hi / fit.window.lo, 10.0, 1e-9);
  EXPECT_GE(fit.at("nu").stderr_, 0.0);
  EXPECT_EQ(fit.sensitivity.size(), 3u);
}

TEST(ParetoFit, NuTwoFromSamples) {
  const auto fit = fit_pareto_tail(pareto_samples(2.0, 1.0, 1'000'000, 12));
  EXPECT_NEAR(fit.value("nu"), 2.0, 0.1);
  EXPECT_NEAR(fit.value("nu_ls"), 2.0, 0.1);
  EXPECT_TRUE(fit.healthy) << fit.note;
}

TEST(ParetoFit, NuOneFromHistogram) {
  const auto s = pareto_samples(1.0, 1.0, 1'000'000, 13);
  const auto est = DistributionEstimate::from_samples(s, Binning::logarithmic(1e-2, 1e7, 32));
  const auto fit = fit_pareto_tail(est);
  EXPECT_NEAR(fit.value("nu"), 1.0, 0.05);
  EXPECT_TRUE(fit.healthy) << fit.note;

  // Twenty independent groups give a jackknife error of the same scale.
  std::vector<DistributionEstimate> groups;
  for (int g = 0; g < 20; ++g) {
    groups.push_back(DistributionEstimate::from_samples(
        pareto_samples(1.0, 1.0, 50'000, 100 + static_cast<std::uint64_t>(g)), est.binning));
  }
  DistributionEstimate pooled{est.binning, std::vector<double>(est.bins(), 0.0)};
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.bins(); ++i) pooled.counts[i] += g.counts[i];
  }
  const auto gfit = fit_pareto_tail(pooled, groups);
  EXPECT_NEAR(gfit.value("nu"), 1.0, 0.05);
  EXPECT_TRUE(gfit.healthy) << gfit.note;
  EXPECT_GT(gfit.at("nu").stderr_, 0.2 * fit.at("nu").stderr_);
  EXPECT_LT(gfit.at("nu").stderr_, 5.0 * fit.at("nu").stderr_);
}

TEST(ParetoFit, ExponentialDataIsUnhealthy) {
  const auto s = exponential_samples(1.0, 1'000'000, 14);
  EXPECT_FALSE(fit_pareto_tail(s).healthy);
  const auto est = DistributionEstimate::from_samples(s, Binning::logarithmic(1e-6, 1e3, 32));
  EXPECT_FALSE(fit_pareto_tail(est).healthy);
}

TEST(ParetoFit, ScaleEquivariant) {
  auto s = pareto_samples(1.5, 1.0, 200'000, 15);
  const auto a = fit_pareto_tail(s);
  for (auto& x : s) x *= 8.0;  // a power of two keeps the rescaling exact
  const auto b = fit_pareto_tail(s);
  EXPECT_NEAR(a.value("nu"), b.value("nu"), 1e-12);
  EXPECT_NEAR(a.value("nu_ls"), b.value("nu_ls"), 1e-12);
  for (auto& x : s) x *= 0.3;
  const auto c = fit_pareto_tail(s);
  EXPECT_NEAR(a.value("nu"), c.value("nu"), 1e-9);
  EXPECT_NEAR(a.value("nu_ls"), c.value("nu_ls"), 1e-9);
}

TEST(ParetoFit, InsufficientTailIsAnError) {
  EXPECT_THROW(fit_pareto_tail(std::vector<double>{1.0, 2.0, 3.0}), AnalysisError);
  EXPECT_THROW(fit_pareto_tail(std::vector<double>{}), AnalysisError);
  EXPECT_THROW(fit_pareto_tail(pareto_samples(1.0, 1.0, 1000, 1), TailWindowPolicy{1.5, 1.0}), ContractViolation);
}

TEST(ExponentialFit, RecoversTemperature) {
  const auto s = exponential_samples(2.5, 200'000, 16);
  const auto fit = fit_exponential(s);
  EXPECT_NEAR(fit.value("T"), 2.5, 4.0 * fit.at("T").stderr_);
  EXPECT_TRUE(fit.healthy);
  EXPECT_LT(fit.goodness.at("ks"), ks_critical_1pct(200'000));

  const auto est = DistributionEstimate::from_samples(s, Binning::linear(0.0, 50.0, 500));
  const auto bfit = fit_exponential(est);
  EXPECT_NEAR(bfit.value("T"), 2.5, 0.03);
  EXPECT_TRUE(bfit.healthy);
}

TEST(ExponentialFit, GammaDataFailsKs) {
  const auto s = gamma_samples(4.0, 0.25, 200'000, 17);
  EXPECT_FALSE(fit_exponential(s).healthy);
}

TEST(ExponentialTailFit, ExponentialAndParetoTails) {
  const auto bins = Binning::linear(0.0, 60.0, 600);
  std::vector<DistributionEstimate> groups;
  DistributionEstimate pooled{bins, std::vector<double>(bins.bins(), 0.0)};
  for (int g = 0; g < 20; ++g) {
    groups.push_back(DistributionEstimate::from_samples(exponential_samples(1.5, 50'000, 200 + g), bins));
    for (std::size_t i = 0; i < bins.bins(); ++i) pooled.counts[i] += groups.back().counts[i];
  }
  const auto fit = fit_exponential_tail(pooled, groups);
  EXPECT_NEAR(fit.value("T"), 1.5, 0.05);
  EXPECT_TRUE(fit.healthy) << fit.note;
  // Survival 10% at T ln 10, then two more decades down to T ln 1000; 0.1-wide bins.
  EXPECT_NEAR(fit.window.lo, 1.5 * std::log(10.0), 0.15);
  EXPECT_NEAR(fit.window.hi, 1.5 * std::log(1000.0), 0.15);

  // Log bins, as the engine writes them.
  const auto log_exp = DistributionEstimate::from_samples(exponential_samples(1.0, 2'000'000, 230),
                                                          Binning::logarithmic(1e-6, 1e3, 32));
  const auto on_log = fit_exponential_tail(log_exp, {});
  EXPECT_NEAR(on_log.value("T"), 1.0, 0.02);
  EXPECT_NEAR(on_log.value("T_ls"), 1.0, 0.02);
  EXPECT_TRUE(on_log.healthy) << on_log.note;

  const auto log_bins = Binning::logarithmic(1e-2, 1e6, 32);
  const auto heavy = DistributionEstimate::from_samples(pareto_samples(1.0, 1.0, 1'000'000, 18), log_bins);
  EXPECT_FALSE(fit_exponential_tail(heavy, {}).healthy);
}

TEST(GammaFit, SyntheticAlphaThree) {
  // alpha = 3 at lambda = 1/2: shape alpha + 1 = 4, scale T = 1/4.
  const auto s = gamma_samples(4.0, 0.25, 1'000'000, 19);
  const auto fit = fit_gamma(s);
  EXPECT_EQ(fit.method, "gamma");
  EXPECT_NEAR(fit.value("alpha"), 3.0, 0.15);
  EXPECT_NEAR(fit.value("T"), 0.25, 0.0125);
  EXPECT_NEAR(fit.value("implied_lambda"), 0.5, 0.02);

  PowerSums sums;
  for (double x : s) sums.add(x);
  const auto sfit = fit_gamma(sums);
  EXPECT_NEAR(sfit.value("alpha"), fit.value("alpha"), 1e-9);

  const auto est = DistributionEstimate::from_samples(s, Binning::logarithmic(1e-4, 20.0, 32));
  const auto bfit = fit_gamma(est);
  EXPECT_NEAR(bfit.value("alpha"), 3.0, 0.15);
  EXPECT_NEAR(bfit.value("implied_lambda"), 0.5, 0.02);
}

TEST(GammaFit, ExponentialGivesAlphaZero) {
  const auto fit = fit_gamma(exponential_samples(1.0, 1'000'000, 20));
  EXPECT_NEAR(fit.value("alpha"), 0.0, 0.01);
  EXPECT_NEAR(fit.value("implied_lambda"), 0.0, 0.005);
  EXPECT_EQ(implied_lambda(0.0), 0.0);
  EXPECT_DOUBLE_EQ(implied_lambda(3.0), 0.5);
  EXPECT_DOUBLE_EQ(implied_lambda(27.0), 0.9);
}

TEST(GammaFit, DegenerateDataIsAnError) {
  EXPECT_THROW(fit_gamma(std::vector<double>(100, 1.0)), AnalysisError);
  EXPECT_THROW(fit_gamma(std::vector<double>{1.0}), AnalysisError);
}

TEST(FitJson, CarriesTheAdvertisedFields) {
  const auto fit = fit_pareto_tail(pareto_samples(1.0, 1.0, 100'000, 21));
  const nlohmann::json j = fit;
  for (const char* key : {"method", "estimate", "stderr", "window", "goodness", "healthy"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["method"], "pareto_tail");
  EXPECT_DOUBLE_EQ(j["estimate"]["nu"].get<double>(), fit.value("nu"));
}

TEST(KsCritical, OnePercentLevel) {
  // Asymptotic Kolmogorov quantile K(0.99) = 1.6276.
  EXPECT_NEAR(ks_critical_1pct(1.0), 1.6276, 1e-4);
  EXPECT_NEAR(ks_critical_1pct(1e4), 0.016276, 1e-6);
}
