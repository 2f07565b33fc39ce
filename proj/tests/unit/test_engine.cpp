#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "kinex/burn_in.hpp"
#include "kinex/engine.hpp"
#include "kinex/error.hpp"
#include "kinex/fits.hpp"

using namespace kinex;

namespace {

SimConfig small(Model model) {
  SimConfig c;
  c.model = model;
  c.agents = 100;
  c.ensembles = 1;
  c.burn_in = 200;
  c.mc_steps = 200;
  c.sample_interval = 20;
  c.seed = 42;
  return c;
}

std::vector<double> as_real(const std::vector<std::uint64_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(SelectPair, TwoAgentsAlwaysTheSamePair) {
  RngStream rng(1);
  for (int k = 0; k < 1000; ++k) {
    const auto [i, j] = select_pair(2, rng);
    ASSERT_EQ(std::min(i, j), 0u);
    ASSERT_EQ(std::max(i, j), 1u);
  }
}

TEST(SelectPair, ThreeAgentsUniformOverPairs) {
  RngStream rng(2);
  std::map<std::pair<std::size_t, std::size_t>, int> freq;
  const int n = 1'000'000;
  for (int k = 0; k < n; ++k) {
    const auto [i, j] = select_pair(3, rng);
    ASSERT_NE(i, j);
    ++freq[{std::min(i, j), std::max(i, j)}];
  }
  ASSERT_EQ(freq.size(), 3u);
  const double sigma = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (const auto& [pair, count] : freq) EXPECT_NEAR(count, n / 3.0, 3.0 * sigma);
}

TEST(Engine, GibbsTemperature) {
  SimConfig c = small(Model::no_savings);
  c.agents = 1000;
  c.burn_in = 10'000;
  c.mc_steps = 100'000;
  c.sample_interval = 100;
  const auto r = run(c);
  const auto fit = fit_exponential(r.pooled.money.estimate());
  EXPECT_NEAR(fit.value("T"), 1.0, 0.05);
  EXPECT_EQ(r.sample_ticks, 1000u);
  EXPECT_EQ(r.trades.attempted, 1000u * 110'000u);
}

TEST(Engine, SameSeedIsBitIdentical) {
  for (Model m : {Model::no_savings, Model::angle, Model::commodity, Model::distributed_savings}) {
    SimConfig c = small(m);
    if (m == Model::angle) c.angle_w = 0.3;
    if (m == Model::commodity) c.theta = 0.05;
    if (m == Model::distributed_savings) {
      c.lambda = LambdaDistSpec::uniform(0, 1);
      c.lambda_bins = {0.0, 0.5, 1.0};
    }
    c.ensembles = 3;
    c.pair_differences = true;
    EXPECT_EQ(run(c), run(c)) << to_string(m);
    SimConfig other = c;
    other.seed = 43;
    EXPECT_FALSE(run(c) == run(other)) << to_string(m);
  }
}

TEST(Engine, ThreadCountDoesNotChangeResults) {
  SimConfig c = small(Model::distributed_savings);
  c.lambda = LambdaDistSpec::annealed(LambdaDistSpec::uniform(0, 1));
  c.ensembles = 7;
  c.jackknife_groups = 5;
  const auto one = run(c, {1});
  EXPECT_EQ(one, run(c, {3}));
  EXPECT_EQ(one, run(c, {8}));
}

TEST(Engine, MeasurementDrawsLeaveDynamicsAlone) {
  SimConfig c = small(Model::uniform_savings);
  c.lambda = LambdaDistSpec::fixed(0.5);
  const auto plain = run(c);
  c.pair_differences = true;
  const auto measured = run(c);
  EXPECT_EQ(plain.pooled.money, measured.pooled.money);
  EXPECT_EQ(plain.pooled.money_sums, measured.pooled.money_sums);
  ASSERT_TRUE(measured.pooled.difference.has_value());
  EXPECT_EQ(measured.pooled.difference->total(), 100u * 10u);
}

TEST(Engine, ConservationIsAuditedEverySample) {
  for (Model m : {Model::no_savings, Model::minimum_exchange, Model::commodity}) {
    SimConfig c = small(m);
    c.initial = InitialCondition::random;
    c.ensembles = 2;
    const auto r = run(c);
    EXPECT_EQ(r.audit.checks, 2u * 10u);
    EXPECT_LE(r.audit.max_money_deviation, kConservationTolerance);
    EXPECT_LE(r.audit.max_commodity_deviation, kConservationTolerance);
  }
}

TEST(Engine, InitialConditionIsForgotten) {
  SimConfig c = small(Model::no_savings);
  c.agents = 500;
  c.burn_in = 2000;
  c.mc_steps = 20'000;
  const auto uniform = run(c);
  c.initial = InitialCondition::random;
  c.seed = 7;
  const auto random = run(c);
  EXPECT_LT(l1_distance(as_real(uniform.pooled.money.counts()), as_real(random.pooled.money.counts())), 0.05);
}

TEST(Engine, HistogramMassEqualsSamples) {
  SimConfig c = small(Model::commodity);
  c.ensembles = 4;
  c.jackknife_groups = 4;
  const auto r = run(c);
  const std::uint64_t expected = 4u * 10u * 100u;
  EXPECT_EQ(r.pooled.money.total(), expected);
  EXPECT_EQ(r.pooled.commodity->total(), expected);
  EXPECT_EQ(r.pooled.wealth->total(), expected);
  EXPECT_EQ(r.pooled.money_sums.count, static_cast<double>(expected));
  ASSERT_EQ(r.groups.size(), 4u);
  Accumulators merged(c);
  for (const auto& g : r.groups) merged.merge(g);
  EXPECT_EQ(merged, r.pooled);
}

TEST(Engine, JackknifeGroupsFromTimeBlocks) {
  SimConfig c = small(Model::no_savings);
  c.ensembles = 2;
  c.jackknife_groups = 10;
  const auto r = run(c);
  ASSERT_EQ(r.groups.size(), 10u);
  for (const auto& g : r.groups) EXPECT_EQ(g.money.total(), 200u);
}

TEST(Engine, CommodityWithoutPriceNoiseKeepsWealth) {
  SimConfig c = small(Model::commodity);
  const auto r = run(c);
  // Wealth m + c is invariant at unit price. 2 sits on a bin edge, so rounding
  // can put a sample on either side of it, but nowhere else.
  const auto& w = *r.pooled.wealth;
  const std::size_t below = w.binning().index(2.0 - 1e-12), above = w.binning().index(2.0 + 1e-12);
  EXPECT_EQ(w.counts()[below] + w.counts()[above], w.total());
}

TEST(Engine, CommodityWealthUsesGlobalPrice) {
  SimConfig c = small(Model::commodity);
  c.money_per_agent = 3.0;
  c.commodity_per_agent = 0.5;  // p0 = 6, w = m + 6 c = 6 for everybody
  const auto r = run(c);
  const auto& w = *r.pooled.wealth;
  std::uint64_t near_six = 0;
  const auto& edges = w.binning().edges();
  for (std::size_t i = 0; i < w.binning().bins(); ++i) {
    if (edges[i] <= 6.0 * (1 + 1e-12) && edges[i + 1] >= 6.0 * (1 - 1e-12)) near_six += w.counts()[i];
  }
  EXPECT_EQ(near_six, w.total());
  EXPECT_LE(r.audit.max_commodity_deviation, kConservationTolerance);
}

TEST(Engine, MinimumExchangeCondenses) {
  SimConfig c = small(Model::minimum_exchange);
  c.burn_in = 0;
  c.mc_steps = 200'000;
  c.sample_interval = 1000;
  c.condensation_threshold = 0.99;
  const auto r = run(c);
  ASSERT_TRUE(r.condensation.has_value());
  EXPECT_GT(r.condensation->final_max_share[0], 0.99);
  EXPECT_GT(r.condensation->first_passage[0], 0);
}

TEST(Engine, RichestAgentSeries) {
  SimConfig c = small(Model::distributed_savings);
  c.lambda = LambdaDistSpec::uniform(0, 1);
  c.track_richest = true;
  c.richest_stride = 10;
  c.ensembles = 2;
  const auto r = run(c);
  ASSERT_TRUE(r.richest.has_value());
  // Series covers burn-in and sampling, with the starting point.
  EXPECT_EQ(r.richest->mean_money.size(), 1u + 400u / 10u);
  EXPECT_DOUBLE_EQ(r.richest->mean_money[0], 1.0);
  EXPECT_EQ(r.richest->ensemble_means.size(), 2u);
  EXPECT_GT(r.richest->mean_lambda_max, 0.9);
}

TEST(Engine, AnnealedLowerBoundsStayQuenched) {
  SimConfig c = small(Model::distributed_savings);
  c.lambda = LambdaDistSpec::annealed(LambdaDistSpec::fixed(0.0));
  Market m(c, 0);
  for (int s = 0; s < 10; ++s) m.step();
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(m.quenched_lambda(i), 0.0);
  EXPECT_NEAR(m.money_sum(), 100.0, 1e-10);
}
