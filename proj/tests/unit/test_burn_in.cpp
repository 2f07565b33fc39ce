#include <gtest/gtest.h>

#include "kinex/burn_in.hpp"
#include "kinex/engine.hpp"
#include "kinex/error.hpp"

using namespace kinex;

TEST(L1Distance, NormalizesBeforeComparing) {
  EXPECT_DOUBLE_EQ(l1_distance(std::vector<double>{1, 1}, std::vector<double>{5, 5}), 0.0);
  EXPECT_DOUBLE_EQ(l1_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 2.0);
  EXPECT_DOUBLE_EQ(l1_distance(std::vector<double>{3, 1}, std::vector<double>{1, 1}), 0.5);
}

TEST(BurnInDetector, StationaryStreamReturnsFirstWindow) {
  BurnInDetector d(0.05, 3, 100);
  const std::vector<double> h = {5, 3, 2};
  EXPECT_FALSE(d.push(h));
  EXPECT_FALSE(d.push(h));
  EXPECT_FALSE(d.push(h));
  const auto at = d.push(h);
  ASSERT_TRUE(at.has_value());
  EXPECT_EQ(*at, 0);
}

TEST(BurnInDetector, QuietRunMustBeUnbroken) {
  BurnInDetector d(0.05, 2, 10);
  std::vector<std::vector<double>> stream = {{10, 0}, {5, 5}, {0, 10}, {1, 9}, {1, 9}, {1, 9}};
  std::optional<std::int64_t> at;
  for (const auto& h : stream) {
    at = d.push(h);
    if (at) break;
  }
  ASSERT_TRUE(at.has_value());
  // Windows 3, 4 and 5 agree; the run began at window 3.
  EXPECT_EQ(*at, 30);
  EXPECT_EQ(d.windows_seen(), 6);
  EXPECT_EQ(d.distances().size(), 5u);
}

TEST(AutoBurnIn, GibbsMarketSettlesFarBelowReference) {
  SimConfig c;
  c.model = Model::no_savings;
  c.agents = 100;
  c.ensembles = 1;
  c.mc_steps = 1'000'000;
  c.sample_interval = 1000;
  c.auto_burn_in = AutoBurnIn{};
  const auto r = run(c);
  ASSERT_TRUE(r.burn_in.automatic);
  ASSERT_EQ(r.burn_in.detected.size(), 1u);
  EXPECT_LT(r.burn_in.detected[0], 100'000);
  EXPECT_GE(r.burn_in.performed[0], r.burn_in.detected[0]);

  // What follows the detected burn-in matches a run with a 1e6-step burn-in.
  SimConfig ref = c;
  ref.auto_burn_in.reset();
  ref.burn_in = 1'000'000;
  ref.seed = 1;
  const auto rr = run(ref);
  // Coarsen to 4 bins per decade so sampling noise stays well below the gate.
  auto coarse = [](const Histogram& h) {
    std::vector<double> out((h.counts().size() + 7) / 8, 0.0);
    for (std::size_t i = 0; i < h.counts().size(); ++i) out[i / 8] += static_cast<double>(h.counts()[i]);
    return out;
  };
  EXPECT_LT(l1_distance(coarse(r.pooled.money), coarse(rr.pooled.money)), 0.02);
}

TEST(AutoBurnIn, NeverSettlingIsAnError) {
  // Threshold so tight that windowed histograms never agree.
  SimConfig c;
  c.model = Model::no_savings;
  c.agents = 50;
  c.ensembles = 1;
  c.mc_steps = 2000;
  c.sample_interval = 10;
  c.auto_burn_in = AutoBurnIn{1e-9, 3, 10};
  EXPECT_THROW(run(c), SimulationError);
}
