#include <gtest/gtest.h>

#include "kinex/error.hpp"
#include "kinex/sim_config.hpp"

using namespace kinex;
using nlohmann::json;

namespace {

json base() { return json::parse(R"({"model": "no_savings", "agents": 100, "mc_steps": 1000})"); }

}  // namespace

TEST(SimConfigJson, MinimalDocumentGetsDefaults) {
  const auto c = config_from_json(base());
  EXPECT_EQ(c.model, Model::no_savings);
  EXPECT_EQ(c.agents, 100);
  EXPECT_EQ(c.burn_in, 10'000);
  EXPECT_EQ(c.sample_interval, 10);
  EXPECT_EQ(c.ensembles, 1000);
  EXPECT_TRUE(c.epsilon.random);
  EXPECT_EQ(c.histogram.bins_per_decade, 32);
  EXPECT_FALSE(c.auto_burn_in.has_value());
}

TEST(SimConfigJson, SlowModelsDefaultToLongBurnIn) {
  auto doc = base();
  doc["model"] = "distributed_savings";
  doc["lambda"] = {{"kind", "uniform_interval"}, {"lower", 0}, {"upper", 1}};
  EXPECT_EQ(config_from_json(doc).burn_in, 1'000'000);
  doc = base();
  doc["model"] = "commodity";
  EXPECT_EQ(config_from_json(doc).burn_in, 1'000'000);
}

TEST(SimConfigJson, CanonicalFormRoundTrips) {
  auto doc = base();
  doc["model"] = "distributed_savings";
  doc["lambda"] = {{"kind", "power_about_one"}, {"delta", 0.5}};
  doc["burn_in"] = {{"mode", "auto"}, {"threshold", 0.02}};
  doc["lambda_bins"] = {0.0, 0.5, 1.0};
  doc["epsilon"] = {{"mode", "fixed"}, {"value", 0.5}};
  doc["seed"] = 18446744073709551615ull;
  doc["histogram"] = {{"bins_per_decade", 16}};
  const auto c = config_from_json(doc);
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  ASSERT_TRUE(c.auto_burn_in.has_value());
  EXPECT_EQ(c.auto_burn_in->threshold, 0.02);
  EXPECT_EQ(c.auto_burn_in->consecutive, 3);
  const auto canonical = config_to_json(c);
  EXPECT_EQ(config_from_json(canonical), c);
  EXPECT_EQ(config_to_json(config_from_json(canonical)), canonical);
}

TEST(SimConfigJson, UnknownKeysRejected) {
  auto doc = base();
  doc["agnets"] = 5;
  EXPECT_THROW(config_from_json(doc), ConfigError);
  doc = base();
  doc["histogram"] = {{"bins", 3}};
  EXPECT_THROW(config_from_json(doc), ConfigError);
  doc = base();
  doc["burn_in"] = {{"mode", "auto"}, {"treshold", 0.1}};
  EXPECT_THROW(config_from_json(doc), ConfigError);
}

TEST(SimConfigJson, MissingOrMistypedFields) {
  auto doc = base();
  doc.erase("agents");
  EXPECT_THROW(config_from_json(doc), ConfigError);
  doc = base();
  doc["agents"] = "many";
  EXPECT_THROW(config_from_json(doc), ConfigError);
  doc = base();
  doc["agents"] = 10.5;
  EXPECT_THROW(config_from_json(doc), ConfigError);
  doc = base();
  doc["model"] = "barter";
  EXPECT_THROW(config_from_json(doc), ConfigError);
  EXPECT_THROW(config_from_json(json::array()), ConfigError);
}

TEST(SimConfigValidate, ModelParameterConsistency) {
  auto expect_bad = [](json doc) { EXPECT_THROW(config_from_json(doc), ConfigError) << doc.dump(); };
  auto doc = base();
  doc["lambda"] = {{"kind", "fixed"}, {"value", 0.5}};
  expect_bad(doc);  // no_savings takes no lambda
  doc["model"] = "uniform_savings";
  EXPECT_NO_THROW(config_from_json(doc));
  doc["lambda"] = {{"kind", "uniform_interval"}, {"lower", 0}, {"upper", 1}};
  expect_bad(doc);  // uniform_savings needs a fixed lambda
  doc = base();
  doc["model"] = "distributed_savings";
  expect_bad(doc);  // needs a distribution
  doc = base();
  doc["theta"] = 0.05;
  expect_bad(doc);
  doc["model"] = "commodity";
  EXPECT_NO_THROW(config_from_json(doc));
  doc["theta"] = 1.0;
  expect_bad(doc);
  doc["theta"] = 0.3;
  doc["commodity_per_agent"] = 4.0;
  expect_bad(doc);  // price p0 - theta = 0.25 - 0.3 < 0
  doc["theta"] = 0.2;
  EXPECT_NO_THROW(config_from_json(doc));
  doc = base();
  doc["model"] = "angle";
  expect_bad(doc);  // angle_w missing
  doc["angle_w"] = 0.5;
  EXPECT_NO_THROW(config_from_json(doc));
  doc = base();
  doc["agents"] = 1;
  expect_bad(doc);
  doc = base();
  doc["sample_interval"] = 2000;
  expect_bad(doc);
  doc = base();
  doc["epsilon"] = {{"mode", "fixed"}, {"value", 1.5}};
  expect_bad(doc);
  doc = base();
  doc["track_richest"] = true;
  expect_bad(doc);
  doc = base();
  doc["lambda_bins"] = {0.0, 1.0};
  expect_bad(doc);
  doc = base();
  doc["condensation_threshold"] = 1.5;
  expect_bad(doc);
}

TEST(Overrides, DottedKeys) {
  auto doc = base();
  apply_override(doc, "agents", "250");
  apply_override(doc, "burn_in.mode", "auto");
  apply_override(doc, "model", "angle");
  set_config_value(doc, "angle_w", json(0.25));
  EXPECT_EQ(doc["agents"], 250);
  EXPECT_EQ(doc["burn_in"]["mode"], "auto");
  EXPECT_EQ(doc["model"], "angle");
  const auto c = config_from_json(doc);
  EXPECT_EQ(c.agents, 250);
  EXPECT_TRUE(c.auto_burn_in.has_value());
  EXPECT_THROW(apply_override(doc, "agents.x", "1"), ConfigError);
  EXPECT_THROW(apply_override(doc, "", "1"), ConfigError);
  EXPECT_THROW(apply_override(doc, "a..b", "1"), ConfigError);
}

TEST(ReadJsonFile, ErrorsAreConfigErrors) {
  EXPECT_THROW(read_json_file("/nonexistent/config.json"), ConfigError);
}
