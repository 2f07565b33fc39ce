#include "kinex/sim_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kinex/error.hpp"

namespace kinex {

namespace {

constexpr const char* kModelNames[] = {"no_savings", "uniform_savings", "distributed_savings",
                                       "angle",      "minimum_exchange", "commodity"};

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

template <class T>
T get_as(const nlohmann::json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value for \"" + key + "\": " + e.what());
  }
}

std::int64_t get_int(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError("\"" + key + "\" must be an integer");
  return v.get<std::int64_t>();
}

double get_real(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError("\"" + key + "\" must be a number");
  return v.get<double>();
}

bool is_savings_model(Model m) {
  return m == Model::uniform_savings || m == Model::distributed_savings || m == Model::commodity;
}

}  // namespace

const char* to_string(Model m) { return kModelNames[static_cast<int>(m)]; }

Model model_from_string(std::string_view s) {
  for (int k = 0; k < 6; ++k) {
    if (s == kModelNames[k]) return static_cast<Model>(k);
  }
  throw ConfigError("unknown model \"" + std::string(s) + "\"");
}

bool SimConfig::uses_lambda() const { return is_savings_model(model); }

LambdaDistSpec SimConfig::effective_lambda() const {
  if (lambda) return *lambda;
  return LambdaDistSpec::fixed(0.0);
}

void SimConfig::validate() const {
  if (agents < 2) throw ConfigError("agents must be at least 2");
  if (!(money_per_agent > 0.0) || !std::isfinite(money_per_agent)) throw ConfigError("money_per_agent must be positive");
  if (!(commodity_per_agent > 0.0) || !std::isfinite(commodity_per_agent)) {
    throw ConfigError("commodity_per_agent must be positive");
  }
  if (lambda) {
    if (!uses_lambda()) throw ConfigError(std::string("model ") + to_string(model) + " takes no lambda");
    lambda->validate();
  }
  if (model == Model::uniform_savings && (!lambda || lambda->kind != LambdaKind::fixed)) {
    throw ConfigError("uniform_savings needs a lambda of kind \"fixed\"");
  }
  if (model == Model::distributed_savings && !lambda) throw ConfigError("distributed_savings needs a lambda distribution");
  if (!(theta >= 0.0 && theta < 1.0)) throw ConfigError("theta must lie in [0, 1)");
  if (theta != 0.0 && model != Model::commodity) throw ConfigError("theta is only used by the commodity model");
  if (model == Model::commodity && !(theta < global_price())) {
    throw ConfigError("theta must be below the global price money_per_agent / commodity_per_agent");
  }
  if (model == Model::angle) {
    if (!(angle_w > 0.0 && angle_w < 1.0)) throw ConfigError("angle model needs angle_w in (0, 1)");
  } else if (angle_w != 0.0) {
    throw ConfigError("angle_w is only used by the angle model");
  }
  if (!epsilon.random && !(epsilon.value >= 0.0 && epsilon.value <= 1.0)) {
    throw ConfigError("fixed epsilon must lie in [0, 1]");
  }
  if (mc_steps < 1) throw ConfigError("mc_steps must be at least 1");
  if (burn_in < 0) throw ConfigError("burn_in must be non-negative");
  if (auto_burn_in) {
    if (!(auto_burn_in->threshold > 0.0)) throw ConfigError("burn-in threshold must be positive");
    if (auto_burn_in->consecutive < 1) throw ConfigError("burn-in consecutive count must be at least 1");
    if (auto_burn_in->window_steps < 0) throw ConfigError("burn-in window must be non-negative");
  }
  if (sample_interval < 1) throw ConfigError("sample_interval must be at least 1");
  if (mc_steps < sample_interval) throw ConfigError("mc_steps must cover at least one sample_interval");
  if (ensembles < 1) throw ConfigError("ensembles must be at least 1");
  if (!lambda_bins.empty()) {
    if (!uses_lambda()) throw ConfigError("lambda_bins need a model with saving propensities");
    if (lambda_bins.size() < 2) throw ConfigError("lambda_bins needs at least two edges");
    for (std::size_t k = 0; k < lambda_bins.size(); ++k) {
      if (!(lambda_bins[k] >= 0.0 && lambda_bins[k] <= 1.0)) throw ConfigError("lambda_bins must lie in [0, 1]");
      if (k > 0 && !(lambda_bins[k] > lambda_bins[k - 1])) throw ConfigError("lambda_bins must be strictly increasing");
    }
  }
  if (track_richest) {
    if (model != Model::distributed_savings) throw ConfigError("track_richest needs the distributed_savings model");
    if (auto_burn_in) throw ConfigError("track_richest needs a fixed burn_in");
    if (richest_stride < 1) throw ConfigError("richest_stride must be at least 1");
  }
  if (condensation_threshold && !(*condensation_threshold > 0.0 && *condensation_threshold <= 1.0)) {
    throw ConfigError("condensation_threshold must lie in (0, 1]");
  }
  if (jackknife_groups < 1) throw ConfigError("jackknife_groups must be at least 1");
  if (histogram.bins_per_decade < 1 || histogram.bins_per_decade > 1000) {
    throw ConfigError("histogram.bins_per_decade must lie in [1, 1000]");
  }
  if (!(histogram.min_fraction > 0.0 && histogram.min_fraction < 1.0)) {
    throw ConfigError("histogram.min_fraction must lie in (0, 1)");
  }
}

SimConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc,
                 {"model", "agents", "money_per_agent", "commodity_per_agent", "lambda", "theta", "angle_w", "epsilon",
                  "mc_steps", "burn_in", "sample_interval", "ensembles", "seed", "initial", "lambda_bins",
                  "pair_differences", "track_richest", "richest_stride", "condensation_threshold", "jackknife_groups",
                  "histogram"},
                 "config");
  for (const char* required : {"model", "agents", "mc_steps"}) {
    if (!doc.contains(required)) throw ConfigError(std::string("config needs \"") + required + "\"");
  }
  SimConfig c;
  c.model = model_from_string(get_as<std::string>(doc, "model"));
  c.agents = get_int(doc, "agents");
  c.mc_steps = get_int(doc, "mc_steps");
  if (doc.contains("money_per_agent")) c.money_per_agent = get_real(doc, "money_per_agent");
  if (doc.contains("commodity_per_agent")) c.commodity_per_agent = get_real(doc, "commodity_per_agent");
  if (doc.contains("lambda")) {
    LambdaDistSpec spec;
    from_json(doc.at("lambda"), spec);
    c.lambda = spec;
  }
  if (doc.contains("theta")) c.theta = get_real(doc, "theta");
  if (doc.contains("angle_w")) c.angle_w = get_real(doc, "angle_w");
  if (doc.contains("epsilon")) {
    const auto& e = doc.at("epsilon");
    if (!e.is_object()) throw ConfigError("epsilon must be an object {\"mode\": \"random\" | \"fixed\", \"value\": ...}");
    reject_unknown(e, {"mode", "value"}, "epsilon");
    const auto mode = get_as<std::string>(e, "mode");
    if (mode == "random") {
      if (e.contains("value")) throw ConfigError("random epsilon takes no value");
      c.epsilon = {true, 0.5};
    } else if (mode == "fixed") {
      if (!e.contains("value")) throw ConfigError("fixed epsilon needs a value");
      c.epsilon = {false, get_real(e, "value")};
    } else {
      throw ConfigError("epsilon mode must be \"random\" or \"fixed\"");
    }
    if (c.model == Model::angle) throw ConfigError("the angle model draws no epsilon");
  }

  if (doc.contains("burn_in")) {
    const auto& b = doc.at("burn_in");
    if (b.is_number_integer()) {
      c.burn_in = b.get<std::int64_t>();
    } else if (b.is_string() && b.get<std::string>() == "auto") {
      c.auto_burn_in = AutoBurnIn{};
    } else if (b.is_object()) {
      reject_unknown(b, {"mode", "threshold", "consecutive", "window_steps"}, "burn_in");
      if (!b.contains("mode") || b.at("mode") != "auto") throw ConfigError("burn_in object needs \"mode\": \"auto\"");
      AutoBurnIn a;
      if (b.contains("threshold")) a.threshold = get_real(b, "threshold");
      if (b.contains("consecutive")) a.consecutive = static_cast<int>(get_int(b, "consecutive"));
      if (b.contains("window_steps")) a.window_steps = get_int(b, "window_steps");
      c.auto_burn_in = a;
    } else {
      throw ConfigError("burn_in must be an integer, \"auto\", or {\"mode\": \"auto\", ...}");
    }
  } else {
    const bool slow = c.model == Model::distributed_savings || c.model == Model::commodity;
    c.burn_in = slow ? 1'000'000 : 10'000;
  }

  if (doc.contains("sample_interval")) c.sample_interval = get_int(doc, "sample_interval");
  if (doc.contains("ensembles")) c.ensembles = get_int(doc, "ensembles");
  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (!s.is_number_integer()) throw ConfigError("seed must be an integer");
    c.seed = s.is_number_unsigned() ? s.get<std::uint64_t>() : static_cast<std::uint64_t>(s.get<std::int64_t>());
  }
  if (doc.contains("initial")) {
    const auto init = get_as<std::string>(doc, "initial");
    if (init == "uniform") {
      c.initial = InitialCondition::uniform;
    } else if (init == "random") {
      c.initial = InitialCondition::random;
    } else {
      throw ConfigError("initial must be \"uniform\" or \"random\"");
    }
  }
  if (doc.contains("lambda_bins")) c.lambda_bins = get_as<std::vector<double>>(doc, "lambda_bins");
  if (doc.contains("pair_differences")) c.pair_differences = get_as<bool>(doc, "pair_differences");
  if (doc.contains("track_richest")) c.track_richest = get_as<bool>(doc, "track_richest");
  if (doc.contains("richest_stride")) c.richest_stride = get_int(doc, "richest_stride");
  if (doc.contains("condensation_threshold") && !doc.at("condensation_threshold").is_null()) {
    c.condensation_threshold = get_real(doc, "condensation_threshold");
  }
  if (doc.contains("jackknife_groups")) c.jackknife_groups = get_int(doc, "jackknife_groups");
  if (doc.contains("histogram")) {
    const auto& h = doc.at("histogram");
    if (!h.is_object()) throw ConfigError("histogram must be an object");
    reject_unknown(h, {"bins_per_decade", "min_fraction"}, "histogram");
    if (h.contains("bins_per_decade")) c.histogram.bins_per_decade = static_cast<int>(get_int(h, "bins_per_decade"));
    if (h.contains("min_fraction")) c.histogram.min_fraction = get_real(h, "min_fraction");
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const SimConfig& c) {
  nlohmann::json j = {{"model", to_string(c.model)},
                      {"agents", c.agents},
                      {"money_per_agent", c.money_per_agent},
                      {"mc_steps", c.mc_steps},
                      {"sample_interval", c.sample_interval},
                      {"ensembles", c.ensembles},
                      {"seed", c.seed},
                      {"initial", c.initial == InitialCondition::uniform ? "uniform" : "random"},
                      {"jackknife_groups", c.jackknife_groups},
                      {"histogram",
                       {{"bins_per_decade", c.histogram.bins_per_decade}, {"min_fraction", c.histogram.min_fraction}}}};
  if (c.model == Model::commodity) {
    j["commodity_per_agent"] = c.commodity_per_agent;
    j["theta"] = c.theta;
  }
  if (c.lambda) j["lambda"] = *c.lambda;
  if (c.model == Model::angle) {
    j["angle_w"] = c.angle_w;
  } else {
    j["epsilon"] = c.epsilon.random ? nlohmann::json{{"mode", "random"}}
                                    : nlohmann::json{{"mode", "fixed"}, {"value", c.epsilon.value}};
  }
  if (c.auto_burn_in) {
    j["burn_in"] = {{"mode", "auto"},
                    {"threshold", c.auto_burn_in->threshold},
                    {"consecutive", c.auto_burn_in->consecutive},
                    {"window_steps", c.auto_burn_in->window_steps}};
  } else {
    j["burn_in"] = c.burn_in;
  }
  if (!c.lambda_bins.empty()) j["lambda_bins"] = c.lambda_bins;
  if (c.pair_differences) j["pair_differences"] = true;
  if (c.track_richest) {
    j["track_richest"] = true;
    j["richest_stride"] = c.richest_stride;
  }
  if (c.condensation_threshold) j["condensation_threshold"] = *c.condensation_threshold;
  return j;
}

void set_config_value(nlohmann::json& doc, std::string_view dotted_key, const nlohmann::json& value) {
  if (dotted_key.empty()) throw ConfigError("empty override key");
  nlohmann::json* node = &doc;
  std::string_view rest = dotted_key;
  while (true) {
    const auto dot = rest.find('.');
    const std::string key(rest.substr(0, dot));
    if (key.empty()) throw ConfigError("malformed override key \"" + std::string(dotted_key) + "\"");
    if (!node->is_object()) throw ConfigError("override \"" + std::string(dotted_key) + "\" descends into a non-object");
    if (dot == std::string_view::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = nlohmann::json::object();
    rest = rest.substr(dot + 1);
  }
}

void apply_override(nlohmann::json& doc, std::string_view dotted_key, std::string_view value_text) {
  nlohmann::json value = nlohmann::json::parse(value_text, nullptr, false);
  if (value.is_discarded()) value = std::string(value_text);
  set_config_value(doc, dotted_key, value);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json doc = nlohmann::json::parse(buffer.str(), nullptr, false);
  if (doc.is_discarded()) throw ConfigError(path + " is not valid JSON");
  return doc;
}

}  // namespace kinex
