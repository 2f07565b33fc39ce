#pragma once

// Complete, reproducible description of one experiment, read from JSON with
// strict key checking.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinex/lambda_spec.hpp"

namespace kinex {

enum class Model { no_savings, uniform_savings, distributed_savings, angle, minimum_exchange, commodity };
enum class InitialCondition { uniform, random };

const char* to_string(Model m);
Model model_from_string(std::string_view s);

struct EpsilonSetting {
  bool random = true;
  double value = 0.5;  ///< used when !random
  friend bool operator==(const EpsilonSetting&, const EpsilonSetting&) = default;
};

/// Automatic burn-in: stop once the money histograms of successive windows
/// differ by less than `threshold` (L1 distance of the bin probabilities) for
/// `consecutive` windows in a row.
struct AutoBurnIn {
  double threshold = 0.05;
  int consecutive = 3;
  std::int64_t window_steps = 0;  ///< 0: max(10, ceil(1e5 / N))
  friend bool operator==(const AutoBurnIn&, const AutoBurnIn&) = default;
};

struct HistogramSettings {
  int bins_per_decade = 32;
  double min_fraction = 1e-6;  ///< first log edge, as a fraction of the per-agent mean
  friend bool operator==(const HistogramSettings&, const HistogramSettings&) = default;
};

struct SimConfig {
  Model model = Model::no_savings;
  std::int64_t agents = 1000;
  double money_per_agent = 1.0;
  double commodity_per_agent = 1.0;
  std::optional<LambdaDistSpec> lambda;
  double theta = 0.0;
  double angle_w = 0.0;
  EpsilonSetting epsilon;
  std::int64_t mc_steps = 0;          ///< sampling-phase length, after burn-in
  std::int64_t burn_in = 0;           ///< fixed burn-in (ignored when auto_burn_in is set)
  std::optional<AutoBurnIn> auto_burn_in;
  std::int64_t sample_interval = 10;
  std::int64_t ensembles = 1000;
  std::uint64_t seed = 0;
  InitialCondition initial = InitialCondition::uniform;
  std::vector<double> lambda_bins;    ///< empty: no lambda-conditioned statistics
  bool pair_differences = false;
  bool track_richest = false;
  std::int64_t richest_stride = 1;
  std::optional<double> condensation_threshold;
  std::int64_t jackknife_groups = 20;
  HistogramSettings histogram;

  double total_money() const { return static_cast<double>(agents) * money_per_agent; }
  double total_commodity() const { return static_cast<double>(agents) * commodity_per_agent; }
  /// Global commodity price p0 = M / C; wealth is m + p0 c.
  double global_price() const { return money_per_agent / commodity_per_agent; }
  /// The saving propensity distribution actually used (lambda = 0 when the model has none).
  LambdaDistSpec effective_lambda() const;
  bool uses_lambda() const;

  /// Throws ConfigError on any inconsistency.
  void validate() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Parses and validates. Unknown keys anywhere are rejected.
SimConfig config_from_json(const nlohmann::json& doc);
/// Canonical form with every default spelled out; round-trips through config_from_json.
nlohmann::json config_to_json(const SimConfig& config);

/// Sets `doc[a][b]...` for a dotted key path "a.b", creating objects on the way.
void set_config_value(nlohmann::json& doc, std::string_view dotted_key, const nlohmann::json& value);
/// Same, from command-line text: parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, std::string_view dotted_key, std::string_view value_text);

/// Reads a JSON document from a file, mapping I/O and parse failures to ConfigError.
nlohmann::json read_json_file(const std::string& path);

}  // namespace kinex
