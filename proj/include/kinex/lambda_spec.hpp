#pragma once

// Savings-propensity distributions: a small declarative description, its
// density/CDF, and samplers for quenched (per-agent, fixed) and annealed
// (redrawn every trade) propensities.

#include <cstddef>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinex/random.hpp"

namespace kinex {

/// Largest double strictly below 1. No sampler ever returns more.
inline constexpr double kLambdaCap = 0x1.fffffffffffffp-1;

enum class LambdaKind {
  fixed,                 ///< every agent has `value`
  uniform_interval,      ///< uniform on [lower, upper); upper == 1 means the open end at 1
  power_about_lambda0,   ///< rho ~ |lambda0 - lambda|^exponent on [0, 1)
  power_about_one,       ///< rho ~ (1 - lambda)^exponent on [0, 1)
  mixed,                 ///< round(fraction N) agents at lambda1, the rest from `inner`
  annealed_lower_bound,  ///< per-agent lower bound mu ~ `inner`, lambda ~ U[mu, 1) each trade
};

struct LambdaDistSpec {
  LambdaKind kind = LambdaKind::fixed;
  double value = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  double lambda0 = 0.0;
  double exponent = 0.0;
  double fraction = 0.0;
  double lambda1 = 0.0;
  std::shared_ptr<const LambdaDistSpec> inner;

  static LambdaDistSpec fixed(double value);
  static LambdaDistSpec uniform(double lower, double upper);
  static LambdaDistSpec power_about(double lambda0, double exponent);
  static LambdaDistSpec power_about_one(double exponent);
  static LambdaDistSpec mixed(double fraction, double lambda1, LambdaDistSpec residual);
  static LambdaDistSpec annealed(LambdaDistSpec lower_bound_dist);

  /// Throws ConfigError when the parameters do not describe a distribution on [0, 1).
  void validate() const;

  bool is_annealed() const noexcept { return kind == LambdaKind::annealed_lower_bound; }

  /// Density of the absolutely continuous part (atoms contribute nothing).
  /// For annealed specs this is the marginal density of the per-trade lambda.
  double density(double lambda) const;

  /// Distribution function including atoms. Annealed: marginal of the per-trade lambda.
  double cdf(double lambda) const;

  /// Draws one value; for annealed specs this is a lower bound mu.
  double sample(RngStream& rng) const;

  friend bool operator==(const LambdaDistSpec& a, const LambdaDistSpec& b);
};

/// One propensity per agent (lower bounds mu for annealed specs). Mixed specs
/// put exactly round(fraction * n) agents, the first ones, at lambda1.
std::vector<double> sample_quenched(const LambdaDistSpec& spec, std::size_t population_size, RngStream& rng);

/// Per-trade propensity of an annealed agent: uniform on [lower_bound, 1).
double sample_annealed(double lower_bound, RngStream& rng);

void to_json(nlohmann::json& j, const LambdaDistSpec& spec);
void from_json(const nlohmann::json& j, LambdaDistSpec& spec);

const char* to_string(LambdaKind kind);

}  // namespace kinex
