#pragma once

// Closed-form and semi-analytic predictions used as references for the
// simulations: Gibbs temperature, the Gamma law for a uniform saving
// propensity, the self-consistent tail exponent, and the mean-field tail.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinex/lambda_spec.hpp"

namespace kinex {

/// T = M / N.
double gibbs_temperature(double total_money, long long agents);

/// P(m) = C m^alpha exp(-m/T) at unit mean money.
struct GammaParams {
  double alpha = 0.0;
  double T = 1.0;
  double C = 1.0;

  double density(double m) const;
  /// k-th raw moment Gamma(alpha + 1 + k) / Gamma(alpha + 1) * T^k.
  double raw_moment(int k) const;
};

GammaParams gamma_params(double lambda);

/// <lambda^nu> under the distribution (annealed specs: the per-trade marginal).
double expected_lambda_power(const LambdaDistSpec& spec, double nu);

/// Root nu > 0 of 2 <lambda^nu> = 1. Throws AnalysisError when there is no
/// root in (0, 64].
double solve_selfconsistent_nu(const LambdaDistSpec& spec);

struct TailPrediction {
  bool power_law = false;  ///< false: support bounded away from 1, no Pareto tail
  double nu = 0.0;
};

/// Pareto exponent from the behaviour of rho near lambda = 1.
TailPrediction predicted_tail_exponent(const LambdaDistSpec& spec);

struct TabulatedCurve {
  std::vector<double> grid;
  std::vector<double> values;
};

/// rho(1 - c/m) / m^2 on `m_grid` (all points > c), normalized by the
/// trapezoid rule on the grid.
TabulatedCurve predicted_density_curve(const LambdaDistSpec& spec, double c, std::span<const double> m_grid);

double trapezoid(std::span<const double> x, std::span<const double> y);

enum class TheoryQuantity { gibbs_T, gamma_params, pareto_nu, mean_money_curve, predicted_density };

const char* to_string(TheoryQuantity q);

struct TheoryPrediction {
  TheoryQuantity quantity = TheoryQuantity::gibbs_T;
  nlohmann::json values;
  std::string provenance;
};

TheoryPrediction predict_gibbs(double total_money, long long agents);
TheoryPrediction predict_gamma(double lambda);
TheoryPrediction predict_pareto(const LambdaDistSpec& spec);
/// <m(lambda)> = c / (1 - lambda) on a lambda grid.
TheoryPrediction predict_mean_money_curve(double c, std::span<const double> lambda_grid);
TheoryPrediction predict_density(const LambdaDistSpec& spec, double c, std::span<const double> m_grid);

void to_json(nlohmann::json& j, const TheoryPrediction& p);

}  // namespace kinex
