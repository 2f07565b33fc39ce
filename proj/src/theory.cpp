#include "kinex/theory.hpp"

#include <cmath>
#include <limits>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "kinex/error.hpp"

namespace kinex {

namespace {

constexpr double kQuadratureTolerance = 1e-12;

double integrate_density_times(const LambdaDistSpec& spec, double nu) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto f = [&](double x) { return spec.density(x) * std::pow(x, nu); };
  double lo = 0.0, hi = 1.0;
  if (spec.kind == LambdaKind::uniform_interval) {
    lo = spec.lower;
    hi = spec.upper;
  }
  const double split = spec.lambda0;
  if (spec.kind == LambdaKind::power_about_lambda0 && split > lo && split < hi) {
    return integrator.integrate(f, lo, split, kQuadratureTolerance) +
           integrator.integrate(f, split, hi, kQuadratureTolerance);
  }
  return integrator.integrate(f, lo, hi, kQuadratureTolerance);
}

}  // namespace

double gibbs_temperature(double total_money, long long agents) {
  if (!(total_money > 0.0) || agents < 1) throw ContractViolation("Gibbs temperature needs M > 0 and N >= 1");
  return total_money / static_cast<double>(agents);
}

double GammaParams::density(double m) const {
  if (m < 0.0) return 0.0;
  if (m == 0.0) return alpha == 0.0 ? C : 0.0;
  return std::exp(std::log(C) + alpha * std::log(m) - m / T);
}

double GammaParams::raw_moment(int k) const {
  return std::exp(std::lgamma(alpha + 1.0 + k) - std::lgamma(alpha + 1.0)) * std::pow(T, k);
}

GammaParams gamma_params(double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ContractViolation("gamma_params needs lambda in [0, 1)");
  GammaParams g;
  g.alpha = 3.0 * lambda / (1.0 - lambda);
  g.T = 1.0 / (g.alpha + 1.0);
  g.C = std::exp((g.alpha + 1.0) * std::log(g.alpha + 1.0) - std::lgamma(g.alpha + 1.0));
  return g;
}

double expected_lambda_power(const LambdaDistSpec& spec, double nu) {
  spec.validate();
  switch (spec.kind) {
    case LambdaKind::fixed:
      return std::pow(spec.value, nu);
    case LambdaKind::uniform_interval: {
      const double a = spec.lower, b = spec.upper;
      return (std::pow(b, nu + 1.0) - std::pow(a, nu + 1.0)) / ((nu + 1.0) * (b - a));
    }
    case LambdaKind::mixed:
      return spec.fraction * std::pow(spec.lambda1, nu) + (1.0 - spec.fraction) * expected_lambda_power(*spec.inner, nu);
    case LambdaKind::power_about_lambda0:
    case LambdaKind::power_about_one:
    case LambdaKind::annealed_lower_bound:
      return integrate_density_times(spec, nu);
  }
  throw ContractViolation("unknown lambda distribution kind");
}

double solve_selfconsistent_nu(const LambdaDistSpec& spec) {
  auto g = [&](double nu) { return 2.0 * expected_lambda_power(spec, nu) - 1.0; };
  double lo = 1e-12, hi = 64.0;
  const double g_lo = g(lo), g_hi = g(hi);
  if (!(g_lo > 0.0 && g_hi < 0.0)) {
    throw AnalysisError("2<lambda^nu> = 1 has no root in (0, 64]: 2<lambda^nu> - 1 is " + std::to_string(g_lo) +
                        " near 0 and " + std::to_string(g_hi) + " at 64");
  }
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TailPrediction predicted_tail_exponent(const LambdaDistSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LambdaKind::fixed:
      return {false, 0.0};
    case LambdaKind::uniform_interval:
      return spec.upper == 1.0 ? TailPrediction{true, 1.0} : TailPrediction{false, 0.0};
    case LambdaKind::power_about_one:
      return {true, 1.0 + spec.exponent};
    case LambdaKind::power_about_lambda0:
      return spec.lambda0 == 1.0 ? TailPrediction{true, 1.0 + spec.exponent} : TailPrediction{true, 1.0};
    case LambdaKind::mixed:
      return spec.fraction < 1.0 ? predicted_tail_exponent(*spec.inner) : TailPrediction{false, 0.0};
    case LambdaKind::annealed_lower_bound:
      return predicted_tail_exponent(*spec.inner);
  }
  throw AnalysisError("cannot classify the lambda -> 1 behaviour of this distribution");
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) s += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return s;
}

TabulatedCurve predicted_density_curve(const LambdaDistSpec& spec, double c, std::span<const double> m_grid) {
  if (!(c > 0.0)) throw ContractViolation("mean-field curve needs c > 0");
  if (m_grid.size() < 2) throw ContractViolation("mean-field curve needs at least two grid points");
  TabulatedCurve out;
  for (std::size_t k = 0; k < m_grid.size(); ++k) {
    const double m = m_grid[k];
    if (!(m > c)) throw ContractViolation("grid point m = " + std::to_string(m) + " is not above c = " + std::to_string(c));
    if (k > 0 && !(m > m_grid[k - 1])) throw ContractViolation("grid must be strictly increasing");
    out.grid.push_back(m);
    out.values.push_back(spec.density(1.0 - c / m) / (m * m));
  }
  const double norm = trapezoid(out.grid, out.values);
  if (!(norm > 0.0)) throw AnalysisError("mean-field curve vanishes on the grid");
  for (double& v : out.values) v /= norm;
  return out;
}

const char* to_string(TheoryQuantity q) {
  switch (q) {
    case TheoryQuantity::gibbs_T: return "gibbs_T";
    case TheoryQuantity::gamma_params: return "gamma_params";
    case TheoryQuantity::pareto_nu: return "pareto_nu";
    case TheoryQuantity::mean_money_curve: return "mean_money_curve";
    case TheoryQuantity::predicted_density: return "predicted_density";
  }
  return "?";
}

TheoryPrediction predict_gibbs(double total_money, long long agents) {
  return {TheoryQuantity::gibbs_T, {{"T", gibbs_temperature(total_money, agents)}}, "gibbs: P(m) = exp(-m/T)/T, T = M/N"};
}

TheoryPrediction predict_gamma(double lambda) {
  const GammaParams g = gamma_params(lambda);
  nlohmann::json moments = nlohmann::json::array();
  for (int k = 1; k <= 4; ++k) moments.push_back(g.raw_moment(k));
  return {TheoryQuantity::gamma_params,
          {{"lambda", lambda}, {"alpha", g.alpha}, {"T", g.T}, {"C", g.C}, {"raw_moments", moments}},
          "gamma: P(m) = C m^alpha exp(-m/T), alpha = 3 lambda/(1 - lambda), T = 1/(alpha + 1)"};
}

TheoryPrediction predict_pareto(const LambdaDistSpec& spec) {
  const TailPrediction tail = predicted_tail_exponent(spec);
  nlohmann::json v = {{"power_law", tail.power_law}, {"lambda_spec", spec}};
  v["nu"] = tail.power_law ? nlohmann::json(tail.nu) : nlohmann::json(nullptr);
  try {
    v["nu_selfconsistent"] = solve_selfconsistent_nu(spec);
  } catch (const AnalysisError&) {
    v["nu_selfconsistent"] = nullptr;
  }
  return {TheoryQuantity::pareto_nu, v,
          "mean-field tail: P(m) ~ rho(1 - c/m)/m^2; self-consistency 2<lambda^nu> = 1"};
}

TheoryPrediction predict_mean_money_curve(double c, std::span<const double> lambda_grid) {
  std::vector<double> values;
  for (double l : lambda_grid) {
    if (!(l >= 0.0 && l < 1.0)) throw ContractViolation("lambda grid must lie in [0, 1)");
    values.push_back(c / (1.0 - l));
  }
  return {TheoryQuantity::mean_money_curve,
          {{"c", c}, {"lambda", std::vector<double>(lambda_grid.begin(), lambda_grid.end())}, {"mean_money", values}},
          "mean-field: <m(lambda)> (1 - lambda) = c"};
}

TheoryPrediction predict_density(const LambdaDistSpec& spec, double c, std::span<const double> m_grid) {
  const TabulatedCurve curve = predicted_density_curve(spec, c, m_grid);
  return {TheoryQuantity::predicted_density,
          {{"c", c}, {"m", curve.grid}, {"density", curve.values}},
          "mean-field tail: P(m) ~ rho(1 - c/m)/m^2"};
}

void to_json(nlohmann::json& j, const TheoryPrediction& p) {
  j = {{"quantity", to_string(p.quantity)}, {"values", p.values}, {"provenance", p.provenance}};
}

}  // namespace kinex
