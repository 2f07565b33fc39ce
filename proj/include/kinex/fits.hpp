#pragma once

// Parametric fits: Pareto tails (two independent estimators that must agree),
// exponential bulk and tail fits, and Gamma fits.

#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinex/histogram.hpp"
#include "kinex/stats.hpp"

namespace kinex {

struct FitWindow {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

/// Tail window: starts where the upper `top_fraction` of the mass begins and
/// spans `decades` decades from there.
struct TailWindowPolicy {
  double top_fraction = 0.1;
  double decades = 1.0;
};

struct ParameterEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

struct SensitivityPoint {
  double top_fraction = 0.0;
  double nu_mle = 0.0;
  double nu_ls = 0.0;
};

struct FitResult {
  std::string method;
  std::map<std::string, ParameterEstimate> estimates;
  FitWindow window;
  std::map<std::string, double> goodness;
  bool healthy = false;
  std::string note;
  std::vector<SensitivityPoint> sensitivity;

  const ParameterEstimate& at(const std::string& name) const;
  double value(const std::string& name) const { return at(name).value; }
};

/// Pareto exponent nu of a tail P(m) ~ m^-(1 + nu), estimated twice over the
/// same window: least squares on log Q vs log m, and maximum likelihood for a
/// power law truncated to the window. Healthy means the data cover the whole
/// window, the log-log CCDF is straight (R^2 >= 0.99), and the two estimates
/// agree within twice their combined standard error.
///
/// Sample input uses a 20-group jackknife for the standard errors.
FitResult fit_pareto_tail(std::span<const double> samples, const TailWindowPolicy& policy = {});
/// Binned input without groups: standard errors from the likelihood curvature
/// and the regression residuals.
FitResult fit_pareto_tail(const DistributionEstimate& estimate, const TailWindowPolicy& policy = {});
/// Binned input with independent groups (e.g. ensemble blocks): delete-one-group
/// jackknife standard errors, window fixed by the pooled data.
FitResult fit_pareto_tail(const DistributionEstimate& pooled, std::span<const DistributionEstimate> groups,
                          const TailWindowPolicy& policy = {});

/// P(m) = exp(-m/T)/T. Healthy when the Kolmogorov-Smirnov distance is below
/// the 1% critical value.
FitResult fit_exponential(std::span<const double> samples);
FitResult fit_exponential(const DistributionEstimate& estimate);

/// Exponential decay m - lo ~ Exp(T) over a window that starts where the upper
/// `top_fraction` of the mass begins and ends where the survival has fallen by
/// `survival_decades` more decades. Estimated by window-truncated likelihood
/// and by a straight line through log Q vs m on the same window; healthy when
/// the line is straight (R^2 >= 0.99) and the two temperatures agree to within
/// twice their combined standard error or 5%, whichever is larger.
FitResult fit_exponential_tail(const DistributionEstimate& pooled, std::span<const DistributionEstimate> groups,
                               double top_fraction = 0.1, double survival_decades = 2.0);

/// P(m) = C m^alpha exp(-m/T) by maximum likelihood, with the implied saving
/// propensity lambda = alpha / (alpha + 3).
FitResult fit_gamma(std::span<const double> samples);
FitResult fit_gamma(const PowerSums& sums);
FitResult fit_gamma(const DistributionEstimate& estimate);

double implied_lambda(double alpha);

/// Asymptotic one-sample Kolmogorov-Smirnov critical value at the 1% level.
double ks_critical_1pct(double n);

void to_json(nlohmann::json& j, const FitResult& fit);

}  // namespace kinex
