#pragma once

// Descriptive statistics over samples and binned estimates: CCDFs, raw
// moments with jackknife errors, money conditioned on the saving propensity,
// and the distribution of pairwise money differences.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "kinex/histogram.hpp"

namespace kinex {

/// Q(x[k]) = fraction of the mass at or above x[k].
struct CcdfCurve {
  std::vector<double> x;
  std::vector<double> q;
};

CcdfCurve ccdf(std::span<const double> samples);
/// Evaluated at every bin's left edge.
CcdfCurve ccdf(const DistributionEstimate& estimate);

/// Running sums of m^k (k = 1..4) and ln m; the sufficient statistics the
/// moment and Gamma estimators need. Merging is plain addition.
struct PowerSums {
  double count = 0.0;
  std::array<double, 4> power{};  ///< sum of m^(k+1)
  double log_sum = 0.0;           ///< sum of ln m over m > 0
  double positive_count = 0.0;

  void add(double m) {
    count += 1.0;
    const double m2 = m * m;
    power[0] += m;
    power[1] += m2;
    power[2] += m2 * m;
    power[3] += m2 * m2;
    if (m > 0.0) {
      log_sum += std::log(m);
      positive_count += 1.0;
    }
  }
  void merge(const PowerSums& other);
  double raw_moment(int order) const { return power.at(static_cast<std::size_t>(order - 1)) / count; }

  friend bool operator==(const PowerSums&, const PowerSums&) = default;
};

struct MomentEstimate {
  int order = 1;
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Raw moments <m^k>, k = 1..max_order (<= 4), with delete-one jackknife errors.
std::vector<MomentEstimate> moments(std::span<const double> samples, int max_order);
/// Same from per-group sums, with delete-one-group jackknife errors.
std::vector<MomentEstimate> moments(std::span<const PowerSums> groups, int max_order);

/// Accumulates money observations binned by the owner's saving propensity.
class LambdaConditional {
 public:
  LambdaConditional(std::vector<double> lambda_edges, Binning money_binning);

  void add(double lambda, double money);
  void merge(const LambdaConditional& other);

  const std::vector<double>& lambda_edges() const noexcept { return edges_; }
  std::size_t bins() const noexcept { return count_.size(); }
  double count(std::size_t b) const { return count_[b]; }
  double money_sum(std::size_t b) const { return money_[b]; }
  double unsaved_money_sum(std::size_t b) const { return unsaved_[b]; }
  double lambda_sum(std::size_t b) const { return lambda_[b]; }
  const Histogram& money_histogram(std::size_t b) const { return hist_[b]; }

  friend bool operator==(const LambdaConditional&, const LambdaConditional&) = default;

 private:
  std::vector<double> edges_;
  std::vector<double> count_, money_, unsaved_, lambda_;
  std::vector<Histogram> hist_;
};

struct LambdaBinSummary {
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  double count = 0.0;
  double mean_lambda = 0.0;
  double mean_money = 0.0;
  double unsaved_product = 0.0;  ///< <m (1 - lambda)> over the bin
  double most_probable = 0.0;    ///< centre of the highest-density money bin
};

/// One entry per lambda bin; empty bins are std::nullopt rather than zeros.
std::vector<std::optional<LambdaBinSummary>> conditional_money_by_lambda(const LambdaConditional& acc);
std::vector<std::optional<LambdaBinSummary>> conditional_money_by_lambda(std::span<const double> money,
                                                                         std::span<const double> lambda,
                                                                         std::vector<double> lambda_edges,
                                                                         const Binning& money_binning);

/// Distribution of |m_i - m_j| with i and j drawn independently from the
/// population (all ordered pairs, i == j included).
DistributionEstimate pairwise_difference_distribution(std::span<const double> money, const Binning& binning);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope x.
LineFit least_squares(std::span<const double> x, std::span<const double> y);

/// First index at which |series - target| <= tolerance * |target|; nullopt if never.
std::optional<std::size_t> relaxation_time(std::span<const double> series, double target, double tolerance = 0.1);

}  // namespace kinex
