#include "kinex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kinex/error.hpp"

namespace kinex {

CcdfCurve ccdf(std::span<const double> samples) {
  if (samples.empty()) throw AnalysisError("ccdf of an empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  if (!(sorted.front() >= 0.0)) throw AnalysisError("ccdf expects non-negative values");
  const auto n = static_cast<double>(sorted.size());
  CcdfCurve out;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (k > 0 && sorted[k] == sorted[k - 1]) continue;
    out.x.push_back(sorted[k]);
    out.q.push_back(static_cast<double>(sorted.size() - k) / n);
  }
  return out;
}

CcdfCurve ccdf(const DistributionEstimate& estimate) {
  const double n = estimate.total();
  if (!(n > 0.0)) throw AnalysisError("ccdf of an empty histogram");
  CcdfCurve out;
  out.x.resize(estimate.bins());
  out.q.resize(estimate.bins());
  double above = 0.0;
  for (std::size_t i = estimate.bins(); i-- > 0;) {
    above += estimate.counts[i];
    out.x[i] = estimate.left(i);
    out.q[i] = above / n;
  }
  return out;
}

void PowerSums::merge(const PowerSums& other) {
  count += other.count;
  for (std::size_t k = 0; k < power.size(); ++k) power[k] += other.power[k];
  log_sum += other.log_sum;
  positive_count += other.positive_count;
}

std::vector<MomentEstimate> moments(std::span<const double> samples, int max_order) {
  if (max_order < 1 || max_order > 4) throw ContractViolation("moment order must be 1..4");
  if (samples.empty()) throw AnalysisError("moments of an empty sample");
  std::vector<MomentEstimate> out;
  const auto n = static_cast<double>(samples.size());
  for (int k = 1; k <= max_order; ++k) {
    // Welford: exact for constant data. The delete-one jackknife error of a
    // sample mean is the usual standard error with the n - 1 variance.
    double mean = 0.0;
    double m2 = 0.0;
    double i = 0.0;
    for (double x : samples) {
      double y = x;
      for (int p = 1; p < k; ++p) y *= x;
      i += 1.0;
      const double d = y - mean;
      mean += d / i;
      m2 += d * (y - mean);
    }
    const double se = samples.size() > 1 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0;
    out.push_back({k, mean, se});
  }
  return out;
}

std::vector<MomentEstimate> moments(std::span<const PowerSums> groups, int max_order) {
  if (max_order < 1 || max_order > 4) throw ContractViolation("moment order must be 1..4");
  PowerSums all;
  for (const auto& g : groups) all.merge(g);
  if (!(all.count > 0.0)) throw AnalysisError("moments of an empty sample");
  const auto n_groups = static_cast<double>(groups.size());
  std::vector<MomentEstimate> out;
  for (int k = 1; k <= max_order; ++k) {
    const auto idx = static_cast<std::size_t>(k - 1);
    const double value = all.power[idx] / all.count;
    double se = std::numeric_limits<double>::quiet_NaN();
    if (groups.size() >= 2) {
      std::vector<double> loo;
      for (const auto& g : groups) {
        const double rest = all.count - g.count;
        if (rest > 0.0) loo.push_back((all.power[idx] - g.power[idx]) / rest);
      }
      const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / static_cast<double>(loo.size());
      double ss = 0.0;
      for (double v : loo) ss += (v - mean) * (v - mean);
      se = std::sqrt((n_groups - 1.0) / n_groups * ss);
    }
    out.push_back({k, value, se});
  }
  return out;
}

LambdaConditional::LambdaConditional(std::vector<double> lambda_edges, Binning money_binning)
    : edges_(std::move(lambda_edges)) {
  if (edges_.size() < 2) throw ContractViolation("lambda binning needs at least two edges");
  for (std::size_t k = 1; k < edges_.size(); ++k) {
    if (!(edges_[k] > edges_[k - 1])) throw ContractViolation("lambda bin edges must be strictly increasing");
  }
  const std::size_t bins = edges_.size() - 1;
  count_.assign(bins, 0.0);
  money_.assign(bins, 0.0);
  unsaved_.assign(bins, 0.0);
  lambda_.assign(bins, 0.0);
  hist_.assign(bins, Histogram(std::move(money_binning)));
}

void LambdaConditional::add(double lambda, double money) {
  if (lambda < edges_.front() || lambda > edges_.back()) return;
  auto it = std::upper_bound(edges_.begin(), edges_.end(), lambda);
  std::size_t b = static_cast<std::size_t>(it - edges_.begin());
  b = b == 0 ? 0 : std::min(b - 1, count_.size() - 1);
  count_[b] += 1.0;
  money_[b] += money;
  unsaved_[b] += money * (1.0 - lambda);
  lambda_[b] += lambda;
  hist_[b].add(money);
}

void LambdaConditional::merge(const LambdaConditional& other) {
  if (other.edges_ != edges_) throw ContractViolation("cannot merge lambda-conditional data with different edges");
  for (std::size_t b = 0; b < count_.size(); ++b) {
    count_[b] += other.count_[b];
    money_[b] += other.money_[b];
    unsaved_[b] += other.unsaved_[b];
    lambda_[b] += other.lambda_[b];
    hist_[b].merge(other.hist_[b]);
  }
}

std::vector<std::optional<LambdaBinSummary>> conditional_money_by_lambda(const LambdaConditional& acc) {
  std::vector<std::optional<LambdaBinSummary>> out(acc.bins());
  for (std::size_t b = 0; b < acc.bins(); ++b) {
    const double n = acc.count(b);
    if (!(n > 0.0)) continue;
    LambdaBinSummary s;
    s.lambda_lo = acc.lambda_edges()[b];
    s.lambda_hi = acc.lambda_edges()[b + 1];
    s.count = n;
    s.mean_lambda = acc.lambda_sum(b) / n;
    s.mean_money = acc.money_sum(b) / n;
    s.unsaved_product = acc.unsaved_money_sum(b) / n;

    const Histogram& h = acc.money_histogram(b);
    const auto& edges = h.binning().edges();
    double best = -1.0;
    for (std::size_t i = 0; i < h.counts().size(); ++i) {
      if (h.binning().has_underflow() && i == 0) continue;
      const double dens = static_cast<double>(h.counts()[i]) / (edges[i + 1] - edges[i]);
      if (dens > best) {
        best = dens;
        s.most_probable = h.binning().scale() == BinScale::logarithmic ? std::sqrt(edges[i] * edges[i + 1])
                                                                        : 0.5 * (edges[i] + edges[i + 1]);
      }
    }
    out[b] = s;
  }
  return out;
}

std::vector<std::optional<LambdaBinSummary>> conditional_money_by_lambda(std::span<const double> money,
                                                                         std::span<const double> lambda,
                                                                         std::vector<double> lambda_edges,
                                                                         const Binning& money_binning) {
  if (money.size() != lambda.size()) throw ContractViolation("money and lambda must have one entry per agent");
  LambdaConditional acc(std::move(lambda_edges), money_binning);
  for (std::size_t i = 0; i < money.size(); ++i) acc.add(lambda[i], money[i]);
  return conditional_money_by_lambda(acc);
}

DistributionEstimate pairwise_difference_distribution(std::span<const double> money, const Binning& binning) {
  DistributionEstimate out{binning, std::vector<double>(binning.bins(), 0.0)};
  for (double a : money) {
    for (double b : money) out.counts[binning.index(std::abs(a - b))] += 1.0;
  }
  return out;
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractViolation("least squares needs paired data");
  if (x.size() < 3) throw AnalysisError("least squares needs at least three points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw AnalysisError("least squares needs at least two distinct abscissae");
  LineFit fit;
  fit.points = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = std::max(0.0, syy - fit.slope * sxy);
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.slope_stderr = std::sqrt(ss_res / (n - 2.0) / sxx);
  return fit;
}

std::optional<std::size_t> relaxation_time(std::span<const double> series, double target, double tolerance) {
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (std::abs(series[t] - target) <= tolerance * std::abs(target)) return t;
  }
  return std::nullopt;
}

}  // namespace kinex
