#include "kinex/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kinex/error.hpp"

namespace kinex {

Binning::Binning(std::vector<double> edges, BinScale scale, bool underflow, double lo, double step)
    : edges_(std::move(edges)), scale_(scale), underflow_(underflow), lo_(lo), step_(step) {}

Binning Binning::linear(double lo, double hi, std::size_t bins) {
  if (!(hi > lo) || bins == 0) throw ContractViolation("linear binning needs hi > lo and at least one bin");
  std::vector<double> edges(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t k = 0; k <= bins; ++k) edges[k] = lo + width * static_cast<double>(k);
  edges.back() = hi;
  return Binning(std::move(edges), BinScale::linear, false, lo, width);
}

Binning Binning::logarithmic(double lo, double hi, int bins_per_decade) {
  if (!(lo > 0.0) || !(hi > lo) || bins_per_decade <= 0) {
    throw ContractViolation("log binning needs 0 < lo < hi and bins_per_decade > 0");
  }
  const auto regular = static_cast<std::size_t>(std::ceil(std::log10(hi / lo) * bins_per_decade - 1e-9));
  std::vector<double> edges;
  edges.reserve(regular + 2);
  edges.push_back(0.0);
  for (std::size_t k = 0; k <= regular; ++k) {
    edges.push_back(lo * std::pow(10.0, static_cast<double>(k) / bins_per_decade));
  }
  return Binning(std::move(edges), BinScale::logarithmic, true, lo, static_cast<double>(bins_per_decade));
}

Binning Binning::from_edges(std::vector<double> edges, BinScale scale) {
  if (edges.size() < 2) throw ContractViolation("binning needs at least two edges");
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k] > edges[k - 1])) throw ContractViolation("bin edges must be strictly increasing");
  }
  const bool underflow = scale == BinScale::logarithmic && edges.front() == 0.0;
  const double lo = underflow ? edges[1] : edges.front();
  double step = 0.0;
  if (scale == BinScale::linear) {
    step = (edges.back() - edges.front()) / static_cast<double>(edges.size() - 1);
  } else if (lo > 0.0 && edges.back() > lo) {
    const std::size_t regular = edges.size() - (underflow ? 2 : 1);
    step = static_cast<double>(regular) / std::log10(edges.back() / lo);
  }
  return Binning(std::move(edges), scale, underflow, lo, step);
}

std::size_t Binning::index(double x) const noexcept {
  const std::size_t last = edges_.size() - 2;
  if (!(x >= edges_.front())) return 0;
  if (x >= edges_.back()) return last;
  std::size_t k;
  if (scale_ == BinScale::linear) {
    k = static_cast<std::size_t>(std::max(0.0, std::floor((x - lo_) / step_)));
  } else if (x < lo_) {
    return 0;
  } else {
    const double guess = std::floor(std::log10(x / lo_) * step_);
    k = static_cast<std::size_t>(std::max(0.0, guess)) + (underflow_ ? 1 : 0);
  }
  k = std::min(k, last);
  // The guess can be off by one near an edge; settle against the stored edges.
  while (k > 0 && x < edges_[k]) --k;
  while (k < last && x >= edges_[k + 1]) ++k;
  return k;
}

double DistributionEstimate::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

double DistributionEstimate::density(std::size_t i) const {
  const double n = total();
  return n > 0.0 ? counts[i] / (n * width(i)) : 0.0;
}

double DistributionEstimate::max_support() const {
  for (std::size_t i = counts.size(); i-- > 0;) {
    if (counts[i] > 0.0) return right(i);
  }
  return 0.0;
}

double DistributionEstimate::upper_quantile_edge(double fraction) const {
  const double n = total();
  if (!(n > 0.0)) throw AnalysisError("empty distribution has no quantiles");
  double above = 0.0;
  for (std::size_t i = counts.size(); i-- > 0;) {
    above += counts[i];
    if (above >= fraction * n) return left(i);
  }
  return left(0);
}

DistributionEstimate DistributionEstimate::from_samples(std::span<const double> samples, const Binning& binning) {
  DistributionEstimate out{binning, std::vector<double>(binning.bins(), 0.0)};
  for (double x : samples) out.counts[binning.index(x)] += 1.0;
  return out;
}

void Histogram::merge(const Histogram& other) {
  if (!(other.binning_ == binning_)) throw ContractViolation("cannot merge histograms with different binnings");
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
}

std::uint64_t Histogram::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

DistributionEstimate Histogram::estimate() const {
  DistributionEstimate out{binning_, std::vector<double>(counts_.size())};
  std::transform(counts_.begin(), counts_.end(), out.counts.begin(),
                 [](std::uint64_t c) { return static_cast<double>(c); });
  return out;
}

}  // namespace kinex
