#include "kinex/burn_in.hpp"

#include <cmath>
#include <numeric>

#include "kinex/error.hpp"

namespace kinex {

double l1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("L1 distance of histograms with different binnings");
  const double sa = std::accumulate(a.begin(), a.end(), 0.0);
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (!(sa > 0.0) || !(sb > 0.0)) throw ContractViolation("L1 distance of an empty histogram");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] / sa - b[i] / sb);
  return d;
}

BurnInDetector::BurnInDetector(double threshold, int consecutive, std::int64_t window_steps)
    : threshold_(threshold), consecutive_(consecutive), window_steps_(window_steps) {
  if (!(threshold > 0.0) || consecutive < 1 || window_steps < 1) {
    throw ContractViolation("burn-in detector needs threshold > 0, consecutive >= 1, window_steps >= 1");
  }
}

std::optional<std::int64_t> BurnInDetector::push(std::vector<double> window_histogram) {
  const std::int64_t index = windows_++;
  if (!previous_.empty()) {
    const double d = l1_distance(previous_, window_histogram);
    distances_.push_back(d);
    if (d < threshold_) {
      if (run_ == 0) run_start_ = index - 1;
      ++run_;
    } else {
      run_ = 0;
    }
  }
  previous_ = std::move(window_histogram);
  if (run_ >= consecutive_) return run_start_ * window_steps_;
  return std::nullopt;
}

}  // namespace kinex
