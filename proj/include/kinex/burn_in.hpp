#pragma once

// Burn-in detection from a stream of windowed money histograms.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace kinex {

/// L1 distance between two histograms after normalizing each to unit mass.
double l1_distance(std::span<const double> a, std::span<const double> b);

/// Feed one histogram per window. Once `consecutive` successive pairs of
/// windows are closer than `threshold`, push() returns the step at which that
/// quiet run began (window index times window length).
class BurnInDetector {
 public:
  BurnInDetector(double threshold, int consecutive, std::int64_t window_steps);

  std::optional<std::int64_t> push(std::vector<double> window_histogram);

  std::int64_t windows_seen() const noexcept { return windows_; }
  /// Distances between successive windows seen so far (for diagnostics).
  const std::vector<double>& distances() const noexcept { return distances_; }

 private:
  double threshold_;
  int consecutive_;
  std::int64_t window_steps_;
  std::int64_t windows_ = 0;
  int run_ = 0;
  std::int64_t run_start_ = 0;
  std::vector<double> previous_;
  std::vector<double> distances_;
};

}  // namespace kinex
