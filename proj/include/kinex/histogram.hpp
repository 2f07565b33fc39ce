#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace kinex {

enum class BinScale { linear, logarithmic };

/// Fixed bin edges. Logarithmic binnings start with an underflow bin [0, lo)
/// that collects zeros and values too small to resolve.
class Binning {
 public:
  static Binning linear(double lo, double hi, std::size_t bins);
  /// Underflow bin [0, lo) followed by `bins_per_decade` log bins per decade up to >= hi.
  static Binning logarithmic(double lo, double hi, int bins_per_decade);
  /// Arbitrary strictly increasing edges (e.g. read back from CSV).
  static Binning from_edges(std::vector<double> edges, BinScale scale);

  std::size_t bins() const noexcept { return edges_.size() - 1; }
  const std::vector<double>& edges() const noexcept { return edges_; }
  BinScale scale() const noexcept { return scale_; }
  bool has_underflow() const noexcept { return underflow_; }

  /// Bin holding x. Values at or beyond the last edge go to the last bin,
  /// values below the first edge to the first.
  std::size_t index(double x) const noexcept;

  friend bool operator==(const Binning&, const Binning&) = default;

 private:
  Binning(std::vector<double> edges, BinScale scale, bool underflow, double lo, double step);

  std::vector<double> edges_;
  BinScale scale_ = BinScale::linear;
  bool underflow_ = false;
  double lo_ = 0.0;    // first regular edge
  double step_ = 1.0;  // linear: bin width; log: bins per unit log10
};

/// Binned density estimate. `counts` are real so merged or rescaled
/// histograms keep the same type; engine output always holds whole numbers.
struct DistributionEstimate {
  Binning binning = Binning::linear(0.0, 1.0, 1);
  std::vector<double> counts;

  std::size_t bins() const noexcept { return counts.size(); }
  double left(std::size_t i) const { return binning.edges()[i]; }
  double right(std::size_t i) const { return binning.edges()[i + 1]; }
  double width(std::size_t i) const { return right(i) - left(i); }
  double total() const;
  double density(std::size_t i) const;
  /// Right edge of the last non-empty bin (0 for an empty estimate).
  double max_support() const;
  /// Smallest left edge x with fraction of mass at or above x >= `fraction`.
  double upper_quantile_edge(double fraction) const;

  static DistributionEstimate from_samples(std::span<const double> samples, const Binning& binning);
};

/// Integer-count accumulator used by the engine; merging is exact addition.
class Histogram {
 public:
  explicit Histogram(Binning binning) : binning_(std::move(binning)), counts_(binning_.bins(), 0) {}

  void add(double x) { ++counts_[binning_.index(x)]; }
  void merge(const Histogram& other);
  std::uint64_t total() const;

  const Binning& binning() const noexcept { return binning_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  DistributionEstimate estimate() const;

  friend bool operator==(const Histogram&, const Histogram&) = default;

 private:
  Binning binning_;
  std::vector<std::uint64_t> counts_;
};

}  // namespace kinex
