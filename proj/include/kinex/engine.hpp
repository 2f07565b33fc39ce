#pragma once

// Monte Carlo driver: pair selection, burn-in, sampling, and reproducible
// ensemble averaging.
//
// Every ensemble member e draws from its own RNG streams derived from
// (seed, e, purpose), where purpose separates the trade dynamics, the quenched
// lambda realization, the initial condition and measurement-only draws.
// Members are merged in index order, so results do not depend on the number
// of worker threads.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "kinex/histogram.hpp"
#include "kinex/kernels.hpp"
#include "kinex/random.hpp"
#include "kinex/sim_config.hpp"
#include "kinex/stats.hpp"

namespace kinex {

/// Two distinct agents; every unordered pair is equally likely.
inline std::pair<std::size_t, std::size_t> select_pair(std::size_t n, RngStream& rng) {
  const auto i = static_cast<std::size_t>(rng.below(n));
  auto j = static_cast<std::size_t>(rng.below(n - 1));
  if (j >= i) ++j;
  return {i, j};
}

struct TradeCounts {
  std::uint64_t attempted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t max_consecutive_rejections = 0;

  void merge(const TradeCounts& o);
  friend bool operator==(const TradeCounts&, const TradeCounts&) = default;
};

/// One ensemble member: the agents and their dynamics.
class Market {
 public:
  Market(const SimConfig& config, std::uint64_t ensemble_index);

  /// One Monte Carlo step: N exchange attempts (rejected commodity trades count).
  void step();

  std::span<const AgentState> agents() const noexcept { return agents_; }
  /// Quenched propensity of each agent; for annealed specs, its lower bound.
  double quenched_lambda(std::size_t i) const { return agents_[i].lambda; }
  const TradeCounts& trades() const noexcept { return trades_; }
  double money_sum() const;
  double commodity_sum() const;
  RngStream& measurement_rng() noexcept { return measurement_; }

 private:
  template <Model M, bool Annealed = false>
  void steps();
  template <Model M, bool Annealed>
  void trade(AgentState& a, AgentState& b);

  const SimConfig& config_;
  std::vector<AgentState> agents_;
  RngStream dynamics_;
  RngStream measurement_;
  bool annealed_ = false;
  double uniform_lambda_ = 0.0;
  std::uint64_t consecutive_rejections_ = 0;
  std::uint64_t livelock_limit_ = 0;
  TradeCounts trades_;
};

/// Everything accumulated at sample ticks, for one jackknife group or pooled.
struct Accumulators {
  Histogram money;
  std::optional<Histogram> commodity;
  std::optional<Histogram> wealth;
  std::optional<Histogram> difference;
  PowerSums money_sums;
  std::optional<LambdaConditional> by_lambda;

  explicit Accumulators(const SimConfig& config);
  void merge(const Accumulators& other);
  friend bool operator==(const Accumulators&, const Accumulators&) = default;
};

struct ConservationAudit {
  std::uint64_t checks = 0;
  double max_money_deviation = 0.0;      ///< relative
  double max_commodity_deviation = 0.0;  ///< relative
  friend bool operator==(const ConservationAudit&, const ConservationAudit&) = default;
};

struct BurnInReport {
  bool automatic = false;
  std::vector<std::int64_t> detected;   ///< per ensemble (fixed mode: the configured value)
  std::vector<std::int64_t> performed;  ///< steps actually run before sampling
  friend bool operator==(const BurnInReport&, const BurnInReport&) = default;
};

/// Money of the agent with the largest lambda, averaged over ensembles.
struct RichestTrack {
  std::int64_t stride = 1;
  std::vector<double> mean_money;        ///< entry k: after k * stride MC steps (k = 0 is the start)
  double mean_lambda_max = 0.0;
  std::vector<double> ensemble_means;    ///< per ensemble, over the sampling phase
  double long_run_mean = 0.0;            ///< mean of ensemble_means
  std::optional<std::int64_t> relaxation_steps;  ///< first entry within 10% of long_run_mean
  friend bool operator==(const RichestTrack&, const RichestTrack&) = default;
};

struct CondensationTrack {
  double threshold = 0.99;
  std::vector<std::int64_t> first_passage;  ///< MC step at which max share >= threshold; -1 if never
  std::vector<double> final_max_share;
  friend bool operator==(const CondensationTrack&, const CondensationTrack&) = default;
};

struct SimResult {
  SimConfig config;
  Accumulators pooled;
  std::vector<Accumulators> groups;
  std::uint64_t sample_ticks = 0;  ///< per ensemble
  std::optional<RichestTrack> richest;
  std::optional<CondensationTrack> condensation;
  ConservationAudit audit;
  TradeCounts trades;
  BurnInReport burn_in;

  friend bool operator==(const SimResult&, const SimResult&) = default;
};

struct RunOptions {
  unsigned threads = 1;
};

Binning money_binning(const SimConfig& config);
Binning commodity_binning(const SimConfig& config);
Binning wealth_binning(const SimConfig& config);

/// Relative tolerance of the conservation audit.
inline constexpr double kConservationTolerance = 1e-9;

/// Throws SimulationError on a conservation breach, commodity livelock, or a
/// burn-in that never settles within mc_steps.
SimResult run(const SimConfig& config, const RunOptions& options = {});

}  // namespace kinex
