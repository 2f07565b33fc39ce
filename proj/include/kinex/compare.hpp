#pragma once

// Checks a finished run directory against a theoretical prediction.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "kinex/fits.hpp"
#include "kinex/sim_config.hpp"

namespace kinex {

/// A run directory as written by the simulate command.
struct RunDirectory {
  SimConfig config;
  nlohmann::json summary;
  std::filesystem::path path;

  static RunDirectory load(const std::filesystem::path& dir);
  /// `stem` is "money", "commodity", "wealth" or "difference"; either format.
  DistributionEstimate histogram(const std::string& stem) const;
  std::vector<DistributionEstimate> groups(const std::string& stem) const;
  bool has(const std::string& stem) const;
};

/// Fit of one kind ("pareto", "gamma", "exponential", "exponential_tail") to a
/// histogram and, when available, its jackknife groups.
FitResult fit_histogram(const std::string& kind, const DistributionEstimate& pooled,
                        const std::vector<DistributionEstimate>& groups, const TailWindowPolicy& policy = {});

/// Theory names: "gibbs", "gamma" or "gamma:<lambda>", "pareto". A theory that
/// does not apply to the run's model throws ConfigError. The report lists, per
/// quantity, the simulated value, the prediction, the tolerance and pass/fail.
nlohmann::json compare_with_theory(const RunDirectory& run, const std::string& theory);

}  // namespace kinex
