#pragma once

#include <stdexcept>
#include <string>

namespace kinex {

/// A caller broke a documented precondition (bad epsilon, lambda >= 1, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent experiment description. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The dynamics went wrong at run time (conservation breach, livelock, no burn-in).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A statistical procedure could not produce an answer from the data it was given.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kinex
