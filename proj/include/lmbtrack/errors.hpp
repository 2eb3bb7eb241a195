#pragma once

#include <stdexcept>
#include <string>

namespace lmbtrack {

/// Malformed configuration or input document (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Structurally invalid scenario, e.g. a disconnected route (CLI exit code 3).
struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure that survived regularization (singular or degenerate
/// covariance, all-zero mixture weight).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lmbtrack
