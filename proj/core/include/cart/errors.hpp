#pragma once

#include <stdexcept>
#include <string>

namespace cart {

// Non-finite or structurally malformed input (names the offending field).
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A parameter combination removes the quantity being computed, e.g. b = 0
// leaves no finite carrying capacity.
struct DegenerateParameterError : std::domain_error {
  using std::domain_error::domain_error;
};

// A documented precondition does not hold, e.g. phi >= rho on the design path.
struct PreconditionError : std::domain_error {
  using std::domain_error::domain_error;
};

// Base for failures inside the time stepper; carries the failure time.
struct IntegrationError : std::runtime_error {
  double time;
  IntegrationError(const std::string& what, double t)
      : std::runtime_error(what), time(t) {}
};

// Adaptive step size collapsed below min_step before reaching the horizon.
struct StiffnessError : IntegrationError {
  using IntegrationError::IntegrationError;
};

// A population went more negative than the roundoff floor tolerates.
struct NegativeStateError : IntegrationError {
  using IntegrationError::IntegrationError;
};

}  // namespace cart
