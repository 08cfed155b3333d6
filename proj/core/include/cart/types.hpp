#pragma once

#include <string_view>

#include "cart/errors.hpp"

namespace cart {

// Rate constants of the three-population model. Populations are cell counts,
// time is measured in days, so every field carries units of /day or
// /(cell day).
struct ModelParams {
  double r = 0.0;        // tumor growth rate
  double b = 0.0;        // inverse tumor carrying capacity
  double gamma = 0.0;    // tumor kill rate per active CAR T cell
  double phi = 0.0;      // active CAR T proliferation rate
  double rho = 0.0;      // active CAR T loss rate (death + exhaustion)
  double theta = 0.0;    // antigen-driven activation of non-active cells
  double alpha = 0.0;    // tumor-induced inhibition of active cells
  double epsilon = 0.0;  // active -> non-active conversion rate
  double mu = 0.0;       // non-active CAR T death rate

  bool operator==(const ModelParams&) const = default;
};

// Throws InvalidInputError naming the offending field ("<prefix>.gamma: ...")
// unless all rates are finite and non-negative with b > 0 and gamma > 0.
void validate(const ModelParams& p, std::string_view prefix = "params");

// Population state: x1 tumor, x2 active CAR T, x3 non-active CAR T.
struct State {
  double x1 = 0.0;
  double x2 = 0.0;
  double x3 = 0.0;

  bool operator==(const State&) const = default;
};

bool all_finite(const State& s);

// Throws InvalidInputError unless every component is finite and >= 0.
void validate(const State& s, std::string_view prefix = "state");

// Activation-flux policy applied while integrating.
struct ControlLaw {
  enum class Kind { Off, ConstantTau, Backstepping };

  Kind kind = Kind::Off;
  double tau = 0.0;            // ConstantTau: cells/day fed into x2
  double gain = 0.0;           // Backstepping: closed-loop gain a, must be > 1
  bool tau_drains_pool = true; // flux drains x3 while feeding x2
  // Certificate weight used to log V along Backstepping runs; < 0 disables
  // the log (z2 is still recorded).
  double lyapunov_xi = -1.0;

  static ControlLaw off();
  static ControlLaw constant_tau(double tau, bool drains_pool = true);
  static ControlLaw backstepping(double a, bool drains_pool = true);

  bool operator==(const ControlLaw&) const = default;
};

void validate(const ControlLaw& law, std::string_view prefix = "law");

}  // namespace cart
