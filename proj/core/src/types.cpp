#include "cart/types.hpp"

#include <cmath>

namespace cart {

namespace {

void require_finite_nonneg(double v, std::string_view prefix,
                           const char* name) {
  if (!std::isfinite(v)) {
    throw InvalidInputError(std::string(prefix) + "." + name +
                            ": must be finite");
  }
  if (v < 0.0) {
    throw InvalidInputError(std::string(prefix) + "." + name +
                            ": must be >= 0");
  }
}

void require_positive(double v, std::string_view prefix, const char* name) {
  require_finite_nonneg(v, prefix, name);
  if (v == 0.0) {
    throw InvalidInputError(std::string(prefix) + "." + name +
                            ": must be > 0");
  }
}

}  // namespace

void validate(const ModelParams& p, std::string_view prefix) {
  require_finite_nonneg(p.r, prefix, "r");
  require_positive(p.b, prefix, "b");
  require_positive(p.gamma, prefix, "gamma");
  require_finite_nonneg(p.phi, prefix, "phi");
  require_finite_nonneg(p.rho, prefix, "rho");
  require_finite_nonneg(p.theta, prefix, "theta");
  require_finite_nonneg(p.alpha, prefix, "alpha");
  require_finite_nonneg(p.epsilon, prefix, "epsilon");
  require_finite_nonneg(p.mu, prefix, "mu");
}

bool all_finite(const State& s) {
  return std::isfinite(s.x1) && std::isfinite(s.x2) && std::isfinite(s.x3);
}

void validate(const State& s, std::string_view prefix) {
  require_finite_nonneg(s.x1, prefix, "x1");
  require_finite_nonneg(s.x2, prefix, "x2");
  require_finite_nonneg(s.x3, prefix, "x3");
}

ControlLaw ControlLaw::off() { return ControlLaw{}; }

ControlLaw ControlLaw::constant_tau(double tau, bool drains_pool) {
  ControlLaw law;
  law.kind = Kind::ConstantTau;
  law.tau = tau;
  law.tau_drains_pool = drains_pool;
  return law;
}

ControlLaw ControlLaw::backstepping(double a, bool drains_pool) {
  ControlLaw law;
  law.kind = Kind::Backstepping;
  law.gain = a;
  law.tau_drains_pool = drains_pool;
  return law;
}

void validate(const ControlLaw& law, std::string_view prefix) {
  switch (law.kind) {
    case ControlLaw::Kind::Off:
      break;
    case ControlLaw::Kind::ConstantTau:
      if (!std::isfinite(law.tau) || law.tau < 0.0) {
        throw InvalidInputError(std::string(prefix) +
                                ".tau: must be finite and >= 0");
      }
      break;
    case ControlLaw::Kind::Backstepping:
      if (!std::isfinite(law.gain) || law.gain <= 1.0) {
        throw InvalidInputError(std::string(prefix) +
                                ".a: backstepping requires a > 1");
      }
      break;
  }
}

}  // namespace cart
