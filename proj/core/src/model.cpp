#include "cart/model.hpp"

#include <cmath>

namespace cart {

namespace {

void require_finite_inputs(const ModelParams& p, const State& s, double tau) {
  const double probe[] = {p.r,     p.b,  p.gamma,   p.phi, p.rho,
                          p.theta, p.alpha, p.epsilon, p.mu,  s.x1,
                          s.x2,    s.x3, tau};
  for (double v : probe) {
    if (!std::isfinite(v)) {
      throw InvalidInputError("vector_field: non-finite input");
    }
  }
}

}  // namespace

Vec3 vector_field(const ModelParams& p, const State& s, double tau,
                  bool tau_drains_pool) {
  require_finite_inputs(p, s, tau);

  const double predation = p.gamma * s.x2 * s.x1;
  const double activation = p.theta * s.x3 * s.x1;
  const double inhibition = p.alpha * s.x2 * s.x1;

  const double d1 = p.r * s.x1 * (1.0 - p.b * s.x1) - predation;
  const double d2 = (p.phi - p.rho) * s.x2 + activation - inhibition + tau;
  double d3 = -p.mu * s.x3 - activation + p.epsilon * s.x2;
  if (tau_drains_pool) d3 -= tau;

  return {d1, d2, d3};
}

Mat3 jacobian(const ModelParams& p, const State& s) {
  require_finite_inputs(p, s, 0.0);

  Mat3 j;
  j(0, 0) = p.r * (1.0 - 2.0 * p.b * s.x1) - p.gamma * s.x2;
  j(0, 1) = -p.gamma * s.x1;
  j(0, 2) = 0.0;

  j(1, 0) = p.theta * s.x3 - p.alpha * s.x2;
  j(1, 1) = (p.phi - p.rho) - p.alpha * s.x1;
  j(1, 2) = p.theta * s.x1;

  j(2, 0) = -p.theta * s.x3;
  j(2, 1) = p.epsilon;
  j(2, 2) = -p.mu - p.theta * s.x1;
  return j;
}

}  // namespace cart
