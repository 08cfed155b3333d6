#pragma once

#include "cart/linalg.hpp"
#include "cart/types.hpp"

namespace cart {

// Time derivative (dx1, dx2, dx3) of the three-population model:
//
//   dx1 = r x1 (1 - b x1) - gamma x2 x1
//   dx2 = (phi - rho) x2 + theta x3 x1 - alpha x2 x1 + tau
//   dx3 = -mu x3 - theta x3 x1 + epsilon x2 - [tau if tau_drains_pool]
//
// tau is the activation flux moving cells into the active pool; with
// tau_drains_pool it is drawn from the non-active pool, otherwise it is an
// external supply. Throws InvalidInputError on any non-finite input. Accepts
// small negative populations so that integrators without the non-negativity
// floor can still evaluate the field.
Vec3 vector_field(const ModelParams& p, const State& s, double tau = 0.0,
                  bool tau_drains_pool = true);

// Jacobian of the vector field with respect to (x1, x2, x3). A constant tau
// does not appear: the flux is additive, so the controlled and uncontrolled
// systems share this matrix.
//
//   [ r(1 - 2 b x1) - gamma x2    -gamma x1          0          ]
//   [ theta x3 - alpha x2         (phi-rho)-alpha x1 theta x1   ]
//   [ -theta x3                   epsilon            -mu-theta x1 ]
Mat3 jacobian(const ModelParams& p, const State& s);

}  // namespace cart
