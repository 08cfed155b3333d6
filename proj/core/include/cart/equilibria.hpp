#pragma once

#include <string>
#include <vector>

#include "cart/linalg.hpp"
#include "cart/types.hpp"

namespace cart {

enum class EquilibriumKind { Extinction, CarryingCapacity, Interior, Controlled };
enum class Stability { AsymptoticallyStable, Unstable, Marginal };

inline constexpr double kDefaultEigTol = 1e-9;

struct EquilibriumReport {
  EquilibriumKind kind = EquilibriumKind::Extinction;
  State point;
  bool admissible = false;  // all components non-negative and finite
  Eigenvalues eigenvalues{};
  Stability stability = Stability::Marginal;
};

const char* to_string(EquilibriumKind k);
const char* to_string(Stability s);

// AsymptoticallyStable if every eigenvalue real part < -tol, Unstable if any
// real part > tol, Marginal otherwise.
Stability classify(const Eigenvalues& eig, double tol_eig = kDefaultEigTol);

// The two tumor-only equilibria: extinction (0,0,0) and carrying capacity
// (1/b,0,0). Requires b > 0 (DegenerateParameterError otherwise).
std::array<EquilibriumReport, 2> trivial_equilibria(
    const ModelParams& p, double tol_eig = kDefaultEigTol);

struct InteriorEquilibria {
  std::vector<EquilibriumReport> reports;  // ordered by ascending x1
  bool degenerate = false;                 // quadratic collapsed entirely
  std::string note;                        // human-readable degeneracy note
};

// Coexistence candidates with x1 != 0: roots x1* of
//   -alpha theta x1^2 + [(phi-rho) theta - alpha mu + epsilon theta] x1
//     + (phi-rho) mu = 0
// with x2* = r(1 - b x1*)/gamma and x3* = epsilon x2*/(mu + theta x1*).
// alpha*theta = 0 degrades the quadratic to a linear equation; if the linear
// coefficient also vanishes the result is empty with `degenerate` set.
// Inadmissible candidates (negative components) are returned flagged, not
// filtered. Requires gamma > 0.
InteriorEquilibria interior_equilibria(const ModelParams& p,
                                       double tol_eig = kDefaultEigTol);

// Tumor-free rest point (0, x2b, x3b) of the controlled system with constant
// activation flux tau drawn from the non-active pool:
//   x2b = tau / (rho - phi),   x3b = (epsilon x2b - tau) / mu.
// Requires phi < rho (PreconditionError) and mu > 0
// (DegenerateParameterError). x3b < 0 is reported flagged inadmissible.
EquilibriumReport controlled_equilibrium(const ModelParams& p, double tau,
                                         double tol_eig = kDefaultEigTol);

struct EquilibriaSummary {
  std::vector<EquilibriumReport> reports;
  bool degenerate_interior = false;
  std::string note;
  // Carrying capacity and at least one admissible interior point are both
  // asymptotically stable.
  bool bistable = false;
};

// Trivial plus interior equilibria of the uncontrolled system in one report.
EquilibriaSummary all_equilibria(const ModelParams& p,
                                 double tol_eig = kDefaultEigTol);

}  // namespace cart
