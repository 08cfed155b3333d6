#pragma once

#include <cstdint>
#include <optional>

#include "cart/types.hpp"

namespace cart {

// Tumor-clearing feedback design. The virtual control
//
//   kappa(x1) = (r/gamma) (a - b x1),  a > 1
//
// turns the tumor equation into dx1 = r(1-a) x1 once x2 tracks kappa, and the
// constant activation flux
//
//   tau = -(phi - rho) (r/gamma) a = (rho - phi) (r/gamma) a
//
// holds the active pool on that manifold. Stability of the tracking error
// z2 = x2 - kappa(x1) is certified by V = (xi x1^2 + z2^2)/2 whose derivative
// is negative definite near the origin whenever the cross-term gain k
// satisfies k < sqrt(xi * ell * m) with ell = |r(1-a)| and m = |phi - rho|.
struct BacksteppingDesign {
  double a = 0.0;    // closed-loop gain, > 1
  double tau = 0.0;  // constant activation flux implied by a
  double xi = 1.0;   // Lyapunov weight on the tumor coordinate
  double k = 0.0;    // bound on the coupling term over the certified region

  // cached quantities derived from the parameters
  double ell_hat = 0.0;  // |r(1-a)|
  double m_hat = 0.0;    // |phi - rho|
  double b_hat = 0.0;    // r b / gamma
};

// Builds a design for gain a with certificate pair (k, xi). Requires a > 1,
// phi < rho, gamma > 0, xi > 0 and k >= 0.
BacksteppingDesign make_design(const ModelParams& p, double a, double k,
                               double xi);

// Virtual control kappa(x1) = (r/gamma)(a - b x1).
double kappa(const ModelParams& p, double a, double x1);

// Tracking error z2 = x2 - kappa(x1).
double z2(const ModelParams& p, double a, const State& s);

// Constant activation flux implied by gain a; positive for phi < rho, a > 0.
double tau_from_a(const ModelParams& p, double a);

// Any constant tau above (rho - phi) r / gamma stabilizes the tumor-free
// rest point; tau_from_a(p, a) equals this bound times a.
double tau_lower_bound(const ModelParams& p);

// V = (xi x1^2 + z2^2) / 2.
double lyapunov(double xi, double x1, double z2);

// Coefficient of the x1*z2 cross term in dV/dt, with u standing in for the
// non-active population x3:
//   b_hat r(1-a) - b_hat gamma z2 + theta u - b_hat (phi-rho)
//     - alpha z2 + alpha (r/gamma)(b x1 - a) - gamma xi x1
// Affine in each of x1, z2, u, so its extrema over a box sit on the corners.
double coupling_bracket(const ModelParams& p, const BacksteppingDesign& d,
                        double x1, double z2, double u);

// Closed-form dV/dt along the controlled dynamics:
//   xi r(1-a) x1^2 + (phi-rho) z2^2
//     + ((phi-rho)(r/gamma) a + tau) z2 + bracket * x1 z2.
// When d.tau comes from tau_from_a the lone z2 coefficient cancels exactly.
double lyapunov_rate(const ModelParams& p, const BacksteppingDesign& d,
                     const State& s, double u);

// Strict negative-definiteness test k < sqrt(xi * ell * m) of the quadratic
// form bounding dV/dt. Boundary equality fails.
bool pd_condition(const BacksteppingDesign& d);

// Smallest-comfortable Lyapunov weight for a given coupling bound:
// xi = safety * k^2 / (ell * m), so pd_condition holds with margin
// sqrt(safety); k = 0 falls back to xi = 1.
double select_xi(const ModelParams& p, double a, double k,
                 double safety = 4.0);

// Box in the (x1, z2) plane over which the coupling bound is certified.
struct CertifiedRegion {
  double x1_lo = 0.0, x1_hi = 0.0;
  double z2_lo = 0.0, z2_hi = 0.0;

  bool operator==(const CertifiedRegion&) const = default;
};

struct KEstimateOptions {
  int n_x1 = 201;
  int n_z2 = 201;
  int n_u = 11;
  double margin = 1.1;  // 10% safety on the supremum
  // Optional deterministic jitter of interior grid points (box corners stay
  // exact, so the supremum of the affine bracket is never lost).
  std::optional<std::uint64_t> jitter_seed;
};

// Half the supremum of |coupling_bracket| over region x [0, u_bound],
// widened by `margin`. Dense grid evaluation; a zero-size region evaluates
// the single point.
double estimate_k(const ModelParams& p, const BacksteppingDesign& d,
                  const CertifiedRegion& region, double u_bound,
                  const KEstimateOptions& opts = {});

}  // namespace cart
