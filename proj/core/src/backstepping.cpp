#include "cart/backstepping.hpp"

#include <cmath>
#include <random>

namespace cart {

namespace {

void require_design_inputs(const ModelParams& p, double a) {
  validate(p);
  if (!std::isfinite(a) || a <= 1.0) {
    throw PreconditionError("a: backstepping requires a > 1");
  }
  if (!(p.phi < p.rho)) {
    throw PreconditionError("params.phi: backstepping requires phi < rho");
  }
}

}  // namespace

double kappa(const ModelParams& p, double a, double x1) {
  return (p.r / p.gamma) * (a - p.b * x1);
}

double z2(const ModelParams& p, double a, const State& s) {
  return s.x2 - kappa(p, a, s.x1);
}

double tau_from_a(const ModelParams& p, double a) {
  require_design_inputs(p, a);
  // Grouped exactly as the lone z2 coefficient in lyapunov_rate, so the two
  // cancel bit-for-bit when the design flux is used.
  return -((p.phi - p.rho) * (p.r / p.gamma) * a);
}

double tau_lower_bound(const ModelParams& p) {
  validate(p);
  if (!(p.phi < p.rho)) {
    throw PreconditionError("params.phi: bound defined for phi < rho");
  }
  return (p.rho - p.phi) * p.r / p.gamma;
}

BacksteppingDesign make_design(const ModelParams& p, double a, double k,
                               double xi) {
  require_design_inputs(p, a);
  if (!std::isfinite(k) || k < 0.0) {
    throw InvalidInputError("k: must be finite and >= 0");
  }
  if (!std::isfinite(xi) || xi <= 0.0) {
    throw InvalidInputError("xi: must be finite and > 0");
  }
  BacksteppingDesign d;
  d.a = a;
  d.tau = tau_from_a(p, a);
  d.k = k;
  d.xi = xi;
  d.ell_hat = std::abs(p.r * (1.0 - a));
  d.m_hat = std::abs(p.phi - p.rho);
  d.b_hat = p.r * p.b / p.gamma;
  return d;
}

double lyapunov(double xi, double x1, double z2) {
  return 0.5 * (xi * x1 * x1 + z2 * z2);
}

double coupling_bracket(const ModelParams& p, const BacksteppingDesign& d,
                        double x1, double z2, double u) {
  return d.b_hat * p.r * (1.0 - d.a) - d.b_hat * p.gamma * z2 +
         p.theta * u - d.b_hat * (p.phi - p.rho) - p.alpha * z2 +
         p.alpha * (p.r / p.gamma) * (p.b * x1 - d.a) - p.gamma * d.xi * x1;
}

double lyapunov_rate(const ModelParams& p, const BacksteppingDesign& d,
                     const State& s, double u) {
  const double zz = z2(p, d.a, s);
  const double lone_z2_coeff = (p.phi - p.rho) * (p.r / p.gamma) * d.a + d.tau;
  return d.xi * p.r * (1.0 - d.a) * s.x1 * s.x1 +
         (p.phi - p.rho) * zz * zz + lone_z2_coeff * zz +
         coupling_bracket(p, d, s.x1, zz, u) * s.x1 * zz;
}

bool pd_condition(const BacksteppingDesign& d) {
  return d.k * d.k < d.xi * d.ell_hat * d.m_hat;
}

double select_xi(const ModelParams& p, double a, double k, double safety) {
  require_design_inputs(p, a);
  if (!std::isfinite(k) || k < 0.0) {
    throw InvalidInputError("k: must be finite and >= 0");
  }
  if (!std::isfinite(safety) || safety <= 1.0) {
    throw InvalidInputError("safety: must be > 1");
  }
  if (k == 0.0) return 1.0;
  const double ell = std::abs(p.r * (1.0 - a));
  const double m = std::abs(p.phi - p.rho);
  if (ell * m == 0.0) {
    throw DegenerateParameterError(
        "params.r: xi selection needs r > 0 and phi != rho");
  }
  return safety * k * k / (ell * m);
}

double estimate_k(const ModelParams& p, const BacksteppingDesign& d,
                  const CertifiedRegion& region, double u_bound,
                  const KEstimateOptions& opts) {
  if (!(region.x1_lo <= region.x1_hi) || !(region.z2_lo <= region.z2_hi)) {
    throw InvalidInputError("region: lo bounds must not exceed hi bounds");
  }
  if (!std::isfinite(u_bound) || u_bound < 0.0) {
    throw InvalidInputError("u_bound: must be finite and >= 0");
  }
  if (opts.n_x1 < 1 || opts.n_z2 < 1 || opts.n_u < 1) {
    throw InvalidInputError("grid: needs at least one point per axis");
  }

  const int nx = (region.x1_hi > region.x1_lo) ? opts.n_x1 : 1;
  const int nz = (region.z2_hi > region.z2_lo) ? opts.n_z2 : 1;
  const int nu = (u_bound > 0.0) ? opts.n_u : 1;

  std::mt19937_64 rng(opts.jitter_seed.value_or(0));
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  const bool jitter = opts.jitter_seed.has_value();

  auto grid_point = [&](double lo, double hi, int i, int n) {
    if (n == 1) return lo;
    const double cell = (hi - lo) / (n - 1);
    double frac = static_cast<double>(i);
    if (jitter && i > 0 && i < n - 1) frac += unit(rng);
    return lo + cell * frac;
  };

  double sup = 0.0;
  for (int i = 0; i < nx; ++i) {
    const double x1 = grid_point(region.x1_lo, region.x1_hi, i, nx);
    for (int j = 0; j < nz; ++j) {
      const double zz = grid_point(region.z2_lo, region.z2_hi, j, nz);
      for (int l = 0; l < nu; ++l) {
        const double u = grid_point(0.0, u_bound, l, nu);
        sup = std::max(sup, std::abs(coupling_bracket(p, d, x1, zz, u)));
      }
    }
  }
  return 0.5 * opts.margin * sup;
}

}  // namespace cart
