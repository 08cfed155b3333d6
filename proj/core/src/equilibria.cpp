#include "cart/equilibria.hpp"

#include <algorithm>
#include <cmath>

#include "cart/model.hpp"

namespace cart {

const char* to_string(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::Extinction: return "extinction";
    case EquilibriumKind::CarryingCapacity: return "carrying_capacity";
    case EquilibriumKind::Interior: return "interior";
    case EquilibriumKind::Controlled: return "controlled";
  }
  return "?";
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::AsymptoticallyStable: return "asymptotically_stable";
    case Stability::Unstable: return "unstable";
    case Stability::Marginal: return "marginal";
  }
  return "?";
}

Stability classify(const Eigenvalues& eig, double tol_eig) {
  const double worst = max_real_part(eig);
  if (worst < -tol_eig) return Stability::AsymptoticallyStable;
  if (worst > tol_eig) return Stability::Unstable;
  return Stability::Marginal;
}

namespace {

EquilibriumReport report_for(const ModelParams& p, EquilibriumKind kind,
                             const State& point, double tol_eig) {
  EquilibriumReport rep;
  rep.kind = kind;
  rep.point = point;
  rep.admissible = all_finite(point) && point.x1 >= 0.0 && point.x2 >= 0.0 &&
                   point.x3 >= 0.0;
  rep.eigenvalues = eigenvalues_3x3(jacobian(p, point));
  rep.stability = classify(rep.eigenvalues, tol_eig);
  return rep;
}

}  // namespace

std::array<EquilibriumReport, 2> trivial_equilibria(const ModelParams& p,
                                                    double tol_eig) {
  validate(p);
  if (p.b == 0.0) {
    throw DegenerateParameterError(
        "params.b: carrying capacity equilibrium needs b > 0");
  }
  return {report_for(p, EquilibriumKind::Extinction, State{}, tol_eig),
          report_for(p, EquilibriumKind::CarryingCapacity,
                     State{1.0 / p.b, 0.0, 0.0}, tol_eig)};
}

InteriorEquilibria interior_equilibria(const ModelParams& p, double tol_eig) {
  validate(p);
  if (p.gamma == 0.0) {
    throw DegenerateParameterError(
        "params.gamma: interior reconstruction needs gamma > 0");
  }

  // Coexistence requires dx1 = 0 with x1 != 0, which pins
  // x2 = r(1 - b x1)/gamma; dx3 = 0 then pins x3. Substituting both into
  // dx2 = 0 leaves a quadratic in x1 alone.
  const double qa = -p.alpha * p.theta;
  const double qb =
      (p.phi - p.rho) * p.theta - p.alpha * p.mu + p.epsilon * p.theta;
  const double qc = (p.phi - p.rho) * p.mu;

  InteriorEquilibria out;

  std::vector<double> roots;
  if (qa != 0.0) {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      // Citardauq-style split avoids cancellation in the small root.
      const double w = -0.5 * (qb + std::copysign(sq, qb));
      if (w != 0.0) {
        roots.push_back(w / qa);
        roots.push_back(qc / w);
      } else {
        roots.push_back(0.0);  // qb = 0 and disc = 0 imply a double root at 0
      }
    }
  } else if (qb != 0.0) {
    roots.push_back(-qc / qb);
  } else {
    out.degenerate = true;
    out.note = (qc == 0.0)
                   ? "alpha*theta = 0 and the linear coefficient vanish: the "
                     "x1 balance holds identically, no isolated candidate"
                   : "alpha*theta = 0 and the linear coefficient vanish: the "
                     "x1 balance is infeasible";
    return out;
  }

  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());

  for (double x1 : roots) {
    if (x1 == 0.0) x1 = 0.0;  // normalize -0.0 from the qc/w split
    const double x2 = p.r * (1.0 - p.b * x1) / p.gamma;
    const double denom = p.mu + p.theta * x1;
    if (denom == 0.0) {
      out.note = "candidate skipped: mu + theta*x1 = 0 leaves x3 undefined";
      continue;
    }
    const double x3 = p.epsilon * x2 / denom;
    out.reports.push_back(report_for(p, EquilibriumKind::Interior,
                                     State{x1, x2, x3}, tol_eig));
  }
  return out;
}

EquilibriumReport controlled_equilibrium(const ModelParams& p, double tau,
                                         double tol_eig) {
  validate(p);
  if (!std::isfinite(tau) || tau < 0.0) {
    throw InvalidInputError("tau: must be finite and >= 0");
  }
  if (!(p.phi < p.rho)) {
    throw PreconditionError(
        "params.phi: tumor-free rest point needs phi < rho");
  }
  if (p.mu == 0.0) {
    throw DegenerateParameterError(
        "params.mu: tumor-free rest point needs mu > 0");
  }

  const double x2b = tau / (p.rho - p.phi);
  const double x3b = (p.epsilon * x2b - tau) / p.mu;
  return report_for(p, EquilibriumKind::Controlled, State{0.0, x2b, x3b},
                    tol_eig);
}

EquilibriaSummary all_equilibria(const ModelParams& p, double tol_eig) {
  EquilibriaSummary out;
  const auto trivial = trivial_equilibria(p, tol_eig);
  out.reports.assign(trivial.begin(), trivial.end());

  auto interior = interior_equilibria(p, tol_eig);
  out.degenerate_interior = interior.degenerate;
  out.note = interior.note;

  const bool capacity_stable =
      trivial[1].stability == Stability::AsymptoticallyStable;
  bool interior_stable = false;
  for (auto& rep : interior.reports) {
    interior_stable =
        interior_stable ||
        (rep.admissible && rep.stability == Stability::AsymptoticallyStable);
    out.reports.push_back(std::move(rep));
  }
  out.bistable = capacity_stable && interior_stable;
  return out;
}

}  // namespace cart
