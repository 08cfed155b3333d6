#include "cart/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace cart {

double Mat3::trace() const { return m[0][0] + m[1][1] + m[2][2]; }

double Mat3::det() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double Mat3::principal_minor_sum() const {
  return (m[1][1] * m[2][2] - m[1][2] * m[2][1]) +
         (m[0][0] * m[2][2] - m[0][2] * m[2][0]) +
         (m[0][0] * m[1][1] - m[0][1] * m[1][0]);
}

double Mat3::max_abs() const {
  double best = 0.0;
  for (const auto& row : m)
    for (double v : row) best = std::max(best, std::abs(v));
  return best;
}

std::array<double, 3> characteristic_coeffs(const Mat3& a) {
  return {-a.det(), a.principal_minor_sum(), -a.trace()};
}

namespace {

struct MonicCubic {
  // x^3 + c2 x^2 + c1 x + c0
  double c2, c1, c0;

  double eval(double x) const { return ((x + c2) * x + c1) * x + c0; }
  double deriv(double x) const { return (3.0 * x + 2.0 * c2) * x + c1; }
  std::complex<double> eval(std::complex<double> x) const {
    return ((x + c2) * x + c1) * x + c0;
  }
  std::complex<double> deriv(std::complex<double> x) const {
    return (3.0 * x + 2.0 * c2) * x + c1;
  }
};

double polish_real(const MonicCubic& f, double x) {
  for (int i = 0; i < 2; ++i) {
    const double d = f.deriv(x);
    if (d == 0.0) break;
    const double cand = x - f.eval(x) / d;
    if (!std::isfinite(cand) || std::abs(f.eval(cand)) > std::abs(f.eval(x)))
      break;
    x = cand;
  }
  return x;
}

std::complex<double> polish_complex(const MonicCubic& f,
                                    std::complex<double> x) {
  for (int i = 0; i < 2; ++i) {
    const auto d = f.deriv(x);
    if (d == std::complex<double>(0.0)) break;
    const auto cand = x - f.eval(x) / d;
    if (!std::isfinite(cand.real()) || !std::isfinite(cand.imag()) ||
        std::abs(f.eval(cand)) > std::abs(f.eval(x)))
      break;
    x = cand;
  }
  return x;
}

// All roots of x^3 + c2 x^2 + c1 x + c0: trigonometric form when the
// discriminant gives three real roots, Cardano otherwise.
Eigenvalues solve_monic_cubic(const MonicCubic& f) {
  const double shift = f.c2 / 3.0;
  const double p = f.c1 - f.c2 * f.c2 / 3.0;
  const double q = 2.0 * f.c2 * f.c2 * f.c2 / 27.0 - f.c2 * f.c1 / 3.0 + f.c0;

  const double half_q = 0.5 * q;
  const double third_p = p / 3.0;
  const double disc = half_q * half_q + third_p * third_p * third_p;

  Eigenvalues roots;
  if (p == 0.0 && q == 0.0) {
    roots.fill(std::complex<double>(-shift, 0.0));
    return roots;
  }

  if (disc <= 0.0) {
    // three real roots; disc <= 0 forces p < 0
    const double mp3 = -third_p;
    const double radius = 2.0 * std::sqrt(mp3);
    const double arg =
        std::clamp(-q / (2.0 * mp3 * std::sqrt(mp3)), -1.0, 1.0);
    const double phase = std::acos(arg) / 3.0;
    constexpr double two_thirds_pi = 2.0943951023931953;
    for (int k = 0; k < 3; ++k) {
      const double t = radius * std::cos(phase - two_thirds_pi * k);
      roots[k] = std::complex<double>(polish_real(f, t - shift), 0.0);
    }
    return roots;
  }

  // one real root and a conjugate pair; pick the non-cancelling cube root
  const double sd = std::sqrt(disc);
  double u, v;
  if (q >= 0.0) {
    v = std::cbrt(-half_q - sd);
    u = (v != 0.0) ? -third_p / v : 0.0;
  } else {
    u = std::cbrt(-half_q + sd);
    v = (u != 0.0) ? -third_p / u : 0.0;
  }
  const double real_root = polish_real(f, u + v - shift);
  const std::complex<double> pair(-0.5 * (u + v) - shift,
                                  0.8660254037844386 * (u - v));
  const auto polished = polish_complex(f, pair);
  roots[0] = std::complex<double>(real_root, 0.0);
  roots[1] = polished;
  roots[2] = std::conj(polished);
  return roots;
}

}  // namespace

Eigenvalues eigenvalues_3x3(const Mat3& a) {
  // Work on a/s so the cubic sees O(1) coefficients; eigenvalues scale back
  // linearly.
  const double s = a.max_abs();
  if (s == 0.0) return Eigenvalues{};

  Mat3 scaled = a;
  for (auto& row : scaled.m)
    for (double& v : row) v /= s;

  const auto c = characteristic_coeffs(scaled);
  const auto roots = solve_monic_cubic(MonicCubic{c[2], c[1], c[0]});

  Eigenvalues out;
  for (int i = 0; i < 3; ++i) out[i] = roots[i] * s;
  return out;
}

double max_real_part(const Eigenvalues& eig) {
  return std::max({eig[0].real(), eig[1].real(), eig[2].real()});
}

}  // namespace cart
