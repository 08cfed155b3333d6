#pragma once

#include <array>
#include <complex>

namespace cart {

using Vec3 = std::array<double, 3>;

struct Mat3 {
  // row-major storage
  std::array<std::array<double, 3>, 3> m{};

  double& operator()(int i, int j) { return m[i][j]; }
  double operator()(int i, int j) const { return m[i][j]; }

  double trace() const;
  double det() const;
  // Sum of the three principal 2x2 minors (second characteristic invariant).
  double principal_minor_sum() const;
  // Largest absolute entry; scale reference for residual tolerances.
  double max_abs() const;

  bool operator==(const Mat3&) const = default;
};

using Eigenvalues = std::array<std::complex<double>, 3>;

// Coefficients c of the monic characteristic polynomial
// lambda^3 + c[2] lambda^2 + c[1] lambda + c[0] of a.
std::array<double, 3> characteristic_coeffs(const Mat3& a);

// All three eigenvalues of a real 3x3 matrix via the closed-form cubic
// (trigonometric branch for three real roots, Cardano for a complex pair),
// each refined by a Newton step on the characteristic polynomial. Complex
// eigenvalues come out as an exact conjugate pair.
Eigenvalues eigenvalues_3x3(const Mat3& a);

double max_real_part(const Eigenvalues& eig);

}  // namespace cart
