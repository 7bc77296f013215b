#pragma once

// Sphere-plane electrostatic force F = X(a) (V - V0)^2.
//
// The exact X(a) follows from the image-charge solution of the sphere-plane
// capacitor:
//
//   X(a) = 2 pi eps0 sum_{n>=1} (coth alpha - n coth n alpha) / sinh n alpha,
//   cosh alpha = 1 + a / R,
//
// and is fitted to the polynomial X(a) = -2 pi eps0 sum_{i=-1}^{6} c_i (a/R)^i.

#include <array>

namespace casimir {

/// Exact series value of X(a) in pN/mV^2 (negative: attraction).
double exact_x(double a_nm, double radius_um);

/// Exact sphere-plane force in pN for potential difference dv [mV].
double exact_sphere_plane_force(double a_nm, double radius_um, double dv_mv);

class PolynomialX {
 public:
  /// coefficients[0] is c_{-1}, coefficients[7] is c_6.
  PolynomialX(std::array<double, 8> coefficients, double radius_um, double a_min_nm, double a_max_nm,
              double certified_max_rel_error);

  /// X(a) in pN/mV^2. Throws std::domain_error outside the validity range.
  double operator()(double a_nm) const;
  /// dX/da in pN/(mV^2 nm).
  double derivative(double a_nm) const;

  const std::array<double, 8>& coefficients() const { return c_; }
  double radius_um() const { return radius_um_; }
  double a_min() const { return a_min_; }
  double a_max() const { return a_max_; }
  double certified_max_rel_error() const { return max_rel_error_; }
  bool in_range(double a_nm) const { return a_nm >= a_min_ && a_nm <= a_max_; }

 private:
  void check(double a_nm) const;

  std::array<double, 8> c_;
  double radius_um_;
  double a_min_;
  double a_max_;
  double max_rel_error_;
};

/// Required certification level of the polynomial form.
inline constexpr double kPolynomialXTolerance = 1e-4;

/// Least-squares fit of the polynomial to the exact series on [a_min, a_max],
/// minimising the relative deviation, then certified on a 4x denser grid.
/// Throws ConvergenceError if the certified error is not below `tolerance`.
PolynomialX fit_polynomial_x(double radius_um, double a_min_nm, double a_max_nm,
                             double tolerance = kPolynomialXTolerance);

}  // namespace casimir
