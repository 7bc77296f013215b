#include "casimir/electrostatics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "casimir/errors.hpp"
#include "casimir/units.hpp"

namespace casimir {
namespace {

// N/V^2 -> pN/mV^2
constexpr double kXUnit = units::n_to_pn * units::mv_to_v * units::mv_to_v;

// sum_{n>=1} (coth alpha - n coth n alpha) / sinh n alpha, to relative 1e-10.
double image_series(double alpha) {
  const double coth_a = 1.0 / std::tanh(alpha);
  double sum = 0.0;
  constexpr long kMaxTerms = 200'000'000;
  for (long n = 1; n <= kMaxTerms; ++n) {
    const double na = static_cast<double>(n) * alpha;
    const double e = std::exp(-na);
    // 1/sinh(x) = 2 e^{-x} / (1 - e^{-2x}), coth(x) = (1 + e^{-2x}) / (1 - e^{-2x})
    const double e2 = e * e;
    const double term = (coth_a - static_cast<double>(n) * (1.0 + e2) / (1.0 - e2)) * 2.0 * e / (1.0 - e2);
    sum += term;
    if (na > 2.0 && std::abs(term) < 1e-10 * std::abs(sum)) return sum;
  }
  throw ConvergenceError(fmt::format("image-charge series did not converge (alpha = {})", alpha));
}

}  // namespace

double exact_x(double a_nm, double radius_um) {
  if (!(a_nm > 0.0) || !(radius_um > 0.0)) throw std::invalid_argument("exact_x needs a > 0 and R > 0");
  const double ratio = a_nm / (radius_um * 1e3);
  // acosh(1 + r) = log1p(r + sqrt(r (2 + r))) keeps precision for small r.
  const double alpha = std::log1p(ratio + std::sqrt(ratio * (2.0 + ratio)));
  return 2.0 * units::pi * units::vacuum_permittivity_f_m * image_series(alpha) * kXUnit;
}

double exact_sphere_plane_force(double a_nm, double radius_um, double dv_mv) {
  if (dv_mv == 0.0) return 0.0;
  return exact_x(a_nm, radius_um) * dv_mv * dv_mv;
}

PolynomialX::PolynomialX(std::array<double, 8> coefficients, double radius_um, double a_min_nm,
                         double a_max_nm, double certified_max_rel_error)
    : c_(coefficients),
      radius_um_(radius_um),
      a_min_(a_min_nm),
      a_max_(a_max_nm),
      max_rel_error_(certified_max_rel_error) {
  if (!(radius_um > 0.0) || !(a_min_nm > 0.0) || !(a_max_nm > a_min_nm)) {
    throw std::invalid_argument("PolynomialX: need R > 0 and 0 < a_min < a_max");
  }
}

void PolynomialX::check(double a_nm) const {
  if (!in_range(a_nm)) {
    throw std::domain_error(
        fmt::format("separation {} nm outside the X(a) validity range [{}, {}] nm", a_nm, a_min_, a_max_));
  }
}

double PolynomialX::operator()(double a_nm) const {
  check(a_nm);
  const double x = a_nm / (radius_um_ * 1e3);
  double s = 0.0;
  double p = 1.0 / x;
  for (double c : c_) {
    s += c * p;
    p *= x;
  }
  return -2.0 * units::pi * units::vacuum_permittivity_f_m * s * kXUnit;
}

double PolynomialX::derivative(double a_nm) const {
  check(a_nm);
  const double r_nm = radius_um_ * 1e3;
  const double x = a_nm / r_nm;
  double s = 0.0;
  for (int i = -1; i <= 6; ++i) {
    if (i == 0) continue;
    s += c_[static_cast<std::size_t>(i + 1)] * i * std::pow(x, i - 1);
  }
  return -2.0 * units::pi * units::vacuum_permittivity_f_m * s / r_nm * kXUnit;
}

PolynomialX fit_polynomial_x(double radius_um, double a_min_nm, double a_max_nm, double tolerance) {
  if (!(a_min_nm > 0.0) || !(a_max_nm > a_min_nm)) throw std::invalid_argument("fit range must be 0 < a_min < a_max");
  const double r_nm = radius_um * 1e3;
  const double x_max = a_max_nm / r_nm;

  auto log_grid = [&](int n) {
    std::vector<double> a(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = a_min_nm * std::pow(a_max_nm / a_min_nm, double(i) / (n - 1));
    }
    a.back() = a_max_nm;
    return a;
  };

  // Relative least squares in the scaled variable t = x / x_max keeps the
  // design matrix well conditioned.
  const auto fit_a = log_grid(400);
  Eigen::MatrixXd design(fit_a.size(), 8);
  Eigen::VectorXd rhs = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(fit_a.size()));
  const double unit = -2.0 * units::pi * units::vacuum_permittivity_f_m * kXUnit;
  for (std::size_t r = 0; r < fit_a.size(); ++r) {
    const double target = exact_x(fit_a[r], radius_um) / unit;
    const double t = fit_a[r] / r_nm / x_max;
    for (int i = -1; i <= 6; ++i) {
      design(static_cast<Eigen::Index>(r), i + 1) = std::pow(t, i) / target;
    }
  }
  const Eigen::VectorXd d = design.colPivHouseholderQr().solve(rhs);
  std::array<double, 8> c{};
  for (int i = -1; i <= 6; ++i) c[static_cast<std::size_t>(i + 1)] = d(i + 1) / std::pow(x_max, i);

  PolynomialX poly(c, radius_um, a_min_nm, a_max_nm, 0.0);
  double worst = 0.0;
  for (double a : log_grid(1600)) {
    const double exact = exact_x(a, radius_um);
    worst = std::max(worst, std::abs(poly(a) / exact - 1.0));
  }
  if (!(worst < tolerance)) {
    throw ConvergenceError(fmt::format("polynomial X(a) certification failed: max relative error {:.3g} >= {:.3g}",
                                       worst, tolerance));
  }
  return PolynomialX(c, radius_um, a_min_nm, a_max_nm, worst);
}

}  // namespace casimir
