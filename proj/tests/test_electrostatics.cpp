#include <cmath>

#include <doctest.h>

#include "casimir/calibration.hpp"
#include "casimir/electrostatics.hpp"
#include "casimir/units.hpp"

using namespace casimir;
using namespace casimir::units;
using doctest::Approx;

namespace {

// Leading-order sphere-plane force in pN.
double asymptote(double a_nm, double r_um, double dv_mv) {
  const double dv = dv_mv * mv_to_v;
  return -pi * vacuum_permittivity_f_m * r_um * um_to_m * dv * dv / (a_nm * nm_to_m) * n_to_pn;
}

// Image-charge series summed independently in long double.
double series(double a_nm, double r_um, double dv_mv) {
  const long double alpha = std::acosh(1.0L + static_cast<long double>(a_nm) / (r_um * 1000.0L));
  long double sum = 0.0L;
  for (int n = 1; n < 2'000'000; ++n) {
    const long double term = (1.0L / std::tanh(alpha) - n / std::tanh(n * alpha)) / std::sinh(n * alpha);
    sum += term;
    if (std::abs(term) < 1e-14L * std::abs(sum)) break;
  }
  const double dv = dv_mv * mv_to_v;
  return static_cast<double>(2 * pi * vacuum_permittivity_f_m * sum) * dv * dv * n_to_pn;
}

CalibrationParams untreated() {
  CalibrationParams c;
  c.v0_mv = {-196.8, 1.5};
  c.m_nm_per_v = {104.4, 0.5};
  c.z0_nm = {29.6, 0.5};
  c.k_tilde_nn_per_v = {1.51, 0.01};
  return c;
}

}  // namespace

TEST_CASE("exact force") {
  CHECK(exact_sphere_plane_force(100.0, 101.2, 0.0) == 0.0);
  for (double a : {60.0, 100.0, 500.0, 2000.0}) {
    CAPTURE(a);
    CHECK(exact_sphere_plane_force(a, 101.2, 68.0) == Approx(series(a, 101.2, 68.0)).epsilon(1e-8));
    CHECK(exact_x(a, 101.2) * 68.0 * 68.0 == Approx(exact_sphere_plane_force(a, 101.2, 68.0)).epsilon(1e-12));
  }
  const double f = exact_sphere_plane_force(100.0, 101.2, 68.0);
  MESSAGE("sphere-plane force at 100 nm, 68 mV: " << f << " pN");
  CHECK(f < 0.0);
  CHECK(f == Approx(asymptote(100.0, 101.2, 68.0)).epsilon(5e-3));
}

TEST_CASE("small separations approach the leading-order asymptote") {
  for (double a : {10.0, 50.0, 100.0}) {
    CAPTURE(a);
    CHECK(a / 101200.0 < 1e-3);
    CHECK(exact_sphere_plane_force(a, 101.2, 50.0) / asymptote(a, 101.2, 50.0) == Approx(1.0).epsilon(1e-2));
  }
  const double r1 = exact_sphere_plane_force(100.0, 101.2, 50.0) / asymptote(100.0, 101.2, 50.0);
  const double r2 = exact_sphere_plane_force(10.0, 101.2, 50.0) / asymptote(10.0, 101.2, 50.0);
  CHECK(std::abs(r2 - 1) < std::abs(r1 - 1));
}

TEST_CASE("polynomial form is certified") {
  const auto x = fit_polynomial_x(101.2, 60.0, 2000.0);
  CHECK(x.certified_max_rel_error() < 1e-4);
  CHECK(x.coefficients()[0] == Approx(0.5).epsilon(1e-3));
  double worst = 0.0;
  for (int i = 0; i <= 2800; ++i) {
    const double a = 60.0 + (2000.0 - 60.0) * i / 2800;
    worst = std::max(worst, std::abs(x(a) * 68.0 * 68.0 / exact_sphere_plane_force(a, 101.2, 68.0) - 1.0));
  }
  CHECK(worst < 1e-4);
  CHECK_THROWS_AS(x(59.0), std::domain_error);
  CHECK_THROWS_AS(x(2001.0), std::domain_error);
  const double h = 1e-3;
  CHECK(x.derivative(100.0) == Approx((x(100.0 + h) - x(100.0 - h)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("refitting on a sub-range does not worsen the fit there") {
  const auto full = fit_polynomial_x(101.2, 60.0, 2000.0);
  const auto sub = fit_polynomial_x(101.2, 60.0, 600.0);
  auto worst = [](const PolynomialX& p) {
    double w = 0.0;
    for (double a = 60.0; a <= 600.0; a += 0.5) w = std::max(w, std::abs(p(a) / exact_x(a, 101.2) - 1.0));
    return w;
  };
  CHECK(worst(sub) <= worst(full) * (1 + 1e-9));
}

TEST_CASE("electrostatic force for calibrated parameters") {
  const auto x = fit_polynomial_x(101.2, 60.0, 2000.0);
  const auto c = untreated();
  CHECK(electrostatic_force(100.0, -196.8, c, x) == 0.0);
  CHECK(electrostatic_force(100.0, -196.8 + 20.0, c, x) == Approx(electrostatic_force(100.0, -196.8 - 20.0, c, x)));
  const double dv = -265.0 - c.v0_mv.value;
  CHECK(std::abs(dv) == Approx(68.0).epsilon(5e-3));
  CHECK(electrostatic_force(100.0, -265.0, c, x) == Approx(exact_sphere_plane_force(100.0, 101.2, dv)).epsilon(1e-4));
}

TEST_CASE("separation reconstruction") {
  const auto c = untreated();
  CHECK(reconstruct_separation(0.0, 0.0, c) == 29.6);
  CHECK(reconstruct_separation(10.0, 0.0, c) == Approx(39.6));
  CHECK(reconstruct_separation(10.0, -0.1, c) - reconstruct_separation(10.0, 0.0, c) == Approx(-10.44));
  CHECK(reconstruct_separation(10.0, 0.2, c) - reconstruct_separation(10.0, 0.1, c) == Approx(0.1 * 104.4));
}

TEST_CASE("synthetic curves round-trip through the separation law") {
  const auto x = fit_polynomial_x(101.2, 20.0, 2000.0);
  SynthesisSpec spec;
  spec.truth = untreated();
  spec.voltages_mv = {-265.0};
  spec.repetitions = 1;
  spec.z_end_nm = 400.0;
  const auto law = [](double a) { return -1.2e7 / std::pow(a, 3.3); };
  const auto curves = synthesize_curves(spec, law, x);
  REQUIRE(curves.size() == 1);
  const auto& cv = curves[0];
  const double k = spec.truth.k_tilde_nn_per_v.value * 1000.0;  // pN/V
  for (std::size_t i = 0; i < cv.z_piezo_nm.size(); i += 50) {
    const double a = reconstruct_separation(cv.z_piezo_nm[i], cv.s_def_v[i], spec.truth);
    const double total = law(a) + electrostatic_force(a, -265.0, spec.truth, x);
    CHECK(k * cv.s_def_v[i] == Approx(total).epsilon(1e-8));
  }
}
