#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "casimir/material_models.hpp"

using namespace casimir;
using doctest::Approx;

namespace {

// Adaptive Simpson for the dispersion-integral oracle.
template <class F>
double simpson(const F& f, double a, double b, double fa, double fm, double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * eps) return left + right + (left + right - whole) / 15;
  return simpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

template <class F>
double integrate(const F& f, double a, double b, double eps) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), eps, 50);
}

const DrudeParams kGoldDrude{9.0, 0.035};
const DrudeParams kItoDrude{1.5, 0.128};
const OscillatorParams kUpper{240.54, 8.5, 9.0};
const OscillatorParams kLower{111.52, 4.0, 8.0};
const NinhamParsegianParams kQuartz{1.93, 0.1378, 1.359, 13.38};

}  // namespace

TEST_CASE("Drude imaginary part") {
  CHECK(drude_im_eps(kGoldDrude, 0.035) == Approx(81.0 / (2 * 0.035 * 0.035)).epsilon(1e-12));
  CHECK(drude_im_eps(kGoldDrude, 0.035) == Approx(33061.2).epsilon(1e-5));
  CHECK(drude_im_eps(kItoDrude, 1e4) < 1e-12);
  const double w = 0.04;
  CHECK(drude_im_eps(kItoDrude, w) == Approx(2.25 * 0.128 / (w * (w * w + 0.128 * 0.128))).epsilon(1e-14));
  CHECK_THROWS_AS(drude_im_eps(kItoDrude, 0.0), std::domain_error);
  CHECK_THROWS_AS(drude_im_eps(kItoDrude, -1.0), std::domain_error);
}

TEST_CASE("Drude on the imaginary axis") {
  CHECK(drude_eps_imag_axis(kGoldDrude, 9.0) == Approx(1.9961).epsilon(1e-4));
  CHECK(drude_eps_imag_axis(kGoldDrude, 0.149) == Approx(2955).epsilon(2e-3));
  CHECK(drude_eps_imag_axis(kGoldDrude, 1e6) == Approx(1.0).epsilon(1e-9));
  for (double xi : {1e-3, 0.1, 1.0, 10.0, 100.0}) {
    CHECK((drude_eps_imag_axis(kItoDrude, xi) - 1) * xi * (xi + kItoDrude.gamma) == Approx(2.25).epsilon(1e-12));
  }
  CHECK_THROWS_AS(drude_eps_imag_axis(kGoldDrude, 0.0), std::domain_error);
}

TEST_CASE("plasma model") {
  CHECK(plasma_eps_imag_axis({1.3}, 1.3) == Approx(2.0));
  CHECK(plasma_eps_imag_axis({9.0}, 1e6) == Approx(1.0).epsilon(1e-9));
  CHECK(plasma_eps_imag_axis({1.3}, 0.149) == Approx(77.1).epsilon(2e-3));
  CHECK_THROWS_AS(plasma_eps_imag_axis({1.3}, 0.0), std::domain_error);
}

TEST_CASE("Lorentz oscillator") {
  CHECK(oscillator_im_eps(kUpper, 0.0) == 0.0);
  CHECK(oscillator_im_eps(kUpper, 9.0) == Approx(3.1443).epsilon(1e-4));
  CHECK(oscillator_im_eps(kLower, 8.0) == Approx(3.485).epsilon(1e-12));
  CHECK(oscillator_eps_imag_axis(kUpper, 0.0) == Approx(3.970).epsilon(1e-3));
  CHECK(oscillator_eps_imag_axis(kLower, 8.0) == Approx(1.697).epsilon(1e-12));
  CHECK(oscillator_eps_imag_axis(kLower, 1e6) == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("Ninham-Parsegian quartz") {
  CHECK(ninham_parsegian_eps(kQuartz, 0.0) == Approx(4.289).epsilon(1e-12));
  CHECK(ninham_parsegian_eps(kQuartz, 0.1378) == Approx(1.0 + 1.93 / 2 + 1.359 / (1 + std::pow(0.1378 / 13.38, 2))).epsilon(1e-12));
  CHECK(ninham_parsegian_eps(kQuartz, 1e6) == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("analytic models are >= 1 and non-increasing on the imaginary axis") {
  const DielectricFunction models[] = {
      {"drude", {kGoldDrude}},     {"plasma", {PlasmaParams{1.3}}}, {"upper", {kUpper}},
      {"lower", {kLower}},         {"quartz", {kQuartz}},
      {"gold", {kGoldDrude, OscillatorParams{7.091, 0.75, 3.05}, OscillatorParams{41.46, 1.85, 4.15}}},
  };
  for (const auto& m : models) {
    CAPTURE(m.name());
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 100; ++i) {
      const double xi = 1e-3 * std::pow(1e5, i / 100.0);
      const double e = m.eval(xi);
      CHECK(e >= 1.0);
      CHECK(e <= prev);
      prev = e;
    }
    if (m.name() != "quartz") CHECK(m.eval(1e4) - 1.0 < 1e-5);
  }
}

TEST_CASE("oscillator pair satisfies the dispersion relation") {
  for (const auto& p : {kUpper, kLower}) {
    for (double xi : {0.05, 0.5, 5.0, 20.0}) {
      // omega = t / (1 - t) maps [0, inf) onto [0, 1).
      const auto f = [&](double t) {
        if (t >= 1.0) return 0.0;
        const double w = t / (1 - t);
        return w * oscillator_im_eps(p, w) / (w * w + xi * xi) / ((1 - t) * (1 - t));
      };
      const double kk = 1 + 2 / M_PI * integrate(f, 0.0, 1.0, 1e-12);
      CHECK(kk == Approx(oscillator_eps_imag_axis(p, xi)).epsilon(1e-6));
    }
  }
}

TEST_CASE("composite permittivity adds contributions") {
  DielectricFunction both("ito-like", {kItoDrude, kLower});
  const double xi = 0.3;
  CHECK(both.eval(xi) - 1 ==
        Approx((drude_eps_imag_axis(kItoDrude, xi) - 1) + (oscillator_eps_imag_axis(kLower, xi) - 1)));
  const auto off = both.without_carriers("core");
  CHECK(off.eval(xi) == Approx(oscillator_eps_imag_axis(kLower, xi)));
  const auto plasma = both.with_plasma_carriers("plasma", 1.3);
  CHECK(plasma.eval(xi) - off.eval(xi) == Approx(1.69 / (xi * xi)));
  CHECK(plasma.static_limit().kind == StaticLimit::Kind::Plasma);
  CHECK(both.static_limit().kind == StaticLimit::Kind::Drude);
  CHECK(off.static_limit().kind == StaticLimit::Kind::Finite);
  CHECK(off.static_limit().eps0 == Approx(oscillator_eps_imag_axis(kLower, 0.0)));
  CHECK_THROWS_AS(both.eval(0.0), std::domain_error);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(validate(DrudeParams{0.0, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(validate(OscillatorParams{1.0, -1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(NinhamParsegianParams{1.0, 1.0, 1.0, 0.0}), std::invalid_argument);
  CHECK_NOTHROW(validate(kQuartz));
}
