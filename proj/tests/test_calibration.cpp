#include <cmath>
#include <filesystem>
#include <map>
#include <algorithm>
#include <random>

#include <doctest.h>

#include "casimir/calibration.hpp"
#include "casimir/errors.hpp"

using namespace casimir;
using doctest::Approx;

namespace {

const PolynomialX& poly() {
  static const PolynomialX x = fit_polynomial_x(101.2, 10.0, 2000.0);
  return x;
}

double casimir_law(double a) { return -143.7 * std::pow(80.0 / a, 3.3); }

CalibrationParams truth(double v0, double m, double z0, double k) {
  CalibrationParams c;
  c.v0_mv = {v0, 0.0};
  c.m_nm_per_v = {m, 0.0};
  c.z0_nm = {z0, 0.0};
  c.k_tilde_nn_per_v = {k, 0.0};
  return c;
}

SynthesisSpec spec_for(const CalibrationParams& t, int repetitions, double noise = 0.0) {
  SynthesisSpec s;
  s.truth = t;
  s.voltages_mv = default_voltages(t.v0_mv.value);
  s.repetitions = repetitions;
  s.z_end_nm = 640.0;
  s.noise_sigma_v = noise;
  return s;
}

void check_recovered(const CalibrationParams& got, const CalibrationParams& want) {
  CHECK(got.v0_mv.value == Approx(want.v0_mv.value).epsilon(1e-6));
  CHECK(got.m_nm_per_v.value == Approx(want.m_nm_per_v.value).epsilon(1e-6));
  CHECK(got.z0_nm.value == Approx(want.z0_nm.value).epsilon(1e-6));
  CHECK(got.k_tilde_nn_per_v.value == Approx(want.k_tilde_nn_per_v.value).epsilon(1e-6));
}

}  // namespace

TEST_CASE("noiseless curves give the exact parameters") {
  for (const auto& t : {truth(-196.8, 104.4, 29.6, 1.51), truth(64.8, 104.2, 29.0, 1.51)}) {
    const auto curves = synthesize_curves(spec_for(t, 1), casimir_law, poly());
    const auto r = fit_calibration(curves, poly());
    check_recovered(r.params, t);
    CHECK(r.residual_rms_v < 1e-9);
    CHECK_FALSE(r.v0_trend);
  }
}

TEST_CASE("noisy curves are recovered within their confidence intervals") {
  const auto t = truth(-196.8, 104.4, 29.6, 1.51);
  auto s = spec_for(t, 10, 1e-3);
  s.seed = 11;
  const auto curves = synthesize_curves(s, casimir_law, poly());
  CalibrationOptions opts;
  opts.check_v0_trend = false;
  const auto r = fit_calibration(curves, poly(), opts);
  const auto& p = r.params;
  MESSAGE("V0 " << p.v0_mv.value << " +- " << p.v0_mv.half_width << ", m " << p.m_nm_per_v.value << " +- "
                << p.m_nm_per_v.half_width << ", z0 " << p.z0_nm.value << " +- " << p.z0_nm.half_width << ", k "
                << p.k_tilde_nn_per_v.value << " +- " << p.k_tilde_nn_per_v.half_width);
  CHECK(std::abs(p.v0_mv.value - t.v0_mv.value) <= p.v0_mv.half_width);
  CHECK(std::abs(p.m_nm_per_v.value - t.m_nm_per_v.value) <= p.m_nm_per_v.half_width);
  CHECK(std::abs(p.z0_nm.value - t.z0_nm.value) <= p.z0_nm.half_width);
  CHECK(std::abs(p.k_tilde_nn_per_v.value - t.k_tilde_nn_per_v.value) <= p.k_tilde_nn_per_v.half_width);
  CHECK(p.v0_mv.half_width > 0.0);
  CHECK(r.residual_rms_v == Approx(1e-3).epsilon(0.1));
}

TEST_CASE("drift is removed when its rate is known") {
  const auto t = truth(-196.8, 104.4, 29.6, 1.51);
  auto s = spec_for(t, 2);
  s.drift_nm_per_repetition = 1.5;
  const auto curves = synthesize_curves(s, casimir_law, poly());
  CalibrationOptions opts;
  opts.drift_nm_per_repetition = 1.5;
  check_recovered(fit_calibration(curves, poly(), opts).params, t);
}

TEST_CASE("degenerate inputs") {
  const auto t = truth(-196.8, 104.4, 29.6, 1.51);
  auto s = spec_for(t, 1);
  s.voltages_mv = {-265.0, -150.0};
  const auto two = synthesize_curves(s, casimir_law, poly());
  CHECK_THROWS_AS(fit_calibration(two, poly()), DataError);
  CalibrationOptions bad;
  bad.m_min = 200.0;
  bad.m_max = 100.0;
  const auto curves = synthesize_curves(spec_for(t, 1), casimir_law, poly());
  CHECK_THROWS_AS(fit_calibration(curves, poly(), bad), ConfigError);
  CalibrationOptions outside;
  outside.a_max_nm = 5000.0;
  CHECK_THROWS_AS(fit_calibration(curves, poly(), outside), ConfigError);
}

TEST_CASE("a separation-dependent residual potential aborts the calibration") {
  auto s = spec_for(truth(-196.8, 104.4, 29.6, 1.51), 2, 1e-4);
  s.v0_slope_mv_per_nm = 0.05;
  const auto curves = synthesize_curves(s, casimir_law, poly());
  CHECK_THROWS_AS(fit_calibration(curves, poly()), V0TrendError);
  CalibrationOptions lax;
  lax.check_v0_trend = false;
  const auto r = fit_calibration(curves, poly(), lax);
  CHECK(r.v0_trend);
  CHECK(r.v0_slope_mv_per_nm == Approx(0.05).epsilon(0.2));
}

TEST_CASE("extraction reproduces the force law independent of voltage") {
  const auto t = truth(-196.8, 104.4, 29.6, 1.51);
  const auto noiseless = synthesize_curves(spec_for(t, 1), casimir_law, poly());
  const auto ex = extract_casimir(noiseless, t, poly());
  REQUIRE_FALSE(ex.a_nm.empty());
  for (std::size_t j = 0; j < ex.a_nm.size(); j += 7) {
    CAPTURE(ex.a_nm[j]);
    // Local straight-line resampling of a convex curve: error of order F'' h^2.
    CHECK(ex.mean_pn[j] == Approx(casimir_law(ex.a_nm[j])).epsilon(3e-4));
    for (double v : ex.samples[j]) CHECK(v == Approx(ex.mean_pn[j]).epsilon(5e-5));
  }

  auto s = spec_for(t, 10, 1e-3);
  const auto noisy = synthesize_curves(s, casimir_law, poly());
  const auto en = extract_casimir(noisy, t, poly());
  const auto budget = error_budget(en, t, poly());
  for (std::size_t j = 0; j < en.a_nm.size(); j += 5) {
    CAPTURE(en.a_nm[j]);
    CHECK(std::abs(en.mean_pn[j] - casimir_law(en.a_nm[j])) < 2.0 * budget.random_pn[j] + 0.05);
    std::map<double, std::vector<double>> by_voltage;
    for (std::size_t i = 0; i < en.samples[j].size(); ++i) by_voltage[en.voltages[j][i]].push_back(en.samples[j][i]);
    for (const auto& [v, vals] : by_voltage) {
      double mean = 0.0;
      for (double x : vals) mean += x;
      mean /= static_cast<double>(vals.size());
      // Per-voltage mean of 10 repetitions against the overall mean.
      CHECK(std::abs(mean - en.mean_pn[j]) < 3.0 * budget.random_pn[j] * std::sqrt(en.samples[j].size() / double(vals.size())));
    }
  }
}

TEST_CASE("error budget identities") {
  auto calib = truth(-196.8, 104.4, 29.6, 1.51);
  calib.k_tilde_nn_per_v.half_width = 0.01;
  calib.z0_nm.half_width = 0.5;
  calib.v0_mv.half_width = 1.5;

  ExtractionResult same;
  same.a_nm = {80.0};
  same.samples = {{-140.0, -140.0, -140.0}};
  same.voltages = {{-265.0, -250.0, -150.0}};
  same.mean_pn = {-140.0};
  const auto b0 = error_budget(same, calib, poly());
  CHECK(b0.random_pn[0] == 0.0);
  CHECK(b0.systematic_pn[0] > 0.5);
  CHECK(b0.separation_error_nm == 0.5);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(-140.0, 3.0);
  ExtractionResult small, big;
  const std::size_t n = 4000;
  std::vector<double> s1, s2, v1, v2;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const double x = g(rng);
    if (i < n) s1.push_back(x), v1.push_back(-265.0);
    s2.push_back(x), v2.push_back(-265.0);
  }
  auto fill = [](ExtractionResult& r, std::vector<double> s, std::vector<double> v) {
    double mean = 0.0;
    for (double x : s) mean += x;
    r.a_nm = {80.0};
    r.mean_pn = {mean / static_cast<double>(s.size())};
    r.samples = {std::move(s)};
    r.voltages = {std::move(v)};
  };
  fill(small, s1, v1);
  fill(big, s2, v2);
  const auto bs = error_budget(small, calib, poly());
  const auto bb = error_budget(big, calib, poly());
  CHECK(bs.random_pn[0] / bb.random_pn[0] == Approx(std::sqrt(2.0)).epsilon(0.05));
  for (const auto* b : {&b0, &bs, &bb}) {
    const double t = b->total_pn[0], r = b->random_pn[0], s = b->systematic_pn[0];
    CHECK(t * t - r * r - s * s == Approx(0.0).scale(t * t));
  }
  ExtractionResult lonely = same;
  lonely.samples = {{-140.0}};
  lonely.voltages = {{-265.0}};
  CHECK_THROWS_AS(error_budget(lonely, calib, poly()), DataError);
}

TEST_CASE("random error does not depend on separation for stationary noise") {
  const auto t = truth(-196.8, 104.4, 29.6, 1.51);
  const auto curves = synthesize_curves(spec_for(t, 10, 1e-3), casimir_law, poly());
  ExtractionOptions eo;
  eo.a_min_nm = 200.0;
  eo.a_max_nm = 600.0;
  const auto ex = extract_casimir(curves, t, poly(), eo);
  const auto b = error_budget(ex, t, poly());
  auto median = [&](double from, double to) {
    std::vector<double> v;
    for (std::size_t k = 0; k < b.a_nm.size(); ++k)
      if (b.a_nm[k] >= from && b.a_nm[k] < to) v.push_back(b.random_pn[k]);
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  CHECK(median(200.0, 300.0) == Approx(median(500.0, 600.0)).epsilon(0.15));
  double hi = 0.0;
  for (double r : b.random_pn) hi = std::max(hi, r);
  CHECK(hi < 2.0 * median(200.0, 600.0));
}

TEST_CASE("Gaussian statistics and overlap") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> a(-143.7, 4.0), b(-105.5, 4.0);
  std::vector<double> sa, sb;
  for (int i = 0; i < 400; ++i) sa.push_back(a(rng)), sb.push_back(b(rng));
  const auto ga = gaussian_stats(sa, 1.0), gb = gaussian_stats(sb, 1.0);
  CHECK(std::abs(ga.mean + 143.7) < 3 * 4.0 / std::sqrt(400.0));
  CHECK(ga.sigma == Approx(4.0).epsilon(0.15));
  double total = 0.0;
  for (const auto& h : ga.histogram) total += h.fraction;
  CHECK(total == Approx(1.0));
  CHECK_FALSE(distributions_overlap(ga, gb));
  CHECK(distributions_overlap(ga, ga));
  CHECK_THROWS_AS(gaussian_stats(std::span(sa).first(10), 1.0), std::invalid_argument);
}

TEST_CASE("force-distance CSV") {
  const auto dir = std::filesystem::temp_directory_path() / "fd_csv_test";
  std::filesystem::create_directories(dir);
  ForceDistanceCurve c;
  c.voltage_mv = -265.0;
  c.repetition = 3;
  c.z_piezo_nm = {0.0, 0.2, 0.4};
  c.s_def_v = {-0.1, -0.05, 0.0123456789012345};
  c.save_csv(dir / "c.csv");
  const auto d = ForceDistanceCurve::load_csv(dir / "c.csv");
  CHECK(d.voltage_mv == c.voltage_mv);
  CHECK(d.repetition == 3);
  CHECK(d.z_piezo_nm == c.z_piezo_nm);
  CHECK(d.s_def_v == c.s_def_v);
  std::filesystem::remove_all(dir);
}
