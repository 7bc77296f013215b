#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "casimir/errors.hpp"
#include "casimir/lifshitz.hpp"
#include "casimir/roughness.hpp"

using namespace casimir;
using doctest::Approx;

namespace {

const std::filesystem::path kData = std::filesystem::path(CASIMIR_SOURCE_DIR) / "data";

SmoothForce power_law(double n) {
  return [n](double a) { return -1e6 / std::pow(a, n); };
}

double brute_force(const SmoothForce& f, const RoughnessProfile& p, const RoughnessProfile& q, double a) {
  const double h0 = zero_roughness_level(p), g0 = zero_roughness_level(q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.bins().size(); ++i)
    for (std::size_t k = 0; k < q.bins().size(); ++k)
      sum += p.bins()[i].v * q.bins()[k].v * f(a + h0 + g0 - p.bins()[i].h_nm - q.bins()[k].h_nm);
  return sum;
}

LayerStack paper_stack() {
  const DielectricFunction gold{"gold",
                                {DrudeParams{9.0, 0.035}, OscillatorParams{7.091, 0.75, 3.05},
                                 OscillatorParams{41.46, 1.85, 4.15}, OscillatorParams{2.7, 1.0, 5.4},
                                 OscillatorParams{154.7, 7.0, 8.5}, OscillatorParams{44.55, 6.0, 13.5},
                                 OscillatorParams{309.6, 9.0, 21.5}}};
  const DielectricFunction ito{"ito", {DrudeParams{1.5, 0.128}, OscillatorParams{175.0, 6.0, 8.5}}};
  const DielectricFunction quartz{"quartz", {NinhamParsegianParams{1.93, 0.1378, 1.359, 13.38}}};
  return {{gold, std::nullopt}, {{ito, 74.6}, {quartz, std::nullopt}}};
}

}  // namespace

TEST_CASE("zero roughness level") {
  CHECK(zero_roughness_level(RoughnessProfile::flat()) == 0.0);
  CHECK(zero_roughness_level(RoughnessProfile({{0.5, 0.0}, {0.5, 10.0}})) == Approx(5.0));
}

TEST_CASE("profile validation") {
  CHECK_THROWS(RoughnessProfile({}));
  CHECK_THROWS(RoughnessProfile({{0.5, 0.0}, {0.4, 1.0}}));
  CHECK_THROWS(RoughnessProfile({{0.5, 1.0}, {0.5, 2.0}}));
  CHECK_THROWS(RoughnessProfile({{0.5, 0.0}, {0.5, 0.0}}));
  CHECK_THROWS(RoughnessProfile({{1.2, 0.0}, {-0.2, 1.0}}));
}

TEST_CASE("flat surfaces leave the force unchanged") {
  const auto f = power_law(3);
  const auto flat = RoughnessProfile::flat();
  CHECK(rough_force(f, flat, flat, 80.0) == f(80.0));
  CHECK(roughness_correction(f, flat, flat, 80.0) == 0.0);
}

TEST_CASE("geometric averaging equals the explicit double sum") {
  const auto f = power_law(3);
  const RoughnessProfile p({{0.5, 0.0}, {0.5, 6.0}});
  const RoughnessProfile q({{0.5, 0.0}, {0.5, 4.0}});
  CHECK(rough_force(f, p, q, 50.0) == brute_force(f, p, q, 50.0));
  const double by_hand = 0.25 * (f(55.0) + f(51.0) + f(49.0) + f(45.0));
  CHECK(rough_force(f, p, q, 50.0) == Approx(by_hand).epsilon(1e-14));

  const auto ito = RoughnessProfile::load_csv(kData / "roughness_ito.csv");
  const auto au = RoughnessProfile::load_csv(kData / "roughness_au.csv");
  CHECK(ito.bins().size() == 18);
  CHECK(au.bins().size() == 25);
  for (double a : {60.0, 77.7, 150.0}) {
    CHECK(rough_force(f, ito, au, a) == Approx(brute_force(f, ito, au, a)).epsilon(1e-13));
    CHECK(rough_force(f, au, ito, a) == Approx(brute_force(f, ito, au, a)).epsilon(1e-13));
  }
}

TEST_CASE("delta profiles at their zero level") {
  const auto f = power_law(3);
  const RoughnessProfile p({{0.0, 0.0}, {1.0, 7.0}});
  const RoughnessProfile q({{0.0, 0.0}, {1.0, 3.0}});
  CHECK(rough_force(f, p, q, 40.0) == Approx(f(40.0)).epsilon(1e-15));
}

TEST_CASE("convex force: roughness strengthens attraction, less so at larger a") {
  const RoughnessProfile p({{0.25, 0.0}, {0.5, 5.0}, {0.25, 10.0}});
  for (double n : {1.0, 3.0, 4.0}) {
    const auto f = power_law(n);
    double prev = INFINITY;
    for (double a = 30.0; a <= 300.0; a += 10.0) {
      const double c = roughness_correction(f, p, p, a);
      CHECK(c < 0.0);
      CHECK(std::abs(c) < prev);
      prev = std::abs(c);
    }
  }
}

TEST_CASE("non-positive effective separation is rejected") {
  const RoughnessProfile p({{0.5, 0.0}, {0.5, 10.0}});
  CHECK(min_rough_separation(p, p) == Approx(10.0));
  CHECK_THROWS_AS(rough_force(power_law(3), p, p, 10.0), std::domain_error);
  CHECK_NOTHROW(rough_force(power_law(3), p, p, 10.5));
}

TEST_CASE("profile CSV round trip and bad files") {
  const auto dir = std::filesystem::temp_directory_path() / "roughness_test";
  std::filesystem::create_directories(dir);
  const RoughnessProfile p({{0.2, 0.0}, {0.3, 2.5}, {0.5, 5.0}});
  p.save_csv(dir / "p.csv");
  const auto q = RoughnessProfile::load_csv(dir / "p.csv");
  REQUIRE(q.bins().size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(q.bins()[i].v == p.bins()[i].v);
    CHECK(q.bins()[i].h_nm == p.bins()[i].h_nm);
  }
  {
    std::ofstream out(dir / "bad.csv");
    out << "v,h_nm\n0.5,0\n0.2,1\n";
  }
  CHECK_THROWS_AS(RoughnessProfile::load_csv(dir / "bad.csv"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("interpolant reproduces a power law") {
  const ForceInterpolant fi(20.0, 500.0, 0.01, [](std::span<const double> a) {
    std::vector<double> out;
    for (double x : a) out.push_back(-1e6 / std::pow(x, 3.2));
    return out;
  });
  for (double a : {20.0, 33.3, 80.0, 251.0, 500.0}) CHECK(fi(a) == Approx(-1e6 / std::pow(a, 3.2)).epsilon(1e-6));
  CHECK_THROWS(fi(10.0));
}

TEST_CASE("reconstructed profiles on the gold-ITO force") {
  const auto ito = RoughnessProfile::load_csv(kData / "roughness_ito.csv");
  const auto au = RoughnessProfile::load_csv(kData / "roughness_au.csv");
  CHECK(zero_roughness_level(ito) == Approx(9.54).epsilon(1e-3));
  CHECK(zero_roughness_level(au) == Approx(11.51).epsilon(1e-3));

  const LayerStack stack = paper_stack();
  const double lo = 60.0 - min_rough_separation(ito, au) - 1.0;
  const ForceInterpolant f(lo, 200.0, 0.01, [&](std::span<const double> a) {
    return pfa_forces(stack, a, 101.2, {});
  });
  const SmoothForce smooth = [&](double a) { return f(a); };
  const double c60 = -roughness_correction(smooth, ito, au, 60.0);
  MESSAGE("roughness correction at 60 nm: " << c60);
  CHECK(c60 >= 0.015);
  CHECK(c60 <= 0.030);
  for (double a = 90.0; a <= 150.0; a += 1.0) CHECK(-roughness_correction(smooth, ito, au, a) < 0.01);
  for (double a = 116.0; a <= 150.0; a += 1.0) CHECK(-roughness_correction(smooth, ito, au, a) < 0.005);
}
