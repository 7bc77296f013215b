#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "casimir/errors.hpp"
#include "casimir/kramers_kronig.hpp"
#include "casimir/lifshitz.hpp"

using namespace casimir;
using doctest::Approx;

namespace {

const DrudeParams kItoDrude{1.5, 0.128};
const OscillatorParams kUpper{240.54, 8.5, 9.0};
const OscillatorParams kLower{111.52, 4.0, 8.0};

template <class F>
OpticalDataTable sample_table(const F& im, int n = 200, double lo = 0.04, double hi = 8.27) {
  std::vector<double> w, e;
  for (int i = 0; i < n; ++i) {
    const double x = lo * std::pow(hi / lo, i / double(n - 1));
    w.push_back(x);
    e.push_back(im(x));
  }
  return {w, e};
}

OpticalDataTable ito_table() {
  return sample_table([](double w) {
    return drude_im_eps(kItoDrude, w) + 0.5 * (oscillator_im_eps(kUpper, w) + oscillator_im_eps(kLower, w));
  });
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, i / double(n - 1)));
  return g;
}

}  // namespace

TEST_CASE("oscillator table reproduces the closed form") {
  const auto table = sample_table([](double w) { return oscillator_im_eps(kLower, w); });
  const ExtrapolationSpec ext{kLower, kLower};
  for (double xi : log_grid(0.05, 20.0, 25)) {
    CAPTURE(xi);
    CHECK(kk_transform(table, ext, xi) == Approx(oscillator_eps_imag_axis(kLower, xi)).epsilon(5e-3));
  }
}

TEST_CASE("Drude table reproduces the closed form") {
  const auto table = sample_table([](double w) { return drude_im_eps(kItoDrude, w); });
  const ExtrapolationSpec ext{kItoDrude, kItoDrude};
  for (double xi : log_grid(0.05, 20.0, 25)) {
    CAPTURE(xi);
    CHECK(kk_transform(table, ext, xi) == Approx(drude_eps_imag_axis(kItoDrude, xi)).epsilon(5e-3));
  }
}

TEST_CASE("far above the data the permittivity tends to 1") {
  const auto table = ito_table();
  const double e = kk_transform(table, {kItoDrude, kUpper}, 1e4);
  CHECK(e > 1.0);
  CHECK(e < 1.001);
  CHECK_THROWS_AS(kk_transform(table, {kItoDrude, kUpper}, 0.0), std::domain_error);
}

TEST_CASE("optical table validation and CSV round trip") {
  CHECK_THROWS_AS(OpticalDataTable({}, {}), DataError);
  CHECK_THROWS_AS(OpticalDataTable({1.0, 0.5}, {1.0, 1.0}), DataError);
  CHECK_THROWS_AS(OpticalDataTable({1.0, 2.0}, {1.0, -1.0}), DataError);
  CHECK_THROWS_AS(OpticalDataTable({0.0, 2.0}, {1.0, 1.0}), DataError);

  const auto dir = std::filesystem::temp_directory_path() / "kk_table_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "table.csv";
  {
    std::ofstream out(path);
    out << "# ellipsometry, reconstructed\nomega_ev,im_eps\n0.1,2.0\n# mid comment\n0.2,1.5\n0.4,1.0\n";
  }
  const auto t = OpticalDataTable::load_csv(path);
  REQUIRE(t.size() == 3);
  CHECK(t.omega()[1] == 0.2);
  t.save_csv(dir / "copy.csv");
  const auto u = OpticalDataTable::load_csv(dir / "copy.csv");
  CHECK(u.omega() == t.omega());
  CHECK(u.im_eps() == t.im_eps());
  // Log-log interpolation.
  CHECK(t.interpolate(std::sqrt(0.1 * 0.2)) == Approx(std::sqrt(2.0 * 1.5)));
  {
    std::ofstream out(path);
    out << "omega_ev,im_eps\n0.1,2.0\n0.1,1.0\n";
  }
  CHECK_THROWS_AS(OpticalDataTable::load_csv(path), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("carriers on minus carriers off is the analytic Drude term") {
  const auto table = ito_table();
  const auto grid = log_grid(0.01, 50.0, 30);
  const ExtrapolationSpec lo{kItoDrude, kLower}, up{kItoDrude, kUpper};
  const auto [on_lo, on_up] = build_curve(table, lo, up, grid, Carriers::On);
  const auto [off_lo, off_up] = build_curve(table, lo, up, grid, Carriers::Off);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double drude = drude_eps_imag_axis(kItoDrude, grid[i]) - 1.0;
    CHECK(on_lo.eps()[i] - off_lo.eps()[i] == Approx(drude).epsilon(1e-9));
    CHECK(on_up.eps()[i] - off_up.eps()[i] == Approx(drude).epsilon(1e-9));
    if (grid[i] < 0.1) CHECK(on_lo.eps()[i] - off_lo.eps()[i] > 100.0);
  }
}

TEST_CASE("the stronger extrapolation gives the upper band") {
  const auto table = ito_table();
  const auto grid = log_grid(0.01, 100.0, 40);
  // kUpper has larger Im eps than kLower everywhere above the table.
  for (double w : log_grid(8.27, 1000.0, 50)) REQUIRE(oscillator_im_eps(kUpper, w) >= oscillator_im_eps(kLower, w));
  const auto [lo, up] = build_curve(table, {kItoDrude, kLower}, {kItoDrude, kUpper}, grid, Carriers::Off);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(up.eps()[i] >= lo.eps()[i]);
}

TEST_CASE("first Matsubara ratio") {
  const auto table = ito_table();
  const auto grid = log_grid(0.01, 100.0, 121);
  const auto [on_lo, on_up] = build_curve(table, {kItoDrude, kLower}, {kItoDrude, kUpper}, grid, Carriers::On);
  const auto [off_lo, off_up] = build_curve(table, {kItoDrude, kLower}, {kItoDrude, kUpper}, grid, Carriers::Off);
  CHECK(first_matsubara_ratio(on_lo, on_lo, 275.15) == Approx(1.0));
  const double r = first_matsubara_ratio(on_lo, off_lo, 275.15);
  CHECK(r > 17 * 0.7);
  CHECK(r < 17 * 1.3);
  const PermittivityCurve narrow("narrow", {1.0, 2.0}, {2.0, 1.5});
  CHECK_THROWS_AS(first_matsubara_ratio(narrow, narrow, 275.15), DataError);
}

TEST_CASE("carrier-free core stays finite at zero frequency") {
  const auto table = ito_table();
  const KramersKronigCore core(table, kLower, kItoDrude);
  const double c0 = core.contribution(0.0);
  CHECK(std::isfinite(c0));
  CHECK(c0 > 0.0);
  CHECK(core.contribution(1e-4) == Approx(c0).epsilon(1e-4));
  for (std::size_t i = 0; i < table.size(); ++i) CHECK(core.core_table().im_eps()[i] >= 0.0);
  const auto eps = make_tabulated_dielectric("ito", table, {kItoDrude, kLower}, Carriers::Off);
  CHECK(eps.static_limit().kind == StaticLimit::Kind::Finite);
  CHECK(eps.static_limit().eps0 == Approx(1.0 + c0));
  const auto on = make_tabulated_dielectric("ito", table, {kItoDrude, kLower}, Carriers::On);
  CHECK(on.static_limit().kind == StaticLimit::Kind::Drude);
}
