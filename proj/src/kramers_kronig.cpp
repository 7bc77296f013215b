#include "casimir/kramers_kronig.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "casimir/csv.hpp"
#include "casimir/errors.hpp"
#include "casimir/lifshitz.hpp"
#include "casimir/units.hpp"

namespace casimir {
namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

// Quadrature results worse than this are reported as non-convergent.
constexpr double kAcceptableRelError = 1e-5;

template <class F>
double integrate(F&& f, double a, double b, const KramersKronigOptions& opts, const char* region) {
  double error = 0.0;
  double l1 = 0.0;
  const double v = GK::integrate(f, a, b, opts.max_depth, opts.rel_tol, &error, &l1);
  if (!std::isfinite(v) || error > kAcceptableRelError * l1 + 1e-300) {
    throw ConvergenceError(fmt::format(
        "Kramers-Kronig {} integral did not converge on [{}, {}] (error {:.3g}, L1 {:.3g})", region,
        a, b, error, l1));
  }
  return v;
}

// Int_{omega_max}^inf omega Im(omega) / (omega^2 + xi^2) with u = 1/omega.
double high_tail(const ImEpsModel& model, double omega_max, double xi,
                 const KramersKronigOptions& opts) {
  const double xi2 = xi * xi;
  auto f = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double w = 1.0 / u;
    return im_eps(model, w) / (u * (1.0 + xi2 * u * u));
  };
  return integrate(f, 0.0, 1.0 / omega_max, opts, "high-frequency");
}

double low_region(const ImEpsModel& model, double omega_min, double xi,
                  const KramersKronigOptions& opts) {
  const double xi2 = xi * xi;
  auto f = [&](double w) {
    if (w <= 0.0) {
      // omega Im eps(omega) is finite at 0 for both models.
      if (const auto* d = std::get_if<DrudeParams>(&model)) {
        return d->omega_p * d->omega_p / (d->gamma * xi2);
      }
      return 0.0;
    }
    return w * im_eps(model, w) / (w * w + xi2);
  };
  return integrate(f, 0.0, omega_min, opts, "low-frequency");
}

// Table with the Drude part removed at the nodes. Subtracting after
// interpolation would leave interpolation error of the (large) carrier term in
// the (small) remainder.
OpticalDataTable subtract_carriers(const OpticalDataTable& table, const std::optional<DrudeParams>& carriers) {
  if (!carriers) return table;
  std::vector<double> im(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    im[i] = std::max(0.0, table.im_eps()[i] - drude_im_eps(*carriers, table.omega()[i]));
  }
  return {table.omega(), std::move(im)};
}

// Int over the table of omega Im(omega) / (omega^2 + xi^2).
double table_region(const OpticalDataTable& table, double xi, const KramersKronigOptions& opts) {
  const double xi2 = xi * xi;
  const auto& w = table.omega();
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < w.size(); ++j) {
    auto f = [&](double x) {
      return x * table.interpolate_in(j, x) / (x * x + xi2);
    };
    sum += integrate(f, w[j], w[j + 1], opts, "tabulated");
  }
  return sum;
}

}  // namespace

OpticalDataTable::OpticalDataTable(std::vector<double> omega_ev, std::vector<double> im_eps)
    : omega_(std::move(omega_ev)), im_eps_(std::move(im_eps)) {
  if (omega_.size() != im_eps_.size()) throw DataError("optical table: column length mismatch");
  if (omega_.size() < 2) throw DataError("optical table: at least 2 rows required");
  for (std::size_t i = 0; i < omega_.size(); ++i) {
    if (!(omega_[i] > 0.0)) throw DataError(fmt::format("optical table row {}: omega must be > 0", i));
    if (!(im_eps_[i] >= 0.0)) throw DataError(fmt::format("optical table row {}: Im eps must be >= 0", i));
    if (i > 0 && !(omega_[i] > omega_[i - 1])) {
      throw DataError(fmt::format("optical table row {}: omega must be strictly increasing", i));
    }
  }
}

OpticalDataTable OpticalDataTable::load_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path, {"omega_ev", "im_eps"});
  try {
    return {t.values("omega_ev"), t.values("im_eps")};
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void OpticalDataTable::save_csv(const std::filesystem::path& path) const {
  std::vector<std::vector<double>> rows;
  rows.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) rows.push_back({omega_[i], im_eps_[i]});
  csv::write(path, {"omega_ev", "im_eps"}, rows);
}

double OpticalDataTable::interpolate_in(std::size_t j, double omega) const {
  const double w0 = omega_[j], w1 = omega_[j + 1];
  const double e0 = im_eps_[j], e1 = im_eps_[j + 1];
  if (e0 > 0.0 && e1 > 0.0) {
    const double t = std::log(omega / w0) / std::log(w1 / w0);
    return e0 * std::exp(t * std::log(e1 / e0));
  }
  const double t = (omega - w0) / (w1 - w0);
  return e0 + t * (e1 - e0);
}

double OpticalDataTable::interpolate(double omega) const {
  if (omega < omega_min() || omega > omega_max()) {
    throw std::domain_error(fmt::format("omega {} outside table range [{}, {}]", omega, omega_min(),
                                        omega_max()));
  }
  auto it = std::upper_bound(omega_.begin(), omega_.end(), omega);
  std::size_t j = it == omega_.end() ? omega_.size() - 2 : static_cast<std::size_t>(it - omega_.begin()) - 1;
  return interpolate_in(j, omega);
}

double im_eps(const ImEpsModel& model, double omega) {
  if (const auto* d = std::get_if<DrudeParams>(&model)) return drude_im_eps(*d, omega);
  return oscillator_im_eps(std::get<OscillatorParams>(model), omega);
}

double kk_transform(const OpticalDataTable& table, const ExtrapolationSpec& ext, double xi,
                    const KramersKronigOptions& opts) {
  if (!(xi > 0.0)) throw std::domain_error("kk_transform requires xi > 0");
  const double total = low_region(ext.low, table.omega_min(), xi, opts) +
                       table_region(table, xi, opts) +
                       high_tail(ext.high, table.omega_max(), xi, opts);
  return 1.0 + 2.0 / units::pi * total;
}

KramersKronigCore::KramersKronigCore(OpticalDataTable table, ImEpsModel high,
                                     std::optional<DrudeParams> carriers, KramersKronigOptions opts)
    : table_(std::move(table)), high_(high), carriers_(carriers), opts_(opts) {
  std::visit([](const auto& p) { validate(p); }, high_);
  if (carriers_) validate(*carriers_);
  core_ = subtract_carriers(table_, carriers_);
}

double KramersKronigCore::contribution(double xi) const {
  if (xi < 0.0) throw std::domain_error("KramersKronigCore requires xi >= 0");
  const double total = table_region(core_, xi, opts_) +
                       high_tail(high_, table_.omega_max(), xi, opts_);
  return 2.0 / units::pi * total;
}

PermittivityCurve::PermittivityCurve(std::string label, std::vector<double> xi_ev,
                                     std::vector<double> eps)
    : label_(std::move(label)), xi_(std::move(xi_ev)), eps_(std::move(eps)) {
  if (xi_.size() != eps_.size() || xi_.empty()) {
    throw std::invalid_argument("permittivity curve: grid and values must be non-empty and equal length");
  }
  for (std::size_t i = 0; i < xi_.size(); ++i) {
    if (!(eps_[i] >= 1.0)) throw std::invalid_argument("permittivity curve: eps must be >= 1");
    if (!(xi_[i] > 0.0)) throw std::invalid_argument("permittivity curve: xi must be > 0");
    if (i > 0 && !(xi_[i] > xi_[i - 1])) {
      throw std::invalid_argument("permittivity curve: xi grid must be strictly increasing");
    }
  }
}

double PermittivityCurve::at(double xi) const {
  if (xi <= xi_.front()) return eps_.front();
  if (xi >= xi_.back()) return eps_.back();
  const auto it = std::upper_bound(xi_.begin(), xi_.end(), xi);
  const auto j = static_cast<std::size_t>(it - xi_.begin()) - 1;
  const double e0 = eps_[j] - 1.0, e1 = eps_[j + 1] - 1.0;
  const double t = std::log(xi / xi_[j]) / std::log(xi_[j + 1] / xi_[j]);
  if (e0 > 0.0 && e1 > 0.0) return 1.0 + e0 * std::exp(t * std::log(e1 / e0));
  return 1.0 + e0 + t * (e1 - e0);
}

DielectricFunction make_tabulated_dielectric(std::string name, const OpticalDataTable& table,
                                             const ExtrapolationSpec& ext, Carriers carriers,
                                             const KramersKronigOptions& opts) {
  const auto* drude = std::get_if<DrudeParams>(&ext.low);
  if (!drude) {
    throw std::invalid_argument("tabulated permittivity needs a Drude low-frequency extrapolation");
  }
  std::vector<PermittivityTerm> terms;
  terms.emplace_back(std::make_shared<const KramersKronigCore>(table, ext.high, *drude, opts));
  if (carriers == Carriers::On) terms.emplace_back(*drude);
  return {std::move(name), std::move(terms)};
}

std::pair<PermittivityCurve, PermittivityCurve> build_curve(const OpticalDataTable& table,
                                                            const ExtrapolationSpec& ext_lower,
                                                            const ExtrapolationSpec& ext_upper,
                                                            const std::vector<double>& xi_grid,
                                                            Carriers carriers,
                                                            const KramersKronigOptions& opts) {
  const char* suffix = carriers == Carriers::On ? "carriers-on" : "carriers-off";
  auto sample = [&](const ExtrapolationSpec& ext, const char* band) {
    const auto eps = make_tabulated_dielectric("", table, ext, carriers, opts);
    std::vector<double> values;
    values.reserve(xi_grid.size());
    for (double xi : xi_grid) values.push_back(eps.eval(xi));
    return PermittivityCurve(fmt::format("{} {}", band, suffix), xi_grid, std::move(values));
  };
  return {sample(ext_lower, "lower"), sample(ext_upper, "upper")};
}

double first_matsubara_ratio(const PermittivityCurve& curve_on, const PermittivityCurve& curve_off,
                             double temperature_k) {
  const double xi1 = matsubara_frequency(1, temperature_k);
  if (!curve_on.covers(xi1) || !curve_off.covers(xi1)) {
    throw DataError(fmt::format("permittivity grid does not cover the first Matsubara frequency {} eV", xi1));
  }
  return curve_on.at(xi1) / curve_off.at(xi1);
}

}  // namespace casimir
