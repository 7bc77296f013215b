#pragma once

// eps(i xi) from tabulated Im eps(omega) via the Kramers-Kronig relation
//
//   eps(i xi) = 1 + (2/pi) Int_0^inf omega Im eps(omega) / (omega^2 + xi^2) d omega
//
// split into a low-frequency extrapolation [0, omega_min], the table itself
// [omega_min, omega_max] and a high-frequency extrapolation [omega_max, inf).

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "casimir/material_models.hpp"

namespace casimir {

/// Im eps(omega) rows, omega strictly increasing, all omega > 0, im_eps >= 0.
class OpticalDataTable {
 public:
  OpticalDataTable(std::vector<double> omega_ev, std::vector<double> im_eps);

  static OpticalDataTable load_csv(const std::filesystem::path& path);
  void save_csv(const std::filesystem::path& path) const;

  const std::vector<double>& omega() const { return omega_; }
  const std::vector<double>& im_eps() const { return im_eps_; }
  std::size_t size() const { return omega_.size(); }
  double omega_min() const { return omega_.front(); }
  double omega_max() const { return omega_.back(); }

  /// Interpolated Im eps inside [omega_min, omega_max]: linear in
  /// (ln omega, ln Im eps) where both ends are positive, linear otherwise.
  double interpolate(double omega) const;
  /// Same, but with the segment index already known.
  double interpolate_in(std::size_t segment, double omega) const;

 private:
  std::vector<double> omega_;
  std::vector<double> im_eps_;
};

/// Model used for Im eps outside the tabulated range.
using ImEpsModel = std::variant<DrudeParams, OscillatorParams>;

double im_eps(const ImEpsModel& model, double omega);

struct ExtrapolationSpec {
  ImEpsModel low = DrudeParams{};
  ImEpsModel high = OscillatorParams{};
};

struct KramersKronigOptions {
  double rel_tol = 1e-9;  // per-segment Gauss-Kronrod tolerance
  unsigned max_depth = 20;
};

/// 1 + (2/pi)[I_low + I_table + I_high]. Requires xi > 0.
double kk_transform(const OpticalDataTable& table, const ExtrapolationSpec& ext, double xi,
                    const KramersKronigOptions& opts = {});

/// The carrier-free part of a tabulated permittivity: the table with the
/// Drude imaginary part subtracted node by node (clamped at zero), nothing below the
/// table, and the high-frequency model above it. contribution() returns the
/// contribution to eps(i xi) - 1 and is finite at xi = 0.
class KramersKronigCore {
 public:
  KramersKronigCore(OpticalDataTable table, ImEpsModel high, std::optional<DrudeParams> carriers,
                    KramersKronigOptions opts = {});

  double contribution(double xi) const;
  const OpticalDataTable& table() const { return table_; }
  /// The table after carrier subtraction.
  const OpticalDataTable& core_table() const { return core_; }
  const std::optional<DrudeParams>& carriers() const { return carriers_; }

 private:
  OpticalDataTable table_;
  OpticalDataTable core_ = table_;
  ImEpsModel high_;
  std::optional<DrudeParams> carriers_;
  KramersKronigOptions opts_;
};

enum class Carriers { On, Off };

/// eps(i xi) sampled on an ascending grid.
class PermittivityCurve {
 public:
  PermittivityCurve(std::string label, std::vector<double> xi_ev, std::vector<double> eps);

  const std::string& label() const { return label_; }
  const std::vector<double>& xi() const { return xi_; }
  const std::vector<double>& eps() const { return eps_; }

  bool covers(double xi) const { return xi >= xi_.front() && xi <= xi_.back(); }
  /// Interpolates ln(eps - 1) against ln xi; clamps to the end values outside the grid.
  double at(double xi) const;

 private:
  std::string label_;
  std::vector<double> xi_;
  std::vector<double> eps_;
};

/// DielectricFunction of a tabulated material: KK core plus, when carriers
/// are on, the analytic Drude term taken from ext.low.
DielectricFunction make_tabulated_dielectric(std::string name, const OpticalDataTable& table,
                                             const ExtrapolationSpec& ext, Carriers carriers,
                                             const KramersKronigOptions& opts = {});

/// Lower/upper band curves from the two high-frequency extrapolations.
/// Both specs must use a Drude low-frequency model.
std::pair<PermittivityCurve, PermittivityCurve> build_curve(const OpticalDataTable& table,
                                                            const ExtrapolationSpec& ext_lower,
                                                            const ExtrapolationSpec& ext_upper,
                                                            const std::vector<double>& xi_grid,
                                                            Carriers carriers,
                                                            const KramersKronigOptions& opts = {});

/// eps_on(i xi_1) / eps_off(i xi_1) at the first Matsubara frequency of T.
double first_matsubara_ratio(const PermittivityCurve& curve_on, const PermittivityCurve& curve_off,
                             double temperature_k);

}  // namespace casimir
