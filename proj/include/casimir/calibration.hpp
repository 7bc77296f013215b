#pragma once

// Electrostatic calibration of AFM force-distance data and extraction of the
// Casimir force.
//
//   a = z0 + z_piezo + m S_def                      separation
//   k~ S_def = F_C(a) + X(a) (V - V0)^2             total force
//
// with m [nm/V] the deflection coefficient, z0 [nm] the separation on contact,
// k~ [nN/V] the force per deflection signal and V0 [mV] the residual potential.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "casimir/electrostatics.hpp"

namespace casimir {

/// A value with its 95% confidence half-width.
struct Estimate {
  double value = 0.0;
  double half_width = 0.0;
};

struct CalibrationParams {
  Estimate v0_mv;
  Estimate m_nm_per_v;
  Estimate z0_nm;
  Estimate k_tilde_nn_per_v;

  void validate() const;
};

/// One approach at a fixed applied voltage.
struct ForceDistanceCurve {
  double voltage_mv = 0.0;
  int repetition = 0;
  std::vector<double> z_piezo_nm;
  std::vector<double> s_def_v;

  void validate() const;
  /// CSV with "# voltage_mv=" and "# repetition=" metadata and a
  /// z_piezo_nm,s_def_v header.
  static ForceDistanceCurve load_csv(const std::filesystem::path& path);
  void save_csv(const std::filesystem::path& path) const;
};

/// a = z0 + z_piezo + m s_def.
double reconstruct_separation(double z_piezo_nm, double s_def_v, const CalibrationParams& calib);

/// X(a) (V - V0)^2 in pN.
double electrostatic_force(double a_nm, double v_mv, const CalibrationParams& calib, const PolynomialX& x);

struct CalibrationOptions {
  double a_min_nm = 60.0;
  double a_max_nm = 600.0;
  double grid_step_nm = 1.0;
  /// Search brackets for the nonlinear parameters.
  double m_min = 50.0, m_max = 200.0;
  double z0_min = 0.0, z0_max = 100.0;
  /// Known mechanical drift per repetition [nm], removed from z_piezo.
  std::optional<double> drift_nm_per_repetition;
  /// Abort when the per-separation vertices show a trend at this confidence.
  bool check_v0_trend = true;
  double trend_confidence = 0.99;
};

struct SeparationVertex {
  double a_nm;
  double v0_mv;
  double v0_sigma_mv;
  double curvature;  // d^2 S / dV^2 [V/mV^2]
};

struct CalibrationResult {
  CalibrationParams params;
  std::vector<SeparationVertex> vertices;  // per-separation parabola fits
  double v0_slope_mv_per_nm = 0.0;
  double v0_slope_sigma = 0.0;
  bool v0_trend = false;
  double residual_rms_v = 0.0;
  std::size_t points = 0;
};

/// Thrown by fit_calibration when V0 depends on separation.
class V0TrendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fits (V0, m, z0, k~) to curves at >= 3 distinct voltages. Each sample obeys
/// S = C(a) + X(a) (V^2 - 2 V V0) / k~ with C a cubic spline in ln a that absorbs
/// the Casimir force; for fixed (m, z0) the model is linear, and (m, z0) are
/// found by a coarse scan followed by Levenberg-Marquardt. Half-widths are 95%
/// Gauss-Newton intervals. Vertices of per-separation parabolas test whether
/// V0 depends on separation.
CalibrationResult fit_calibration(std::span<const ForceDistanceCurve> curves, const PolynomialX& x,
                                  const CalibrationOptions& opts = {});

struct ExtractionResult {
  std::vector<double> a_nm;                   // 1 nm analysis grid
  std::vector<std::vector<double>> samples;   // per grid point, one value per covering curve [pN]
  std::vector<std::vector<double>> voltages;  // matching applied voltages [mV]
  std::vector<double> mean_pn;
};

struct ExtractionOptions {
  double a_min_nm = 60.0;
  double a_max_nm = 600.0;
  double grid_step_nm = 1.0;
  std::size_t min_samples = 2;
  std::optional<double> drift_nm_per_repetition;
};

/// F = k~ S_def - X(a)(V - V0)^2 per curve, resampled onto the analysis grid
/// by a local straight-line fit over +-half a grid step, then averaged. Grid points with fewer than min_samples
/// curves are dropped; DataError if none remain.
ExtractionResult extract_casimir(std::span<const ForceDistanceCurve> curves, const CalibrationParams& calib,
                                 const PolynomialX& x, const ExtractionOptions& opts = {});

struct ErrorBudget {
  std::vector<double> a_nm;
  std::vector<double> random_pn;
  std::vector<double> systematic_pn;
  std::vector<double> total_pn;
  double separation_error_nm = 0.0;
};

struct ErrorBudgetOptions {
  /// Instrumental noise floor of the total force [pN].
  double noise_floor_pn = 0.5;
};

/// random: Student-t 95% half-width of the mean; systematic: noise floor,
/// calibration (k~) and electric-force subtraction errors averaged over the
/// applied voltages, in quadrature; total: random and systematic in quadrature.
ErrorBudget error_budget(const ExtractionResult& samples, const CalibrationParams& calib, const PolynomialX& x,
                         const ErrorBudgetOptions& opts = {});

struct HistogramBin {
  double lo;
  double hi;
  double fraction;
};

struct GaussianStats {
  double mean = 0.0;
  double sigma = 0.0;
  std::size_t count = 0;
  std::vector<HistogramBin> histogram;
};

/// Sample mean, standard deviation and normalised histogram. Needs >= 30 samples.
GaussianStats gaussian_stats(std::span<const double> samples, double bin_width);

/// True when the 95% ranges mean +- 1.96 sigma of the two distributions intersect.
bool distributions_overlap(const GaussianStats& a, const GaussianStats& b);

/// Synthetic data for tests and dry runs.
struct SynthesisSpec {
  CalibrationParams truth;
  double radius_um = 101.2;
  std::vector<double> voltages_mv;
  int repetitions = 10;
  double z_start_nm = 0.0;   // closest piezo position attempted
  double z_end_nm = 2000.0;
  double z_step_nm = 0.2;
  double noise_sigma_v = 0.0;
  double drift_nm_per_repetition = 0.0;
  /// V0 seen at separation a is v0 + v0_slope * (a - 100 nm).
  double v0_slope_mv_per_nm = 0.0;
  std::uint64_t seed = 1;
};

/// Generates approach curves for `casimir_pn(a)`: for each z_piezo the
/// deflection is solved self-consistently. Curves stop where the cantilever
/// would jump to contact.
std::vector<ForceDistanceCurve> synthesize_curves(const SynthesisSpec& spec,
                                                  const std::function<double(double)>& casimir_pn,
                                                  const PolynomialX& x);

/// Distinct voltages used by the paper-like synthetic datasets (untreated sample).
std::vector<double> default_voltages(double v0_mv);

}  // namespace casimir
