#pragma once

// Command orchestration: builds materials and stacks from a RunConfig, runs
// the computations and writes CSV files plus a text summary into a run
// directory.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "casimir/calibration.hpp"
#include "casimir/config.hpp"
#include "casimir/kramers_kronig.hpp"
#include "casimir/lifshitz.hpp"

namespace casimir {

enum class Band { Lower, Upper };

/// Permittivity of a configured material for one band and carrier setting.
/// Non-tabulated materials are the same in both bands.
DielectricFunction build_material(const RunConfig& cfg, const std::string& name, Band band, Carriers carriers);
LayerStack build_stack(const RunConfig& cfg, Band band, Carriers carriers);

std::vector<Carriers> selected_carriers(CarrierSelection s);
const char* carriers_label(Carriers c);  // "on" / "off"

struct TheoryCurve {
  Carriers carriers;
  std::vector<ForcePoint> points;  // roughness-corrected when profiles are configured
  std::vector<ForcePoint> smooth;  // without roughness
};

/// Forces on the configured separation grid for each selected carrier setting.
std::vector<TheoryCurve> compute_theory(const RunConfig& cfg);

struct MaterialPermittivity {
  std::string material;
  Carriers carriers;
  std::vector<double> xi_ev;
  std::vector<double> eps_lower;
  std::vector<double> eps_upper;
};

/// eps(i xi) of every material in the stack on the configured grid.
std::vector<MaterialPermittivity> compute_permittivity(const RunConfig& cfg);

void save_force_curve(const std::filesystem::path& path, const std::vector<ForcePoint>& points);
std::vector<ForcePoint> load_force_curve(const std::filesystem::path& path);

/// All *.csv files in `dir`, sorted by name. Every failing file is named in
/// the DataError, not just the first.
std::vector<ForceDistanceCurve> load_curve_directory(const std::filesystem::path& dir);

struct ExperimentPoint {
  double a_nm;
  double mean_pn;
  double random_pn;
  double systematic_pn;
  double total_pn;
  std::size_t samples;
};

void save_experiment(const std::filesystem::path& path, const std::vector<ExperimentPoint>& points);
std::vector<ExperimentPoint> load_experiment(const std::filesystem::path& path);

struct ComparisonRow {
  double a_nm;
  double mean_pn;
  double error_pn;
  double theory_low_pn;
  double theory_high_pn;
  bool agree;  // [mean - error, mean + error] intersects [low, high]
};

struct ReductionRow {
  double a_nm;
  double lower;  // (F_on - F_off) / F_on per band
  double upper;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  double fraction_agreeing = 0.0;
  std::vector<ReductionRow> reduction;  // empty without a carriers-off theory
  double min_reduction = 0.0;
  double max_reduction = 0.0;
};

/// Theory is interpolated linearly onto the experiment separations it covers.
/// DataError when no experimental point lies inside the theory grid.
ComparisonReport compare(const std::vector<ExperimentPoint>& experiment, const std::vector<ForcePoint>& theory,
                         BandSelection band, const std::vector<ForcePoint>* theory_off = nullptr);

/// (F_on - F_off) / F_on on the points common to both curves.
std::vector<ReductionRow> reduction_profile(const std::vector<ForcePoint>& on, const std::vector<ForcePoint>& off);

/// The electrostatic polynomial for the configured sphere and calibration range.
PolynomialX calibration_polynomial(const RunConfig& cfg);
CalibrationOptions calibration_options(const CalibrationSpec& spec);

struct ExtractOutcome {
  CalibrationResult calibration;
  std::vector<ExperimentPoint> points;
};

ExtractOutcome extract_experiment(const RunConfig& cfg);

// Subcommands. Each writes into `run_dir`, which must exist. Everything is
// computed before the first file is written.
void run_theory(const RunConfig& cfg, const std::filesystem::path& run_dir);
void run_permittivity(const RunConfig& cfg, const std::filesystem::path& run_dir);
void run_calibrate(const RunConfig& cfg, const std::filesystem::path& run_dir);
void run_extract(const RunConfig& cfg, const std::filesystem::path& run_dir);
ComparisonReport run_compare(const RunConfig& cfg, const std::filesystem::path& run_dir);

/// <out>/<command>_<UTC timestamp>, with a numeric suffix if taken. Also
/// writes the resolved configuration as config.json.
std::filesystem::path make_run_directory(const std::filesystem::path& out, const std::string& command,
                                         const RunConfig& cfg);

}  // namespace casimir
