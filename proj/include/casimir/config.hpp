#pragma once

// Run configuration: a JSON document with units in every key name and a
// schema_version field. Relative paths are resolved against the directory of
// the configuration file.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "casimir/kramers_kronig.hpp"
#include "casimir/lifshitz.hpp"
#include "casimir/material_models.hpp"

namespace casimir {

inline constexpr int kSchemaVersion = 1;

/// Drude term plus Lorentz oscillators.
struct CompositeMaterial {
  std::optional<DrudeParams> drude;
  std::vector<OscillatorParams> oscillators;
  /// Plasma frequency used when carrier_model is plasma; defaults to the Drude one.
  std::optional<double> plasma_omega_p_ev;
};

enum class Surface { Top, Bottom };

/// Im eps table with extrapolations; the two high-frequency oscillators give
/// the lower and upper band. A film may have separate tables measured from
/// its top and bottom sides; `surface` picks one.
struct TabulatedMaterial {
  std::filesystem::path table_path;  // top surface
  std::optional<std::filesystem::path> bottom_table_path;
  Surface surface = Surface::Top;
  DrudeParams drude;  // low-frequency extrapolation and carrier term
  OscillatorParams high_lower;
  OscillatorParams high_upper;
  std::optional<double> plasma_omega_p_ev;

  const std::filesystem::path& selected_table() const {
    return surface == Surface::Bottom ? *bottom_table_path : table_path;
  }
};

struct MaterialSpec {
  std::string name;
  std::variant<CompositeMaterial, NinhamParsegianParams, TabulatedMaterial> model;
};

struct StackLayerSpec {
  std::string material;
  std::optional<double> thickness_nm;  // empty for the substrate
};

enum class CarrierSelection { On, Off, Both };
enum class BandSelection { Lower, Upper, Both };
/// How free carriers enter: Drude at every frequency, or the dissipationless plasma model.
enum class CarrierModel { Drude, Plasma };

struct SeparationGrid {
  double min_nm = 60.0;
  double max_nm = 150.0;
  double step_nm = 1.0;

  std::vector<double> points() const;
};

struct PermittivityGrid {
  double xi_min_ev = 0.01;
  double xi_max_ev = 100.0;
  std::size_t points = 121;

  std::vector<double> points_ev() const;  // logarithmic
};

struct RoughnessSpec {
  std::filesystem::path upper_profile_path;
  std::filesystem::path lower_profile_path;
};

struct CalibrationSpec {
  std::filesystem::path data_dir;
  double a_min_nm = 60.0;
  double a_max_nm = 600.0;
  double grid_step_nm = 1.0;
  double m_min_nm_per_v = 50.0, m_max_nm_per_v = 200.0;
  double z0_min_nm = 0.0, z0_max_nm = 100.0;
  std::optional<double> drift_nm_per_repetition;
  bool check_v0_trend = true;
  double noise_floor_pn = 0.5;
  /// Range of the electrostatic polynomial fit.
  double x_fit_min_nm = 40.0;
  double x_fit_max_nm = 2000.0;
};

struct CompareSpec {
  std::filesystem::path experiment_csv;
  std::filesystem::path theory_csv;
  std::optional<std::filesystem::path> theory_off_csv;  // carriers-off theory for the reduction profile
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  double temperature_k = 275.15;
  double radius_um = 101.2;
  std::map<std::string, MaterialSpec> materials;
  std::string upper_material;
  std::vector<StackLayerSpec> lower_layers;
  SeparationGrid separations;
  PermittivityGrid permittivity;
  /// Relative tolerance of the k quadrature; the Matsubara sum uses a tenth of it.
  double tolerance_rel = 1e-6;
  double kk_tolerance_rel = 1e-9;
  CarrierSelection carriers = CarrierSelection::Both;
  BandSelection band = BandSelection::Both;
  CarrierModel carrier_model = CarrierModel::Drude;
  std::optional<RoughnessSpec> roughness;
  std::optional<CalibrationSpec> calibration;
  std::optional<CompareSpec> compare;
  std::filesystem::path output_dir = "runs";

  /// Throws ConfigError with the offending key.
  void validate() const;

  /// Parses and validates. Throws ConfigError.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir);
  /// Pretty-printed JSON; parse(to_json()) reproduces the configuration.
  std::string to_json() const;

  MatsubaraSpec matsubara() const;
  QuadratureSpec quadrature() const;
};

CarrierSelection parse_carrier_selection(const std::string& s);
BandSelection parse_band_selection(const std::string& s);

}  // namespace casimir
