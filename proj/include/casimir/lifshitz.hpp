#pragma once

// Finite-temperature Lifshitz free energy of a planar layered system and the
// proximity-force sphere-plate force.
//
//   E(a) = (k_B T / 2 pi) sum'_l Int_0^inf k dk sum_pol ln(1 - r_up r_down e^{-2 q a})
//
// The k integral is done in y = 2 q a, which maps it onto [2 xi a / (hbar c), inf):
//
//   E(a) = (k_B T / (8 pi a^2)) sum'_l Int_{zeta_l}^inf y dy sum_pol ln(1 - r r e^{-y}).

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "casimir/material_models.hpp"

namespace casimir {

enum class Polarization { TM, TE };

/// 2 pi k_B T l / hbar in eV.
double matsubara_frequency(unsigned l, double temperature_k);

/// Interface reflection coefficient from medium a into medium b at imaginary
/// frequency xi and in-plane wave vector k_perp (both in eV, i.e. hbar c k).
double fresnel_r(Polarization pol, double xi, double k_perp, double eps_a, double eps_b);
/// Same with zero-frequency limits carried by the responses (see AxisResponse).
double fresnel_r(Polarization pol, double k_perp, const AxisResponse& a, const AxisResponse& b);

struct Layer {
  DielectricFunction permittivity;
  std::optional<double> thickness_nm;  // empty: semi-infinite
};

/// Reflection coefficient seen from vacuum of `layers` (top first). The last
/// layer must be semi-infinite, the others finite. Requires xi > 0.
double stack_reflection(Polarization pol, double xi, double k_perp, std::span<const Layer> layers);
/// Recursive form on precomputed responses: responses[0] is the gap medium,
/// responses[1..n] the layers; thickness_nm[i] belongs to responses[i + 1]
/// and has n - 1 entries.
double stack_reflection(Polarization pol, double k_perp, std::span<const AxisResponse> responses,
                        std::span<const double> thickness_nm);

/// upper half-space | vacuum gap | lower layers (films, then a substrate).
struct LayerStack {
  Layer upper;
  std::vector<Layer> lower;

  void validate() const;
};

struct MatsubaraSpec {
  double temperature_k = 275.15;
  /// Stop once |term| < rel_tol |sum| for three consecutive l.
  double rel_tol = 1e-7;
  /// Fixed truncation; overrides rel_tol when set.
  std::optional<unsigned> l_max;
  /// Hard cap for the adaptive truncation.
  unsigned l_cap = 1'000'000;

  void validate() const;
};

struct QuadratureSpec {
  double rel_tol = 1e-6;
  unsigned max_depth = 12;
};

/// Lifshitz solver for one stack at one temperature. Permittivities at the
/// Matsubara frequencies are sampled once at construction (up to the number
/// of terms the smallest separation needs) and then shared read-only, so
/// free_energy() may be called concurrently.
class LifshitzSolver {
 public:
  LifshitzSolver(LayerStack stack, MatsubaraSpec matsubara, QuadratureSpec quad,
                 double min_separation_nm);

  /// Free energy per unit area in J/m^2.
  double free_energy(double a_nm) const;
  /// Number of pre-sampled Matsubara frequencies.
  std::size_t sampled_terms() const { return upper_.size(); }

 private:
  struct Sample {
    AxisResponse upper;
    std::vector<AxisResponse> lower;
  };
  Sample sample(unsigned l) const;
  double matsubara_term(double a_nm, unsigned l, const Sample& s) const;

  LayerStack stack_;
  MatsubaraSpec matsubara_;
  QuadratureSpec quad_;
  std::vector<double> thickness_;
  std::vector<AxisResponse> upper_;
  std::vector<std::vector<AxisResponse>> lower_;
};

/// Free energy per unit area [J/m^2] at separation a.
double free_energy_per_area(const LayerStack& stack, double a_nm, const MatsubaraSpec& spec,
                            const QuadratureSpec& quad = {});

/// PFA sphere-plate force F = 2 pi R E(a) in pN (attraction negative).
double pfa_sphere_plate_force(const LayerStack& stack, double a_nm, double radius_um,
                              const MatsubaraSpec& spec, const QuadratureSpec& quad = {});
double pfa_force_from_energy(double energy_j_m2, double radius_um);

/// PFA is accurate to about a/R; warn above this.
inline constexpr double kPfaWarnRatio = 0.01;

struct ForcePoint {
  double a_nm;
  double f_lower_pn;
  double f_upper_pn;
};

/// Forces over separations for the two permittivity bands. Separations must
/// be ascending; evaluation is parallel across separations.
std::vector<ForcePoint> force_curve(const LayerStack& lower_band, const LayerStack& upper_band,
                                    std::span<const double> separations_nm, double radius_um,
                                    const MatsubaraSpec& spec, const QuadratureSpec& quad = {});

/// PFA forces [pN] for one stack over many separations (parallel).
std::vector<double> pfa_forces(const LayerStack& stack, std::span<const double> separations_nm,
                               double radius_um, const MatsubaraSpec& spec,
                               const QuadratureSpec& quad = {});

}  // namespace casimir
