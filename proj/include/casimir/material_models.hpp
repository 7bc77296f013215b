#pragma once

// Closed-form dielectric permittivity models. All frequencies are in eV.
//
// Real-axis functions return Im eps(omega); imaginary-axis functions return
// the real value eps(i xi). The composite DielectricFunction sums the
// (eps - 1) contributions of its terms, so "core + free carriers" is a list
// with one extra entry.

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace casimir {

struct DrudeParams {
  double omega_p = 0.0;  // eV
  double gamma = 0.0;    // eV
};

struct PlasmaParams {
  double omega_p = 0.0;  // eV
};

/// Lorentz oscillator g0 gamma0 omega / ((omega^2 - omega0^2)^2 + gamma0^2 omega^2).
struct OscillatorParams {
  double g0 = 0.0;      // eV^2
  double gamma0 = 0.0;  // eV
  double omega0 = 0.0;  // eV
};

struct NinhamParsegianParams {
  double c_ir = 0.0;
  double omega_ir = 0.0;  // eV
  double c_uv = 0.0;
  double omega_uv = 0.0;  // eV
};

void validate(const DrudeParams& p);
void validate(const PlasmaParams& p);
void validate(const OscillatorParams& p);
void validate(const NinhamParsegianParams& p);

/// Im eps of the Drude model. Throws std::domain_error for omega <= 0.
double drude_im_eps(const DrudeParams& p, double omega);
/// 1 + omega_p^2 / (xi (xi + gamma)). Throws std::domain_error for xi <= 0.
double drude_eps_imag_axis(const DrudeParams& p, double xi);
/// 1 + omega_p^2 / xi^2. Throws std::domain_error for xi <= 0.
double plasma_eps_imag_axis(const PlasmaParams& p, double xi);
double oscillator_im_eps(const OscillatorParams& p, double omega);
double oscillator_eps_imag_axis(const OscillatorParams& p, double xi);
double ninham_parsegian_eps(const NinhamParsegianParams& p, double xi);

/// Behaviour of a medium at zero Matsubara frequency.
///
/// Finite: eps(0) is finite, both q and the TE coefficient reduce to the
/// nondispersive limit. Drude: eps(0) diverges but eps xi^2 -> 0, so TM -> 1
/// and TE -> 0 against vacuum. Plasma: eps xi^2 -> omega_p^2, which enters
/// the TE coefficient. PerfectConductor: r_TM = 1, r_TE = -1 at every xi.
struct StaticLimit {
  enum class Kind { Finite, Drude, Plasma, PerfectConductor };
  Kind kind = Kind::Finite;
  double eps0 = 1.0;         // Finite only
  double omega_p_sq = 0.0;   // Plasma only, eV^2
};

/// The response of a medium at one imaginary frequency, in the form the
/// reflection coefficients need. eps may be +inf (static metal or perfect
/// conductor); eps_xi2 = eps * xi^2 in eV^2 stays finite except for a
/// perfect conductor.
struct AxisResponse {
  double eps = 1.0;
  double eps_xi2 = 0.0;
};

struct PerfectConductor {};

class KramersKronigCore;
class PermittivityCurve;

/// One additive contribution to eps(i xi) - 1.
using PermittivityTerm =
    std::variant<DrudeParams, PlasmaParams, OscillatorParams, NinhamParsegianParams,
                 std::shared_ptr<const KramersKronigCore>, std::shared_ptr<const PermittivityCurve>,
                 PerfectConductor>;

/// eps(i xi) = 1 + sum of term contributions.
class DielectricFunction {
 public:
  DielectricFunction() = default;
  DielectricFunction(std::string name, std::vector<PermittivityTerm> terms);

  static DielectricFunction vacuum() { return {"vacuum", {}}; }
  static DielectricFunction perfect_conductor() { return {"perfect conductor", {PerfectConductor{}}}; }

  const std::string& name() const { return name_; }
  const std::vector<PermittivityTerm>& terms() const { return terms_; }

  /// eps(i xi) for xi > 0. Throws std::domain_error for xi <= 0.
  double eval(double xi) const;
  StaticLimit static_limit() const;
  /// eps and eps*xi^2 at xi >= 0; at xi == 0 uses static_limit().
  AxisResponse response(double xi) const;

  /// Same terms with every Drude term removed (free carriers off).
  DielectricFunction without_carriers(std::string name) const;
  /// Same terms with Drude terms replaced by plasma terms of the given
  /// plasma frequency (or their own omega_p when override_omega_p <= 0).
  DielectricFunction with_plasma_carriers(std::string name, double override_omega_p = 0.0) const;

 private:
  std::string name_;
  std::vector<PermittivityTerm> terms_;
};

}  // namespace casimir
