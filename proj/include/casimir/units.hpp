#pragma once

#include <numbers>

namespace casimir::units {

// CODATA 2018.
inline constexpr double hbar_c_ev_nm = 197.3269804;
inline constexpr double boltzmann_ev_per_k = 8.617333262e-5;
inline constexpr double electron_volt_j = 1.602176634e-19;
inline constexpr double hbar_js = 1.054571817e-34;
inline constexpr double speed_of_light_m_s = 299792458.0;
inline constexpr double vacuum_permittivity_f_m = 8.8541878128e-12;

inline constexpr double pi = std::numbers::pi;

inline constexpr double nm_to_m = 1e-9;
inline constexpr double um_to_m = 1e-6;
inline constexpr double mv_to_v = 1e-3;
inline constexpr double n_to_pn = 1e12;

inline constexpr double celsius_to_kelvin(double c) { return c + 273.15; }

}  // namespace casimir::units
