#include "casimir/lifshitz.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "casimir/errors.hpp"
#include "casimir/units.hpp"
#include "parallel.hpp"

namespace casimir {
namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
constexpr double kInf = std::numeric_limits<double>::infinity();

double q_of(double k2, const AxisResponse& r) {
  if (std::isinf(r.eps_xi2)) return kInf;
  return std::sqrt(k2 + r.eps_xi2);
}

double fresnel_q(Polarization pol, double qa, double qb, const AxisResponse& a,
                 const AxisResponse& b) {
  if (pol == Polarization::TM) {
    const bool ia = std::isinf(a.eps), ib = std::isinf(b.eps);
    if (ia && ib) return 0.0;
    if (ib) return 1.0;
    if (ia) return -1.0;
    if (qa == qb) return (b.eps - a.eps) / (b.eps + a.eps);
    return (b.eps * qa - a.eps * qb) / (b.eps * qa + a.eps * qb);
  }
  const bool ia = std::isinf(qa), ib = std::isinf(qb);
  if (ia && ib) return 0.0;
  if (ib) return -1.0;
  if (ia) return 1.0;
  const double s = qa + qb;
  return s == 0.0 ? 0.0 : (qa - qb) / s;
}

// Same recursion as the public overload, with q values computed once per
// layer for both polarizations.
struct StackCoefficients {
  double tm;
  double te;
};

StackCoefficients reflect_both(double k2, const AxisResponse& gap, std::span<const AxisResponse> layers,
                               std::span<const double> thickness_nm) {
  const std::size_t n = layers.size();
  auto medium = [&](std::size_t i) -> const AxisResponse& { return i == 0 ? gap : layers[i - 1]; };
  // Media are indexed 0 (gap) .. n (substrate).
  double q_below = q_of(k2, medium(n));
  double q_above = q_of(k2, medium(n - 1));
  double tm = fresnel_q(Polarization::TM, q_above, q_below, medium(n - 1), medium(n));
  double te = fresnel_q(Polarization::TE, q_above, q_below, medium(n - 1), medium(n));
  for (std::size_t j = n - 1; j >= 1; --j) {
    const double qj = q_above;
    const double qi = q_of(k2, medium(j - 1));
    const double e = std::isinf(qj) ? 0.0 : std::exp(-2.0 * qj * thickness_nm[j - 1] / units::hbar_c_ev_nm);
    const double r_tm = fresnel_q(Polarization::TM, qi, qj, medium(j - 1), medium(j));
    const double r_te = fresnel_q(Polarization::TE, qi, qj, medium(j - 1), medium(j));
    tm = (r_tm + tm * e) / (1.0 + r_tm * tm * e);
    te = (r_te + te * e) / (1.0 + r_te * te * e);
    q_above = qi;
  }
  return {tm, te};
}

}  // namespace

double matsubara_frequency(unsigned l, double temperature_k) {
  if (!(temperature_k > 0.0)) throw std::invalid_argument("temperature must be positive");
  return 2.0 * units::pi * units::boltzmann_ev_per_k * temperature_k * static_cast<double>(l);
}

double fresnel_r(Polarization pol, double xi, double k_perp, double eps_a, double eps_b) {
  if (xi < 0.0 || k_perp < 0.0) throw std::invalid_argument("fresnel_r requires xi >= 0, k_perp >= 0");
  const AxisResponse a{eps_a, eps_a * xi * xi};
  const AxisResponse b{eps_b, eps_b * xi * xi};
  return fresnel_r(pol, k_perp, a, b);
}

double fresnel_r(Polarization pol, double k_perp, const AxisResponse& a, const AxisResponse& b) {
  const double k2 = k_perp * k_perp;
  return fresnel_q(pol, q_of(k2, a), q_of(k2, b), a, b);
}

double stack_reflection(Polarization pol, double k_perp, std::span<const AxisResponse> responses,
                        std::span<const double> thickness_nm) {
  if (responses.size() < 2) throw std::invalid_argument("stack_reflection needs a gap and one layer");
  if (thickness_nm.size() + 2 != responses.size()) {
    throw std::invalid_argument("stack_reflection: one thickness per interior layer");
  }
  const auto c = reflect_both(k_perp * k_perp, responses[0], responses.subspan(1), thickness_nm);
  return pol == Polarization::TM ? c.tm : c.te;
}

double stack_reflection(Polarization pol, double xi, double k_perp, std::span<const Layer> layers) {
  if (!(xi > 0.0)) throw std::domain_error("stack_reflection on layers requires xi > 0");
  if (layers.empty()) throw std::invalid_argument("stack_reflection: empty layer list");
  std::vector<AxisResponse> resp{{1.0, xi * xi}};
  std::vector<double> d;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    resp.push_back(layers[i].permittivity.response(xi));
    const bool last = i + 1 == layers.size();
    if (last != !layers[i].thickness_nm.has_value()) {
      throw std::invalid_argument("stack_reflection: only the last layer is semi-infinite");
    }
    if (!last) d.push_back(*layers[i].thickness_nm);
  }
  return stack_reflection(pol, k_perp, resp, d);
}

void LayerStack::validate() const {
  if (upper.thickness_nm) throw std::invalid_argument("upper body must be semi-infinite");
  if (lower.empty()) throw std::invalid_argument("lower side needs at least a substrate");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const bool last = i + 1 == lower.size();
    if (last && lower[i].thickness_nm) throw std::invalid_argument("last lower layer must be semi-infinite");
    if (!last) {
      if (!lower[i].thickness_nm) throw std::invalid_argument("interior layers need a thickness");
      if (!(*lower[i].thickness_nm > 0.0)) throw std::invalid_argument("layer thickness must be > 0");
    }
  }
}

void MatsubaraSpec::validate() const {
  if (!(temperature_k > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!l_max && !(rel_tol > 0.0 && rel_tol <= 1e-2)) {
    throw std::invalid_argument("Matsubara tolerance must lie in (0, 1e-2]");
  }
}

LifshitzSolver::LifshitzSolver(LayerStack stack, MatsubaraSpec matsubara, QuadratureSpec quad,
                               double min_separation_nm)
    : stack_(std::move(stack)), matsubara_(matsubara), quad_(quad) {
  stack_.validate();
  matsubara_.validate();
  if (!(min_separation_nm > 0.0)) throw std::invalid_argument("separation must be positive");
  for (std::size_t i = 0; i + 1 < stack_.lower.size(); ++i) thickness_.push_back(*stack_.lower[i].thickness_nm);

  std::size_t count = 0;
  if (matsubara_.l_max) {
    count = *matsubara_.l_max + 1;
  } else {
    // Terms fall off like exp(-zeta_l); sample until zeta_l reaches ~ -ln(tol) + 8.
    const double zeta1 = 2.0 * min_separation_nm * matsubara_frequency(1, matsubara_.temperature_k) /
                         units::hbar_c_ev_nm;
    const double target = -std::log(matsubara_.rel_tol) + 8.0;
    count = static_cast<std::size_t>(std::min<double>(target / zeta1 + 4.0, matsubara_.l_cap));
  }
  upper_.reserve(count);
  lower_.reserve(count);
  for (unsigned l = 0; l < count; ++l) {
    auto s = sample(l);
    upper_.push_back(s.upper);
    lower_.push_back(std::move(s.lower));
  }
}

LifshitzSolver::Sample LifshitzSolver::sample(unsigned l) const {
  const double xi = matsubara_frequency(l, matsubara_.temperature_k);
  Sample s;
  s.upper = stack_.upper.permittivity.response(xi);
  for (const auto& layer : stack_.lower) s.lower.push_back(layer.permittivity.response(xi));
  return s;
}

double LifshitzSolver::matsubara_term(double a_nm, unsigned l, const Sample& s) const {
  const double xi = matsubara_frequency(l, matsubara_.temperature_k);
  const double zeta = 2.0 * a_nm * xi / units::hbar_c_ev_nm;
  const AxisResponse gap{1.0, xi * xi};
  const double scale = units::hbar_c_ev_nm / (2.0 * a_nm);  // q0 = y * scale [eV]
  const double xi2 = xi * xi;
  const std::array<AxisResponse, 1> upper_only{s.upper};
  const std::array<double, 0> no_thickness{};

  auto integrand = [&](double y) {
    const double q0 = y * scale;
    const double k2 = std::max(0.0, q0 * q0 - xi2);
    const auto up = reflect_both(k2, gap, upper_only, no_thickness);
    const auto dn = reflect_both(k2, gap, s.lower, thickness_);
    const double ey = std::exp(-y);
    return y * (std::log1p(-up.tm * dn.tm * ey) + std::log1p(-up.te * dn.te * ey));
  };

  // Panels [zeta + 2^j - 1.5, zeta + 2^(j+1) - 1.5] after a first [zeta, zeta + 0.5].
  double sum = 0.0;
  double lo = zeta;
  double width = 0.5;
  for (int panel = 0; panel < 64; ++panel) {
    const double hi = lo + width;
    double err = 0.0, l1 = 0.0;
    sum += GK::integrate(integrand, lo, hi, quad_.max_depth, quad_.rel_tol * 0.1, &err, &l1);
    if (err > quad_.rel_tol * std::max(std::abs(sum), l1) && err > 1e-300) {
      throw ConvergenceError(fmt::format("k-integral did not converge for l = {} at a = {} nm", l, a_nm));
    }
    // Beyond hi, ln(1 - x) ~ -x with x = r r e^{-y}: the tail is
    // -(r_TM r_TM + r_TE r_TE)(hi + 1) e^{-hi} with coefficients frozen at hi.
    const double q0 = hi * scale;
    const double k2 = std::max(0.0, q0 * q0 - xi2);
    const auto up = reflect_both(k2, gap, upper_only, no_thickness);
    const auto dn = reflect_both(k2, gap, s.lower, thickness_);
    const double tail = -(up.tm * dn.tm + up.te * dn.te) * (hi + 1.0) * std::exp(-hi);
    if (std::abs(tail) < 1e-3 * quad_.rel_tol * std::abs(sum) || std::abs(tail) < 1e-300) {
      sum += tail;
      break;
    }
    lo = hi;
    width *= 2.0;
  }
  return sum;
}

double LifshitzSolver::free_energy(double a_nm) const {
  if (!(a_nm > 0.0)) throw std::invalid_argument("separation must be positive");
  double sum = 0.0;
  int small = 0;
  const unsigned cap = matsubara_.l_max ? *matsubara_.l_max : matsubara_.l_cap;
  unsigned l = 0;
  for (;; ++l) {
    double term = 0.0;
    if (l < upper_.size()) {
      term = matsubara_term(a_nm, l, Sample{upper_[l], lower_[l]});
    } else {
      term = matsubara_term(a_nm, l, sample(l));
    }
    if (l == 0) term *= 0.5;
    sum += term;
    if (matsubara_.l_max) {
      if (l >= *matsubara_.l_max) break;
      continue;
    }
    small = std::abs(term) < matsubara_.rel_tol * std::abs(sum) ? small + 1 : 0;
    if (small >= 3) break;
    if (l >= cap) {
      throw ConvergenceError(fmt::format(
          "Matsubara sum not converged after {} terms at a = {} nm (last term / sum = {:.3g})", cap,
          a_nm, std::abs(term / sum)));
    }
  }
  const double kt = units::boltzmann_ev_per_k * matsubara_.temperature_k * units::electron_volt_j;
  const double a_m = a_nm * units::nm_to_m;
  return kt / (8.0 * units::pi * a_m * a_m) * sum;
}

double free_energy_per_area(const LayerStack& stack, double a_nm, const MatsubaraSpec& spec,
                            const QuadratureSpec& quad) {
  return LifshitzSolver(stack, spec, quad, a_nm).free_energy(a_nm);
}

double pfa_force_from_energy(double energy_j_m2, double radius_um) {
  return 2.0 * units::pi * radius_um * units::um_to_m * energy_j_m2 * units::n_to_pn;
}

namespace {
void warn_pfa(double a_nm, double radius_um) {
  if (a_nm / (radius_um * 1e3) > kPfaWarnRatio) {
    std::clog << fmt::format("warning: a/R = {:.3g} exceeds {}; PFA error grows like a/R\n",
                             a_nm / (radius_um * 1e3), kPfaWarnRatio);
  }
}
}  // namespace

double pfa_sphere_plate_force(const LayerStack& stack, double a_nm, double radius_um,
                              const MatsubaraSpec& spec, const QuadratureSpec& quad) {
  if (!(radius_um > 0.0)) throw std::invalid_argument("sphere radius must be positive");
  warn_pfa(a_nm, radius_um);
  return pfa_force_from_energy(free_energy_per_area(stack, a_nm, spec, quad), radius_um);
}

std::vector<double> pfa_forces(const LayerStack& stack, std::span<const double> separations_nm,
                               double radius_um, const MatsubaraSpec& spec, const QuadratureSpec& quad) {
  if (separations_nm.empty()) return {};
  if (!(radius_um > 0.0)) throw std::invalid_argument("sphere radius must be positive");
  double a_min = separations_nm.front();
  for (double a : separations_nm) {
    if (!(a > 0.0)) throw std::invalid_argument("separations must be positive");
    a_min = std::min(a_min, a);
  }
  warn_pfa(*std::max_element(separations_nm.begin(), separations_nm.end()), radius_um);
  const LifshitzSolver solver(stack, spec, quad, a_min);
  return detail::parallel_map<double>(separations_nm.size(), [&](std::size_t i) {
    return pfa_force_from_energy(solver.free_energy(separations_nm[i]), radius_um);
  });
}

std::vector<ForcePoint> force_curve(const LayerStack& lower_band, const LayerStack& upper_band,
                                    std::span<const double> separations_nm, double radius_um,
                                    const MatsubaraSpec& spec, const QuadratureSpec& quad) {
  for (std::size_t i = 1; i < separations_nm.size(); ++i) {
    if (!(separations_nm[i] > separations_nm[i - 1])) {
      throw std::invalid_argument("separations must be strictly ascending");
    }
  }
  const auto lo = pfa_forces(lower_band, separations_nm, radius_um, spec, quad);
  const auto hi = pfa_forces(upper_band, separations_nm, radius_um, spec, quad);
  std::vector<ForcePoint> out;
  out.reserve(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) out.push_back({separations_nm[i], lo[i], hi[i]});
  return out;
}

}  // namespace casimir
