#include "casimir/material_models.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "casimir/kramers_kronig.hpp"

namespace casimir {
namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("{} must be positive and finite, got {}", what, v));
  }
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void validate(const DrudeParams& p) {
  require_positive(p.omega_p, "Drude omega_p");
  require_positive(p.gamma, "Drude gamma");
}

void validate(const PlasmaParams& p) { require_positive(p.omega_p, "plasma omega_p"); }

void validate(const OscillatorParams& p) {
  require_positive(p.g0, "oscillator g0");
  require_positive(p.gamma0, "oscillator gamma0");
  require_positive(p.omega0, "oscillator omega0");
}

void validate(const NinhamParsegianParams& p) {
  require_positive(p.c_ir, "Ninham-Parsegian C_IR");
  require_positive(p.omega_ir, "Ninham-Parsegian omega_IR");
  require_positive(p.c_uv, "Ninham-Parsegian C_UV");
  require_positive(p.omega_uv, "Ninham-Parsegian omega_UV");
}

double drude_im_eps(const DrudeParams& p, double omega) {
  if (!(omega > 0.0)) throw std::domain_error("Drude Im eps requires omega > 0");
  return p.omega_p * p.omega_p * p.gamma / (omega * (omega * omega + p.gamma * p.gamma));
}

double drude_eps_imag_axis(const DrudeParams& p, double xi) {
  if (!(xi > 0.0)) throw std::domain_error("Drude eps(i xi) diverges at xi = 0");
  return 1.0 + p.omega_p * p.omega_p / (xi * (xi + p.gamma));
}

double plasma_eps_imag_axis(const PlasmaParams& p, double xi) {
  if (!(xi > 0.0)) throw std::domain_error("plasma eps(i xi) diverges at xi = 0");
  return 1.0 + p.omega_p * p.omega_p / (xi * xi);
}

double oscillator_im_eps(const OscillatorParams& p, double omega) {
  const double w2 = omega * omega;
  const double d = w2 - p.omega0 * p.omega0;
  return p.g0 * p.gamma0 * omega / (d * d + p.gamma0 * p.gamma0 * w2);
}

double oscillator_eps_imag_axis(const OscillatorParams& p, double xi) {
  return 1.0 + p.g0 / (p.omega0 * p.omega0 + xi * xi + p.gamma0 * xi);
}

double ninham_parsegian_eps(const NinhamParsegianParams& p, double xi) {
  const double ir = xi / p.omega_ir;
  const double uv = xi / p.omega_uv;
  return 1.0 + p.c_ir / (1.0 + ir * ir) + p.c_uv / (1.0 + uv * uv);
}

DielectricFunction::DielectricFunction(std::string name, std::vector<PermittivityTerm> terms)
    : name_(std::move(name)), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    std::visit(overloaded{
                   [](const DrudeParams& p) { validate(p); },
                   [](const PlasmaParams& p) { validate(p); },
                   [](const OscillatorParams& p) { validate(p); },
                   [](const NinhamParsegianParams& p) { validate(p); },
                   [](const auto& ptr) {
                     if constexpr (!std::is_same_v<std::decay_t<decltype(ptr)>, PerfectConductor>) {
                       if (!ptr) throw std::invalid_argument("null permittivity term");
                     }
                   },
               },
               t);
  }
}

double DielectricFunction::eval(double xi) const {
  if (!(xi > 0.0)) throw std::domain_error("DielectricFunction::eval requires xi > 0");
  double eps = 1.0;
  for (const auto& t : terms_) {
    eps += std::visit(
        overloaded{
            [xi](const DrudeParams& p) { return drude_eps_imag_axis(p, xi) - 1.0; },
            [xi](const PlasmaParams& p) { return plasma_eps_imag_axis(p, xi) - 1.0; },
            [xi](const OscillatorParams& p) { return oscillator_eps_imag_axis(p, xi) - 1.0; },
            [xi](const NinhamParsegianParams& p) { return ninham_parsegian_eps(p, xi) - 1.0; },
            [xi](const std::shared_ptr<const KramersKronigCore>& c) { return c->contribution(xi); },
            [xi](const std::shared_ptr<const PermittivityCurve>& c) { return c->at(xi) - 1.0; },
            [](PerfectConductor) { return kInf; },
        },
        t);
  }
  return eps;
}

StaticLimit DielectricFunction::static_limit() const {
  StaticLimit out;
  bool drude = false;
  bool plasma = false;
  double eps0 = 1.0;
  double wp2 = 0.0;
  for (const auto& t : terms_) {
    if (std::holds_alternative<PerfectConductor>(t)) {
      out.kind = StaticLimit::Kind::PerfectConductor;
      out.eps0 = kInf;
      return out;
    }
    std::visit(overloaded{
                   [&](const DrudeParams&) { drude = true; },
                   [&](const PlasmaParams& p) {
                     plasma = true;
                     wp2 += p.omega_p * p.omega_p;
                   },
                   [&](const OscillatorParams& p) { eps0 += oscillator_eps_imag_axis(p, 0.0) - 1.0; },
                   [&](const NinhamParsegianParams& p) { eps0 += ninham_parsegian_eps(p, 0.0) - 1.0; },
                   [&](const std::shared_ptr<const KramersKronigCore>& c) { eps0 += c->contribution(0.0); },
                   [&](const std::shared_ptr<const PermittivityCurve>& c) { eps0 += c->at(0.0) - 1.0; },
                   [](PerfectConductor) {},
               },
               t);
  }
  // A Drude term dominates a plasma term at xi -> 0: eps xi^2 -> 0 for Drude
  // but omega_p^2 for plasma, so a mixed medium keeps the plasma TE limit.
  if (plasma) {
    out.kind = StaticLimit::Kind::Plasma;
    out.eps0 = kInf;
    out.omega_p_sq = wp2;
  } else if (drude) {
    out.kind = StaticLimit::Kind::Drude;
    out.eps0 = kInf;
  } else {
    out.eps0 = eps0;
  }
  return out;
}

AxisResponse DielectricFunction::response(double xi) const {
  if (xi > 0.0) {
    const double e = eval(xi);
    return {e, std::isinf(e) ? kInf : e * xi * xi};
  }
  const auto s = static_limit();
  switch (s.kind) {
    case StaticLimit::Kind::Finite:
      return {s.eps0, 0.0};
    case StaticLimit::Kind::Drude:
      return {kInf, 0.0};
    case StaticLimit::Kind::Plasma:
      return {kInf, s.omega_p_sq};
    case StaticLimit::Kind::PerfectConductor:
      return {kInf, kInf};
  }
  return {s.eps0, 0.0};
}

DielectricFunction DielectricFunction::without_carriers(std::string name) const {
  std::vector<PermittivityTerm> out;
  for (const auto& t : terms_) {
    if (!std::holds_alternative<DrudeParams>(t) && !std::holds_alternative<PlasmaParams>(t)) {
      out.push_back(t);
    }
  }
  return {std::move(name), std::move(out)};
}

DielectricFunction DielectricFunction::with_plasma_carriers(std::string name,
                                                           double override_omega_p) const {
  std::vector<PermittivityTerm> out;
  for (const auto& t : terms_) {
    if (const auto* d = std::get_if<DrudeParams>(&t)) {
      out.emplace_back(PlasmaParams{override_omega_p > 0.0 ? override_omega_p : d->omega_p});
    } else {
      out.push_back(t);
    }
  }
  return {std::move(name), std::move(out)};
}

}  // namespace casimir
