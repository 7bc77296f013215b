#include "casimir/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "casimir/csv.hpp"
#include "casimir/electrostatics.hpp"
#include "casimir/errors.hpp"
#include "casimir/roughness.hpp"

namespace casimir {
namespace {

const MaterialSpec& material(const RunConfig& cfg, const std::string& name) {
  const auto it = cfg.materials.find(name);
  if (it == cfg.materials.end()) throw ConfigError(fmt::format("material '{}' is not defined", name));
  return it->second;
}

ExtrapolationSpec extrapolation(const TabulatedMaterial& t, Band band) {
  return {t.drude, band == Band::Lower ? t.high_lower : t.high_upper};
}

KramersKronigOptions kk_options(const RunConfig& cfg) {
  KramersKronigOptions o;
  o.rel_tol = cfg.kk_tolerance_rel;
  return o;
}

std::vector<std::string> stack_materials(const RunConfig& cfg) {
  std::vector<std::string> out{cfg.upper_material};
  for (const auto& l : cfg.lower_layers) {
    if (std::find(out.begin(), out.end(), l.material) == out.end()) out.push_back(l.material);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

// Linear interpolation of the theory on a; nullopt outside the grid.
std::optional<std::pair<double, double>> theory_at(const std::vector<ForcePoint>& t, double a) {
  if (t.empty() || a < t.front().a_nm - 1e-9 || a > t.back().a_nm + 1e-9) return std::nullopt;
  auto hi = std::lower_bound(t.begin(), t.end(), a, [](const ForcePoint& p, double v) { return p.a_nm < v; });
  if (hi == t.end()) hi = std::prev(t.end());
  if (std::abs(hi->a_nm - a) <= 1e-9 || hi == t.begin()) return std::pair{hi->f_lower_pn, hi->f_upper_pn};
  const auto lo = std::prev(hi);
  const double w = (a - lo->a_nm) / (hi->a_nm - lo->a_nm);
  return std::pair{lo->f_lower_pn + w * (hi->f_lower_pn - lo->f_lower_pn),
                   lo->f_upper_pn + w * (hi->f_upper_pn - lo->f_upper_pn)};
}

std::string format_calibration(const CalibrationResult& r) {
  const auto& p = r.params;
  std::string s;
  s += fmt::format("V0 = {:.2f} +- {:.2f} mV\n", p.v0_mv.value, p.v0_mv.half_width);
  s += fmt::format("m  = {:.3f} +- {:.3f} nm/V\n", p.m_nm_per_v.value, p.m_nm_per_v.half_width);
  s += fmt::format("z0 = {:.3f} +- {:.3f} nm\n", p.z0_nm.value, p.z0_nm.half_width);
  s += fmt::format("k~ = {:.4f} +- {:.4f} nN/V\n", p.k_tilde_nn_per_v.value, p.k_tilde_nn_per_v.half_width);
  s += fmt::format("samples used: {}, residual rms {:.3g} V\n", r.points, r.residual_rms_v);
  s += fmt::format("V0 trend over separation: {:.3g} +- {:.2g} mV/nm ({} at {:g}%)\n", r.v0_slope_mv_per_nm,
                   r.v0_slope_sigma, r.v0_trend ? "significant" : "none", 100 * CalibrationOptions{}.trend_confidence);
  return s;
}

void save_calibration(const std::filesystem::path& dir, const CalibrationResult& r) {
  const auto& p = r.params;
  csv::write(dir / "calibration.csv",
             {"v0_mv", "v0_half_width_mv", "m_nm_per_v", "m_half_width_nm_per_v", "z0_nm", "z0_half_width_nm",
              "k_tilde_nn_per_v", "k_tilde_half_width_nn_per_v", "residual_rms_v", "v0_slope_mv_per_nm",
              "v0_slope_sigma_mv_per_nm"},
             {{p.v0_mv.value, p.v0_mv.half_width, p.m_nm_per_v.value, p.m_nm_per_v.half_width, p.z0_nm.value,
               p.z0_nm.half_width, p.k_tilde_nn_per_v.value, p.k_tilde_nn_per_v.half_width, r.residual_rms_v,
               r.v0_slope_mv_per_nm, r.v0_slope_sigma}});
  std::vector<std::vector<double>> rows;
  for (const auto& v : r.vertices) rows.push_back({v.a_nm, v.v0_mv, v.v0_sigma_mv, v.curvature});
  csv::write(dir / "vertices.csv", {"a_nm", "v0_mv", "v0_sigma_mv", "curvature_v_per_mv2"}, rows);
}

CalibrationResult calibrate(const RunConfig& cfg, const std::vector<ForceDistanceCurve>& curves,
                            const PolynomialX& x) {
  return fit_calibration(curves, x, calibration_options(*cfg.calibration));
}

const CalibrationSpec& require_calibration(const RunConfig& cfg) {
  if (!cfg.calibration) throw ConfigError("calibration: section missing (needs at least data_dir)");
  return *cfg.calibration;
}

}  // namespace

std::vector<Carriers> selected_carriers(CarrierSelection s) {
  switch (s) {
    case CarrierSelection::On: return {Carriers::On};
    case CarrierSelection::Off: return {Carriers::Off};
    default: return {Carriers::On, Carriers::Off};
  }
}

const char* carriers_label(Carriers c) { return c == Carriers::On ? "on" : "off"; }

DielectricFunction build_material(const RunConfig& cfg, const std::string& name, Band band, Carriers carriers) {
  const auto& spec = material(cfg, name);
  DielectricFunction eps = std::visit(
      [&](const auto& m) -> DielectricFunction {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CompositeMaterial>) {
          std::vector<PermittivityTerm> terms;
          if (m.drude) terms.emplace_back(*m.drude);
          for (const auto& o : m.oscillators) terms.emplace_back(o);
          return {name, std::move(terms)};
        } else if constexpr (std::is_same_v<T, NinhamParsegianParams>) {
          return {name, {m}};
        } else {
          const auto table = OpticalDataTable::load_csv(m.selected_table());
          return make_tabulated_dielectric(name, table, extrapolation(m, band), carriers, kk_options(cfg));
        }
      },
      spec.model);
  if (cfg.carrier_model == CarrierModel::Plasma) {
    const auto wp = std::visit(
        [](const auto& m) -> std::optional<double> {
          if constexpr (requires { m.plasma_omega_p_ev; }) return m.plasma_omega_p_ev;
          return std::nullopt;
        },
        spec.model);
    eps = eps.with_plasma_carriers(name, wp.value_or(0.0));
  }
  return eps;
}

LayerStack build_stack(const RunConfig& cfg, Band band, Carriers carriers) {
  std::map<std::string, DielectricFunction> built;
  auto get = [&](const std::string& n) -> const DielectricFunction& {
    auto it = built.find(n);
    if (it == built.end()) it = built.emplace(n, build_material(cfg, n, band, carriers)).first;
    return it->second;
  };
  LayerStack s;
  s.upper = {get(cfg.upper_material), std::nullopt};
  for (const auto& l : cfg.lower_layers) s.lower.push_back({get(l.material), l.thickness_nm});
  s.validate();
  return s;
}

std::vector<TheoryCurve> compute_theory(const RunConfig& cfg) {
  const auto grid = cfg.separations.points();
  const auto ms = cfg.matsubara();
  const auto quad = cfg.quadrature();
  std::optional<std::pair<RoughnessProfile, RoughnessProfile>> profiles;
  if (cfg.roughness) {
    profiles.emplace(RoughnessProfile::load_csv(cfg.roughness->upper_profile_path),
                     RoughnessProfile::load_csv(cfg.roughness->lower_profile_path));
    const double need = min_rough_separation(profiles->first, profiles->second);
    if (!(grid.front() > need)) {
      throw ConfigError(fmt::format(
          "separations_nm.min_nm = {} nm is too small for the roughness profiles (need > {:.2f} nm)", grid.front(),
          need));
    }
  }

  std::vector<TheoryCurve> out;
  for (const auto carriers : selected_carriers(cfg.carriers)) {
    const auto lower = build_stack(cfg, Band::Lower, carriers);
    const auto upper = build_stack(cfg, Band::Upper, carriers);
    TheoryCurve curve{carriers, {}, force_curve(lower, upper, grid, cfg.radius_um, ms, quad)};
    if (!profiles) {
      curve.points = curve.smooth;
    } else {
      const auto& [p1, p2] = *profiles;
      const double lo = grid.front() - min_rough_separation(p1, p2);
      const double hi = grid.back() + zero_roughness_level(p1) + zero_roughness_level(p2);
      auto make = [&](const LayerStack& stack) {
        return ForceInterpolant(0.999 * lo, 1.001 * hi, 0.01, [&](std::span<const double> a) {
          return pfa_forces(stack, a, cfg.radius_um, ms, quad);
        });
      };
      const auto fl = make(lower);
      const auto fu = make(upper);
      for (double a : grid) {
        curve.points.push_back(
            {a, rough_force(std::cref(fl), p1, p2, a), rough_force(std::cref(fu), p1, p2, a)});
      }
    }
    out.push_back(std::move(curve));
  }
  return out;
}

std::vector<MaterialPermittivity> compute_permittivity(const RunConfig& cfg) {
  const auto xi = cfg.permittivity.points_ev();
  std::vector<MaterialPermittivity> out;
  for (const auto& name : stack_materials(cfg)) {
    const bool tabulated = std::holds_alternative<TabulatedMaterial>(material(cfg, name).model);
    const auto settings = tabulated ? selected_carriers(cfg.carriers) : std::vector<Carriers>{Carriers::On};
    for (const auto carriers : settings) {
      MaterialPermittivity p{name, carriers, xi, {}, {}};
      const auto lo = build_material(cfg, name, Band::Lower, carriers);
      const auto up = build_material(cfg, name, Band::Upper, carriers);
      for (double v : xi) {
        p.eps_lower.push_back(lo.eval(v));
        p.eps_upper.push_back(up.eval(v));
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

void save_force_curve(const std::filesystem::path& path, const std::vector<ForcePoint>& points) {
  std::vector<std::vector<double>> rows;
  rows.reserve(points.size());
  for (const auto& p : points) rows.push_back({p.a_nm, p.f_lower_pn, p.f_upper_pn});
  csv::write(path, {"a_nm", "f_lower_pn", "f_upper_pn"}, rows);
}

std::vector<ForcePoint> load_force_curve(const std::filesystem::path& path) {
  const auto t = csv::read(path, {"a_nm", "f_lower_pn", "f_upper_pn"});
  std::vector<ForcePoint> out;
  for (const auto& r : t.rows) {
    if (!out.empty() && !(r[0] > out.back().a_nm)) {
      throw DataError(fmt::format("{}: a_nm must be strictly ascending", path.string()));
    }
    out.push_back({r[0], r[1], r[2]});
  }
  if (out.empty()) throw DataError(fmt::format("{}: no rows", path.string()));
  return out;
}

std::vector<ForceDistanceCurve> load_curve_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError(fmt::format("raw data directory '{}' does not exist", dir.string()));
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(fmt::format("raw data directory '{}' contains no .csv files", dir.string()));
  std::vector<ForceDistanceCurve> curves;
  std::vector<std::string> problems;
  for (const auto& f : files) {
    try {
      curves.push_back(ForceDistanceCurve::load_csv(f));
    } catch (const DataError& e) {
      problems.emplace_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = fmt::format("{} of {} force-distance files failed to load:", problems.size(), files.size());
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  return curves;
}

void save_experiment(const std::filesystem::path& path, const std::vector<ExperimentPoint>& points) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : points) {
    rows.push_back({p.a_nm, p.mean_pn, p.random_pn, p.systematic_pn, p.total_pn, static_cast<double>(p.samples)});
  }
  csv::write(path, {"a_nm", "mean_pn", "random_pn", "systematic_pn", "total_pn", "samples"}, rows);
}

std::vector<ExperimentPoint> load_experiment(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const auto a = t.values("a_nm"), mean = t.values("mean_pn"), total = t.values("total_pn");
  const bool full = std::find(t.header.begin(), t.header.end(), "random_pn") != t.header.end();
  std::vector<ExperimentPoint> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i > 0 && !(a[i] > a[i - 1])) throw DataError(fmt::format("{}: a_nm must be strictly ascending", path.string()));
    if (!(total[i] >= 0.0)) throw DataError(fmt::format("{}: total_pn must be >= 0", path.string()));
    ExperimentPoint p{a[i], mean[i], 0.0, 0.0, total[i], 0};
    if (full) {
      p.random_pn = t.rows[i][t.column("random_pn")];
      p.systematic_pn = t.rows[i][t.column("systematic_pn")];
      p.samples = static_cast<std::size_t>(t.rows[i][t.column("samples")]);
    }
    out.push_back(p);
  }
  if (out.empty()) throw DataError(fmt::format("{}: no rows", path.string()));
  return out;
}

std::vector<ReductionRow> reduction_profile(const std::vector<ForcePoint>& on, const std::vector<ForcePoint>& off) {
  std::vector<ReductionRow> out;
  for (const auto& p : on) {
    const auto q = theory_at(off, p.a_nm);
    if (!q) continue;
    out.push_back({p.a_nm, (p.f_lower_pn - q->first) / p.f_lower_pn, (p.f_upper_pn - q->second) / p.f_upper_pn});
  }
  return out;
}

ComparisonReport compare(const std::vector<ExperimentPoint>& experiment, const std::vector<ForcePoint>& theory,
                         BandSelection band, const std::vector<ForcePoint>* theory_off) {
  ComparisonReport r;
  std::size_t agree = 0;
  for (const auto& e : experiment) {
    const auto t = theory_at(theory, e.a_nm);
    if (!t) continue;
    double lo = 0.0, hi = 0.0;
    switch (band) {
      case BandSelection::Lower: lo = hi = t->first; break;
      case BandSelection::Upper: lo = hi = t->second; break;
      default: lo = std::min(t->first, t->second), hi = std::max(t->first, t->second);
    }
    const bool ok = e.mean_pn - e.total_pn <= hi && e.mean_pn + e.total_pn >= lo;
    agree += ok;
    r.rows.push_back({e.a_nm, e.mean_pn, e.total_pn, lo, hi, ok});
  }
  if (r.rows.empty()) throw DataError("experiment and theory separation grids do not overlap");
  r.fraction_agreeing = static_cast<double>(agree) / static_cast<double>(r.rows.size());
  if (theory_off) {
    r.reduction = reduction_profile(theory, *theory_off);
    if (!r.reduction.empty()) {
      r.min_reduction = std::numeric_limits<double>::infinity();
      r.max_reduction = -std::numeric_limits<double>::infinity();
      for (const auto& row : r.reduction) {
        r.min_reduction = std::min({r.min_reduction, row.lower, row.upper});
        r.max_reduction = std::max({r.max_reduction, row.lower, row.upper});
      }
    }
  }
  return r;
}

PolynomialX calibration_polynomial(const RunConfig& cfg) {
  const auto& c = require_calibration(cfg);
  return fit_polynomial_x(cfg.radius_um, c.x_fit_min_nm, c.x_fit_max_nm);
}

CalibrationOptions calibration_options(const CalibrationSpec& spec) {
  CalibrationOptions o;
  o.a_min_nm = spec.a_min_nm;
  o.a_max_nm = spec.a_max_nm;
  o.grid_step_nm = spec.grid_step_nm;
  o.m_min = spec.m_min_nm_per_v;
  o.m_max = spec.m_max_nm_per_v;
  o.z0_min = spec.z0_min_nm;
  o.z0_max = spec.z0_max_nm;
  o.drift_nm_per_repetition = spec.drift_nm_per_repetition;
  o.check_v0_trend = spec.check_v0_trend;
  return o;
}

ExtractOutcome extract_experiment(const RunConfig& cfg) {
  const auto& spec = require_calibration(cfg);
  const auto curves = load_curve_directory(spec.data_dir);
  const auto x = calibration_polynomial(cfg);
  ExtractOutcome out{calibrate(cfg, curves, x), {}};

  ExtractionOptions eo;
  eo.a_min_nm = cfg.separations.min_nm;
  eo.a_max_nm = cfg.separations.max_nm;
  eo.grid_step_nm = cfg.separations.step_nm;
  eo.drift_nm_per_repetition = spec.drift_nm_per_repetition;
  const auto ex = extract_casimir(curves, out.calibration.params, x, eo);
  ErrorBudgetOptions bo;
  bo.noise_floor_pn = spec.noise_floor_pn;
  const auto budget = error_budget(ex, out.calibration.params, x, bo);
  for (std::size_t i = 0; i < ex.a_nm.size(); ++i) {
    out.points.push_back({ex.a_nm[i], ex.mean_pn[i], budget.random_pn[i], budget.systematic_pn[i],
                          budget.total_pn[i], ex.samples[i].size()});
  }
  return out;
}

void run_theory(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  const auto curves = compute_theory(cfg);
  const auto perm = compute_permittivity(cfg);

  std::string summary = fmt::format("sphere radius {} um, T = {} K, {} separations in [{}, {}] nm{}\n", cfg.radius_um,
                                    cfg.temperature_k, curves.front().points.size(), cfg.separations.min_nm,
                                    cfg.separations.max_nm, cfg.roughness ? ", roughness corrected" : "");
  for (const auto& c : curves) {
    save_force_curve(run_dir / fmt::format("force_carriers_{}.csv", carriers_label(c.carriers)), c.points);
    if (cfg.roughness) {
      save_force_curve(run_dir / fmt::format("force_smooth_carriers_{}.csv", carriers_label(c.carriers)), c.smooth);
    }
    const auto& f = c.points.front();
    const auto& b = c.points.back();
    summary += fmt::format("carriers {}: F({} nm) in [{:.2f}, {:.2f}] pN, F({} nm) in [{:.3f}, {:.3f}] pN\n",
                           carriers_label(c.carriers), f.a_nm, f.f_lower_pn, f.f_upper_pn, b.a_nm, b.f_lower_pn,
                           b.f_upper_pn);
  }
  if (curves.size() == 2) {
    std::vector<std::vector<double>> rows;
    double lo = 1e300, hi = -1e300;
    for (const auto& r : reduction_profile(curves[0].points, curves[1].points)) {
      rows.push_back({r.a_nm, r.lower, r.upper});
      lo = std::min({lo, r.lower, r.upper});
      hi = std::max({hi, r.lower, r.upper});
    }
    csv::write(run_dir / "reduction.csv", {"a_nm", "reduction_lower", "reduction_upper"}, rows);
    summary += fmt::format("carriers-off reduction of |F|: {:.1f}% to {:.1f}%\n", 100 * lo, 100 * hi);
  }
  for (const auto& p : perm) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < p.xi_ev.size(); ++i) rows.push_back({p.xi_ev[i], p.eps_lower[i], p.eps_upper[i]});
    csv::write(run_dir / fmt::format("permittivity_{}_carriers_{}.csv", p.material, carriers_label(p.carriers)),
               {"xi_ev", "eps_lower", "eps_upper"}, rows);
  }
  write_text(run_dir / "summary.txt", summary);
}

void run_permittivity(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  const auto perm = compute_permittivity(cfg);
  const double xi1 = matsubara_frequency(1, cfg.temperature_k);
  std::string summary = fmt::format("first Matsubara frequency at {} K: {:.5f} eV\n", cfg.temperature_k, xi1);
  std::map<std::string, std::map<Carriers, std::pair<double, double>>> at_xi1;
  for (const auto& p : perm) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < p.xi_ev.size(); ++i) rows.push_back({p.xi_ev[i], p.eps_lower[i], p.eps_upper[i]});
    csv::write(run_dir / fmt::format("permittivity_{}_carriers_{}.csv", p.material, carriers_label(p.carriers)),
               {"xi_ev", "eps_lower", "eps_upper"}, rows);
    const auto lo = build_material(cfg, p.material, Band::Lower, p.carriers).eval(xi1);
    const auto up = build_material(cfg, p.material, Band::Upper, p.carriers).eval(xi1);
    at_xi1[p.material][p.carriers] = {lo, up};
    summary += fmt::format("{} carriers {}: eps(i xi_1) = {:.4g} (lower), {:.4g} (upper)\n", p.material,
                           carriers_label(p.carriers), lo, up);
  }
  for (const auto& [name, m] : at_xi1) {
    if (m.size() != 2) continue;
    const auto& on = m.at(Carriers::On);
    const auto& off = m.at(Carriers::Off);
    summary += fmt::format("{}: eps_on / eps_off at xi_1 = {:.2f} (lower), {:.2f} (upper)\n", name,
                           on.first / off.first, on.second / off.second);
  }
  write_text(run_dir / "summary.txt", summary);
}

void run_calibrate(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  const auto& spec = require_calibration(cfg);
  const auto curves = load_curve_directory(spec.data_dir);
  const auto x = calibration_polynomial(cfg);
  const auto r = calibrate(cfg, curves, x);
  save_calibration(run_dir, r);
  write_text(run_dir / "summary.txt",
             fmt::format("{} curves from {}\nelectrostatic polynomial certified to {:.2g} on [{}, {}] nm\n{}",
                         curves.size(), spec.data_dir.string(), x.certified_max_rel_error(), x.a_min(), x.a_max(),
                         format_calibration(r)));
}

void run_extract(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  const auto out = extract_experiment(cfg);
  save_calibration(run_dir, out.calibration);
  save_experiment(run_dir / "experiment.csv", out.points);
  std::string s = format_calibration(out.calibration);
  double rnd = 0.0, sys = 0.0;
  for (const auto& p : out.points) rnd += p.random_pn, sys += p.systematic_pn;
  const double n = static_cast<double>(out.points.size());
  s += fmt::format("extracted {} separations in [{}, {}] nm; mean random error {:.2f} pN, mean systematic {:.2f} pN\n",
                   out.points.size(), out.points.front().a_nm, out.points.back().a_nm, rnd / n, sys / n);
  write_text(run_dir / "summary.txt", s);
}

ComparisonReport run_compare(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  if (!cfg.compare) throw ConfigError("compare: section missing (needs experiment_csv and theory_csv)");
  const auto& spec = *cfg.compare;
  const auto experiment = load_experiment(spec.experiment_csv);
  const auto theory = load_force_curve(spec.theory_csv);
  std::optional<std::vector<ForcePoint>> off;
  if (spec.theory_off_csv) off = load_force_curve(*spec.theory_off_csv);
  const auto r = compare(experiment, theory, cfg.band, off ? &*off : nullptr);

  std::vector<std::vector<double>> rows;
  for (const auto& c : r.rows) {
    rows.push_back({c.a_nm, c.mean_pn, c.error_pn, c.theory_low_pn, c.theory_high_pn, c.agree ? 1.0 : 0.0});
  }
  csv::write(run_dir / "comparison.csv", {"a_nm", "mean_pn", "total_error_pn", "theory_low_pn", "theory_high_pn", "agree"},
             rows);
  std::string s = fmt::format("{} of {} separations agree ({:.1f}%)\n",
                              std::count_if(r.rows.begin(), r.rows.end(), [](const auto& c) { return c.agree; }),
                              r.rows.size(), 100.0 * r.fraction_agreeing);
  if (!r.reduction.empty()) {
    std::vector<std::vector<double>> red;
    for (const auto& x : r.reduction) red.push_back({x.a_nm, x.lower, x.upper});
    csv::write(run_dir / "reduction.csv", {"a_nm", "reduction_lower", "reduction_upper"}, red);
    s += fmt::format("carriers-off reduction of |F|: {:.1f}% to {:.1f}%\n", 100 * r.min_reduction,
                     100 * r.max_reduction);
  }
  write_text(run_dir / "summary.txt", s);
  return r;
}

std::filesystem::path make_run_directory(const std::filesystem::path& out, const std::string& command,
                                         const RunConfig& cfg) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw ConfigError(fmt::format("cannot create output directory '{}': {}", out.string(), ec.message()));
  std::filesystem::path dir;
  for (int n = 1;; ++n) {
    dir = out / (command + "_" + stamp.str() + (n > 1 ? fmt::format("_{}", n) : ""));
    if (std::filesystem::create_directory(dir, ec)) break;
    if (ec) throw ConfigError(fmt::format("cannot create run directory '{}': {}", dir.string(), ec.message()));
  }
  write_text(dir / "config.json", cfg.to_json());
  return dir;
}

}  // namespace casimir
