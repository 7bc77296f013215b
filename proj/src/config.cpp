#include "casimir/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "casimir/errors.hpp"

namespace casimir {
namespace {

using nlohmann::json;

// Reads members of one JSON object and rejects keys nobody asked for, so a
// misspelt or wrongly-unitted key fails loudly instead of being ignored.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where_));
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", where_, k));
    }
  }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string path(const std::string& key) const { return where_ + "." + key; }

  const json& child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(fmt::format("{}: missing key", path(key)));
    return j_.at(key);
  }

  double number(const std::string& key) {
    const auto& v = child(key);
    if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", path(key)));
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : (seen_.insert(key), fallback); }
  std::optional<double> optional_number(const std::string& key) {
    seen_.insert(key);
    if (!has(key) || j_.at(key).is_null()) return std::nullopt;
    return number(key);
  }

  std::string string(const std::string& key) {
    const auto& v = child(key);
    if (!v.is_string()) throw ConfigError(fmt::format("{}: expected a string", path(key)));
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : (seen_.insert(key), fallback);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return seen_.insert(key), fallback;
    const auto& v = child(key);
    if (!v.is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", path(key)));
    return v.get<bool>();
  }

  std::filesystem::path file(const std::string& key, const std::filesystem::path& base) {
    std::filesystem::path p = string(key);
    if (p.is_relative()) p = base / p;
    return p.lexically_normal();
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

DrudeParams read_drude(const json& j, const std::string& where) {
  Reader r(j, where);
  return {r.number("omega_p_ev"), r.number("gamma_ev")};
}

OscillatorParams read_oscillator(const json& j, const std::string& where) {
  Reader r(j, where);
  return {r.number("g0_ev2"), r.number("gamma0_ev"), r.number("omega0_ev")};
}

json write_drude(const DrudeParams& p) { return {{"omega_p_ev", p.omega_p}, {"gamma_ev", p.gamma}}; }
json write_oscillator(const OscillatorParams& p) {
  return {{"g0_ev2", p.g0}, {"gamma0_ev", p.gamma0}, {"omega0_ev", p.omega0}};
}

MaterialSpec read_material(const std::string& name, const json& j, const std::filesystem::path& base) {
  const std::string where = "materials." + name;
  Reader r(j, where);
  const auto model = r.string("model");
  MaterialSpec m{name, {}};
  if (model == "composite") {
    CompositeMaterial c;
    if (r.has("drude")) c.drude = read_drude(r.child("drude"), where + ".drude");
    if (r.has("oscillators")) {
      const auto& list = r.child("oscillators");
      if (!list.is_array()) throw ConfigError(where + ".oscillators: expected a list");
      for (std::size_t i = 0; i < list.size(); ++i) {
        c.oscillators.push_back(read_oscillator(list[i], fmt::format("{}.oscillators[{}]", where, i)));
      }
    }
    c.plasma_omega_p_ev = r.optional_number("plasma_omega_p_ev");
    m.model = c;
  } else if (model == "ninham_parsegian") {
    m.model = NinhamParsegianParams{r.number("c_ir"), r.number("omega_ir_ev"), r.number("c_uv"), r.number("omega_uv_ev")};
  } else if (model == "tabulated") {
    TabulatedMaterial t;
    t.table_path = r.file("table_path", base);
    if (r.has("bottom_table_path")) t.bottom_table_path = r.file("bottom_table_path", base);
    const auto surface = r.string("surface", "top");
    if (surface == "bottom") {
      if (!t.bottom_table_path) throw ConfigError(where + ".surface: 'bottom' needs bottom_table_path");
      t.surface = Surface::Bottom;
    } else if (surface != "top") {
      throw ConfigError(fmt::format("{}.surface: '{}' is not one of top, bottom", where, surface));
    }
    t.drude = read_drude(r.child("drude"), where + ".drude");
    t.high_lower = read_oscillator(r.child("high_lower"), where + ".high_lower");
    t.high_upper = read_oscillator(r.child("high_upper"), where + ".high_upper");
    t.plasma_omega_p_ev = r.optional_number("plasma_omega_p_ev");
    m.model = t;
  } else {
    throw ConfigError(fmt::format("{}.model: '{}' is not one of composite, ninham_parsegian, tabulated", where, model));
  }
  return m;
}

json write_material(const MaterialSpec& m) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        json j;
        if constexpr (std::is_same_v<T, CompositeMaterial>) {
          j["model"] = "composite";
          if (v.drude) j["drude"] = write_drude(*v.drude);
          j["oscillators"] = json::array();
          for (const auto& o : v.oscillators) j["oscillators"].push_back(write_oscillator(o));
          if (v.plasma_omega_p_ev) j["plasma_omega_p_ev"] = *v.plasma_omega_p_ev;
        } else if constexpr (std::is_same_v<T, NinhamParsegianParams>) {
          j = {{"model", "ninham_parsegian"},
               {"c_ir", v.c_ir},
               {"omega_ir_ev", v.omega_ir},
               {"c_uv", v.c_uv},
               {"omega_uv_ev", v.omega_uv}};
        } else {
          j = {{"model", "tabulated"},
               {"table_path", v.table_path.string()},
               {"surface", v.surface == Surface::Top ? "top" : "bottom"},
               {"drude", write_drude(v.drude)},
               {"high_lower", write_oscillator(v.high_lower)},
               {"high_upper", write_oscillator(v.high_upper)}};
          if (v.bottom_table_path) j["bottom_table_path"] = v.bottom_table_path->string();
          if (v.plasma_omega_p_ev) j["plasma_omega_p_ev"] = *v.plasma_omega_p_ev;
        }
        return j;
      },
      m.model);
}

const char* name_of(CarrierSelection c) {
  switch (c) {
    case CarrierSelection::On: return "on";
    case CarrierSelection::Off: return "off";
    default: return "both";
  }
}
const char* name_of(BandSelection b) {
  switch (b) {
    case BandSelection::Lower: return "lower";
    case BandSelection::Upper: return "upper";
    default: return "both";
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

CarrierSelection parse_carrier_selection(const std::string& s) {
  if (s == "on") return CarrierSelection::On;
  if (s == "off") return CarrierSelection::Off;
  if (s == "both") return CarrierSelection::Both;
  throw ConfigError(fmt::format("carriers: '{}' is not one of on, off, both", s));
}

BandSelection parse_band_selection(const std::string& s) {
  if (s == "lower") return BandSelection::Lower;
  if (s == "upper") return BandSelection::Upper;
  if (s == "both") return BandSelection::Both;
  throw ConfigError(fmt::format("band: '{}' is not one of lower, upper, both", s));
}

std::vector<double> SeparationGrid::points() const {
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((max_nm - min_nm) / step_nm + 1e-9)) + 1;
  for (std::size_t i = 0; i < n; ++i) out.push_back(min_nm + step_nm * static_cast<double>(i));
  return out;
}

std::vector<double> PermittivityGrid::points_ev() const {
  std::vector<double> out;
  const double r = std::log(xi_max_ev / xi_min_ev);
  for (std::size_t i = 0; i < points; ++i) {
    out.push_back(xi_min_ev * std::exp(r * static_cast<double>(i) / static_cast<double>(points - 1)));
  }
  out.back() = xi_max_ev;
  return out;
}

void RunConfig::validate() const {
  require(schema_version == kSchemaVersion,
          fmt::format("schema_version: {} is not supported (expected {})", schema_version, kSchemaVersion));
  require(temperature_k > 0.0, "temperature_k: must be positive");
  require(radius_um > 0.0, "radius_um: must be positive");
  require(tolerance_rel > 0.0 && tolerance_rel < 0.1, "tolerance_rel: must lie in (0, 0.1)");
  require(kk_tolerance_rel > 0.0 && kk_tolerance_rel < 0.1, "kk_tolerance_rel: must lie in (0, 0.1)");
  require(separations.min_nm > 0.0 && separations.max_nm >= separations.min_nm && separations.step_nm > 0.0,
          "separations_nm: need 0 < min_nm <= max_nm and step_nm > 0");
  require(separations.max_nm <= 1e5, "separations_nm.max_nm: beyond 100 um the PFA setup is meaningless");
  require(permittivity.xi_min_ev > 0.0 && permittivity.xi_max_ev > permittivity.xi_min_ev && permittivity.points >= 2,
          "permittivity_grid: need 0 < xi_min_ev < xi_max_ev and at least 2 points");

  try {
    for (const auto& [name, m] : materials) {
      std::visit(
          [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, CompositeMaterial>) {
              if (v.drude) casimir::validate(*v.drude);
              if (v.plasma_omega_p_ev) casimir::validate(PlasmaParams{*v.plasma_omega_p_ev});
              for (const auto& o : v.oscillators) casimir::validate(o);
            } else if constexpr (std::is_same_v<T, NinhamParsegianParams>) {
              casimir::validate(v);
            } else {
              casimir::validate(v.drude);
              if (v.plasma_omega_p_ev) casimir::validate(PlasmaParams{*v.plasma_omega_p_ev});
              casimir::validate(v.high_lower);
              casimir::validate(v.high_upper);
            }
          },
          m.model);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("materials: ") + e.what());
  }

  auto known = [&](const std::string& n, const std::string& where) {
    require(materials.count(n) == 1, fmt::format("{}: material '{}' is not defined under materials", where, n));
  };
  known(upper_material, "stack.upper");
  require(!lower_layers.empty(), "stack.lower: needs at least a substrate");
  for (std::size_t i = 0; i < lower_layers.size(); ++i) {
    const auto where = fmt::format("stack.lower[{}]", i);
    known(lower_layers[i].material, where);
    const bool last = i + 1 == lower_layers.size();
    if (last) {
      require(!lower_layers[i].thickness_nm, where + ": the substrate takes no thickness_nm");
    } else {
      require(lower_layers[i].thickness_nm && *lower_layers[i].thickness_nm > 0.0,
              where + ": films need a positive thickness_nm");
    }
  }
  if (calibration) {
    const auto& c = *calibration;
    require(c.a_max_nm > c.a_min_nm && c.a_min_nm > 0.0, "calibration: need 0 < a_min_nm < a_max_nm");
    require(c.grid_step_nm > 0.0, "calibration.grid_step_nm: must be positive");
    require(c.m_max_nm_per_v > c.m_min_nm_per_v && c.m_min_nm_per_v > 0.0,
            "calibration: need 0 < m_min_nm_per_v < m_max_nm_per_v");
    require(c.z0_max_nm > c.z0_min_nm, "calibration: need z0_min_nm < z0_max_nm");
    require(c.noise_floor_pn >= 0.0, "calibration.noise_floor_pn: must be >= 0");
    require(c.x_fit_min_nm > 0.0 && c.x_fit_min_nm <= c.a_min_nm && c.x_fit_max_nm >= c.a_max_nm,
            "calibration: x_fit range must contain [a_min_nm, a_max_nm]");
  }
}

RunConfig RunConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  {
    Reader r(j, "config");
    const auto& v = r.child("schema_version");
    if (!v.is_number_integer()) throw ConfigError("schema_version: expected an integer");
    c.schema_version = v.get<int>();
    if (c.schema_version != kSchemaVersion) {
      throw ConfigError(fmt::format("schema_version: {} is not supported (expected {})", c.schema_version, kSchemaVersion));
    }
    c.temperature_k = r.number("temperature_k", c.temperature_k);
    c.radius_um = r.number("radius_um", c.radius_um);
    c.tolerance_rel = r.number("tolerance_rel", c.tolerance_rel);
    c.kk_tolerance_rel = r.number("kk_tolerance_rel", c.kk_tolerance_rel);
    c.carriers = parse_carrier_selection(r.string("carriers", "both"));
    c.band = parse_band_selection(r.string("band", "both"));
    const auto cm = r.string("carrier_model", "drude");
    if (cm == "drude") {
      c.carrier_model = CarrierModel::Drude;
    } else if (cm == "plasma") {
      c.carrier_model = CarrierModel::Plasma;
    } else {
      throw ConfigError(fmt::format("carrier_model: '{}' is not one of drude, plasma", cm));
    }
    c.output_dir = r.has("output_dir") ? r.file("output_dir", base_dir) : (base_dir / "runs").lexically_normal();

    const auto& mats = r.child("materials");
    if (!mats.is_object() || mats.empty()) throw ConfigError("materials: expected a non-empty object");
    for (const auto& [name, m] : mats.items()) c.materials.emplace(name, read_material(name, m, base_dir));

    {
      Reader s(r.child("stack"), "stack");
      c.upper_material = s.string("upper");
      const auto& lower = s.child("lower");
      if (!lower.is_array()) throw ConfigError("stack.lower: expected a list");
      for (std::size_t i = 0; i < lower.size(); ++i) {
        Reader l(lower[i], fmt::format("stack.lower[{}]", i));
        c.lower_layers.push_back({l.string("material"), l.optional_number("thickness_nm")});
      }
    }
    if (r.has("separations_nm")) {
      Reader s(r.child("separations_nm"), "separations_nm");
      c.separations = {s.number("min_nm"), s.number("max_nm"), s.number("step_nm", 1.0)};
    }
    if (r.has("permittivity_grid")) {
      Reader s(r.child("permittivity_grid"), "permittivity_grid");
      const double n = s.number("points", 121);
      if (n < 2 || n != std::floor(n)) throw ConfigError("permittivity_grid.points: expected an integer >= 2");
      c.permittivity = {s.number("xi_min_ev"), s.number("xi_max_ev"), static_cast<std::size_t>(n)};
    }
    if (r.has("roughness")) {
      Reader s(r.child("roughness"), "roughness");
      c.roughness = RoughnessSpec{s.file("upper_profile_path", base_dir), s.file("lower_profile_path", base_dir)};
    }
    if (r.has("calibration")) {
      Reader s(r.child("calibration"), "calibration");
      CalibrationSpec k;
      k.data_dir = s.file("data_dir", base_dir);
      k.a_min_nm = s.number("a_min_nm", k.a_min_nm);
      k.a_max_nm = s.number("a_max_nm", k.a_max_nm);
      k.grid_step_nm = s.number("grid_step_nm", k.grid_step_nm);
      k.m_min_nm_per_v = s.number("m_min_nm_per_v", k.m_min_nm_per_v);
      k.m_max_nm_per_v = s.number("m_max_nm_per_v", k.m_max_nm_per_v);
      k.z0_min_nm = s.number("z0_min_nm", k.z0_min_nm);
      k.z0_max_nm = s.number("z0_max_nm", k.z0_max_nm);
      k.drift_nm_per_repetition = s.optional_number("drift_nm_per_repetition");
      k.check_v0_trend = s.boolean("check_v0_trend", k.check_v0_trend);
      k.noise_floor_pn = s.number("noise_floor_pn", k.noise_floor_pn);
      k.x_fit_min_nm = s.number("x_fit_min_nm", k.x_fit_min_nm);
      k.x_fit_max_nm = s.number("x_fit_max_nm", k.x_fit_max_nm);
      c.calibration = k;
    }
    if (r.has("compare")) {
      Reader s(r.child("compare"), "compare");
      CompareSpec k;
      k.experiment_csv = s.file("experiment_csv", base_dir);
      k.theory_csv = s.file("theory_csv", base_dir);
      if (s.has("theory_off_csv")) k.theory_off_csv = s.file("theory_off_csv", base_dir);
      c.compare = k;
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  auto base = std::filesystem::absolute(path).parent_path();
  return parse(ss.str(), base);
}

std::string RunConfig::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["temperature_k"] = temperature_k;
  j["radius_um"] = radius_um;
  j["tolerance_rel"] = tolerance_rel;
  j["kk_tolerance_rel"] = kk_tolerance_rel;
  j["carriers"] = name_of(carriers);
  j["band"] = name_of(band);
  j["carrier_model"] = carrier_model == CarrierModel::Drude ? "drude" : "plasma";
  j["output_dir"] = output_dir.string();
  for (const auto& [name, m] : materials) j["materials"][name] = write_material(m);
  j["stack"]["upper"] = upper_material;
  j["stack"]["lower"] = json::array();
  for (const auto& l : lower_layers) {
    json e{{"material", l.material}};
    if (l.thickness_nm) e["thickness_nm"] = *l.thickness_nm;
    j["stack"]["lower"].push_back(e);
  }
  j["separations_nm"] = {{"min_nm", separations.min_nm}, {"max_nm", separations.max_nm}, {"step_nm", separations.step_nm}};
  j["permittivity_grid"] = {
      {"xi_min_ev", permittivity.xi_min_ev}, {"xi_max_ev", permittivity.xi_max_ev}, {"points", permittivity.points}};
  if (roughness) {
    j["roughness"] = {{"upper_profile_path", roughness->upper_profile_path.string()},
                      {"lower_profile_path", roughness->lower_profile_path.string()}};
  }
  if (calibration) {
    const auto& k = *calibration;
    json c{{"data_dir", k.data_dir.string()},
           {"a_min_nm", k.a_min_nm},
           {"a_max_nm", k.a_max_nm},
           {"grid_step_nm", k.grid_step_nm},
           {"m_min_nm_per_v", k.m_min_nm_per_v},
           {"m_max_nm_per_v", k.m_max_nm_per_v},
           {"z0_min_nm", k.z0_min_nm},
           {"z0_max_nm", k.z0_max_nm},
           {"check_v0_trend", k.check_v0_trend},
           {"noise_floor_pn", k.noise_floor_pn},
           {"x_fit_min_nm", k.x_fit_min_nm},
           {"x_fit_max_nm", k.x_fit_max_nm}};
    if (k.drift_nm_per_repetition) c["drift_nm_per_repetition"] = *k.drift_nm_per_repetition;
    j["calibration"] = c;
  }
  if (compare) {
    json c{{"experiment_csv", compare->experiment_csv.string()}, {"theory_csv", compare->theory_csv.string()}};
    if (compare->theory_off_csv) c["theory_off_csv"] = compare->theory_off_csv->string();
    j["compare"] = c;
  }
  return j.dump(2) + "\n";
}

MatsubaraSpec RunConfig::matsubara() const {
  MatsubaraSpec s;
  s.temperature_k = temperature_k;
  s.rel_tol = 0.1 * tolerance_rel;
  return s;
}

QuadratureSpec RunConfig::quadrature() const {
  QuadratureSpec q;
  q.rel_tol = tolerance_rel;
  return q;
}

}  // namespace casimir
