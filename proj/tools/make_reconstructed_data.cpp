// Generates the reconstructed input data.
//
//   tables  Im eps(omega) of the untreated and UV-treated ITO films: a Drude
//           term plus the mean of the two band oscillators, on 200
//           log-spaced points over 0.04-8.27 eV.
//   curves  Synthetic force-distance curves for a configured stack, with a
//           chosen calibration truth and Gaussian deflection noise.

#include <cmath>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "casimir/calibration.hpp"
#include "casimir/config.hpp"
#include "casimir/csv.hpp"
#include "casimir/electrostatics.hpp"
#include "casimir/kramers_kronig.hpp"
#include "casimir/material_models.hpp"
#include "casimir/pipeline.hpp"
#include "casimir/roughness.hpp"

namespace {

using namespace casimir;

struct FilmModel {
  const char* file;
  DrudeParams drude;
  OscillatorParams upper;
  OscillatorParams lower;
};

void write_tables(const std::filesystem::path& out) {
  const FilmModel films[] = {
      {"ito_untreated.csv", {1.5, 0.128}, {240.54, 8.5, 9.0}, {111.52, 4.0, 8.0}},
      {"ito_uv_treated.csv", {1.5, 0.132}, {280.28, 9.2, 9.8}, {128.28, 4.5, 8.8}},
  };
  constexpr int kPoints = 200;
  constexpr double kMin = 0.04, kMax = 8.27;
  std::filesystem::create_directories(out);
  for (const auto& f : films) {
    std::vector<double> omega, im;
    for (int i = 0; i < kPoints; ++i) {
      const double w = kMin * std::pow(kMax / kMin, i / double(kPoints - 1));
      omega.push_back(w);
      im.push_back(drude_im_eps(f.drude, w) + 0.5 * (oscillator_im_eps(f.upper, w) + oscillator_im_eps(f.lower, w)));
    }
    OpticalDataTable(omega, im).save_csv(out / f.file);
    std::cout << (out / f.file).string() << "\n";
  }
}

struct CurveOptions {
  std::string config;
  std::string out;
  std::string truth = "untreated";
  std::string carriers = "on";
  double noise_v = 0.001;
  double v0_slope = 0.0;
  double drift = 0.0;
  int repetitions = 10;
  std::uint64_t seed = 1;
};

void write_curves(const CurveOptions& o) {
  const auto cfg = RunConfig::load(o.config);
  SynthesisSpec spec;
  if (o.truth == "untreated") {
    spec.truth = {{-196.8, 0}, {104.4, 0}, {29.6, 0}, {1.51, 0}};
  } else {
    spec.truth = {{64.8, 0}, {104.2, 0}, {29.0, 0}, {1.51, 0}};
  }
  spec.radius_um = cfg.radius_um;
  spec.voltages_mv = default_voltages(spec.truth.v0_mv.value);
  spec.repetitions = o.repetitions;
  spec.z_end_nm = 640.0;
  spec.noise_sigma_v = o.noise_v;
  spec.v0_slope_mv_per_nm = o.v0_slope;
  spec.drift_nm_per_repetition = o.drift;
  spec.seed = o.seed;

  const auto carriers = o.carriers == "on" ? Carriers::On : Carriers::Off;
  auto band = [&](Band b) {
    const auto stack = build_stack(cfg, b, carriers);
    return ForceInterpolant(15.0, 720.0, 0.01, [&](std::span<const double> a) {
      return pfa_forces(stack, a, cfg.radius_um, cfg.matsubara(), cfg.quadrature());
    });
  };
  const auto lower = band(Band::Lower);
  const auto upper = band(Band::Upper);
  const auto x = fit_polynomial_x(cfg.radius_um, 10.0, 2000.0);
  const auto curves = synthesize_curves(spec, [&](double a) { return 0.5 * (lower(a) + upper(a)); }, x);

  std::filesystem::create_directories(o.out);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    curves[i].save_csv(std::filesystem::path(o.out) / fmt::format("curve_{:03}.csv", i));
  }
  std::cout << fmt::format("{} curves in {}\n", curves.size(), o.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstructed input data"};
  app.require_subcommand(1);
  std::string tables_out = "data";
  auto* tables = app.add_subcommand("tables", "ITO optical tables");
  tables->add_option("--out", tables_out, "output directory");
  CurveOptions co;
  auto* curves = app.add_subcommand("curves", "synthetic force-distance curves");
  curves->add_option("--config", co.config, "run configuration")->required();
  curves->add_option("--out", co.out, "output directory")->required();
  curves->add_option("--truth", co.truth, "calibration truth set")->check(CLI::IsMember({"untreated", "uv_treated"}));
  curves->add_option("--carriers", co.carriers, "force law from carriers on or off")
      ->check(CLI::IsMember({"on", "off"}));
  curves->add_option("--noise-v", co.noise_v, "deflection noise sigma [V]");
  curves->add_option("--v0-slope", co.v0_slope, "injected dV0/da [mV/nm]");
  curves->add_option("--drift-nm", co.drift, "piezo drift per repetition [nm]");
  curves->add_option("--repetitions", co.repetitions, "repetitions per voltage");
  curves->add_option("--seed", co.seed, "noise seed");
  CLI11_PARSE(app, argc, argv);
  try {
    if (*tables) write_tables(tables_out);
    if (*curves) write_curves(co);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
