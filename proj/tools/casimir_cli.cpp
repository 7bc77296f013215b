// Command-line front end: theory, extract, compare, calibrate, permittivity.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "casimir/calibration.hpp"
#include "casimir/config.hpp"
#include "casimir/errors.hpp"
#include "casimir/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kConvergence = 4 };

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::string> carriers;
  std::optional<std::string> band;
  std::optional<double> tolerance;
};

void add_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "run configuration (JSON)")->required();
  cmd->add_option("--out", o.out, "directory that receives the timestamped run directory");
  cmd->add_option("--carriers", o.carriers, "free carriers in tabulated materials")
      ->check(CLI::IsMember({"on", "off", "both"}));
  cmd->add_option("--band", o.band, "extrapolation band")->check(CLI::IsMember({"lower", "upper", "both"}));
  cmd->add_option("--tolerance", o.tolerance, "relative tolerance of the force computation")
      ->check(CLI::PositiveNumber);
}

int run(const std::string& command, const Options& o) {
  using namespace casimir;
  std::filesystem::path run_dir;
  try {
    auto cfg = RunConfig::load(o.config);
    if (o.carriers) cfg.carriers = parse_carrier_selection(*o.carriers);
    if (o.band) cfg.band = parse_band_selection(*o.band);
    if (o.tolerance) cfg.tolerance_rel = *o.tolerance;
    if (o.out) cfg.output_dir = std::filesystem::absolute(*o.out).lexically_normal();
    cfg.validate();

    run_dir = make_run_directory(cfg.output_dir, command, cfg);
    if (command == "theory") {
      run_theory(cfg, run_dir);
    } else if (command == "permittivity") {
      run_permittivity(cfg, run_dir);
    } else if (command == "calibrate") {
      run_calibrate(cfg, run_dir);
    } else if (command == "extract") {
      run_extract(cfg, run_dir);
    } else {
      run_compare(cfg, run_dir);
    }
    std::cout << run_dir.string() << "\n";
    return kOk;
  } catch (...) {
    // No partial outputs.
    if (!run_dir.empty()) {
      std::error_code ec;
      std::filesystem::remove_all(run_dir, ec);
    }
    try {
      throw;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfig;
    } catch (const ConvergenceError& e) {
      std::cerr << "numerical error: " << e.what() << "\n";
      return kConvergence;
    } catch (const V0TrendError& e) {
      std::cerr << "calibration anomaly: " << e.what() << "\n";
      return kData;
    } catch (const DataError& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return kData;
    } catch (const std::invalid_argument& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfig;
    } catch (const std::exception& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return kData;
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Casimir force between a gold sphere and a layered plate: theory, calibration, extraction"};
  app.require_subcommand(1);
  Options opts;
  const std::pair<const char*, const char*> commands[] = {
      {"theory", "sphere-plate forces for the configured stack"},
      {"extract", "calibrate raw curves and extract the Casimir force with its error budget"},
      {"compare", "compare an extracted force with a theory band"},
      {"calibrate", "electrostatic calibration of raw force-distance curves"},
      {"permittivity", "dielectric permittivity along the imaginary frequency axis"},
  };
  for (const auto& [name, help] : commands) add_options(app.add_subcommand(name, help), opts);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  return run(app.get_subcommands().front()->get_name(), opts);
}
