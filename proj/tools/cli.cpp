// Command-line front end: one subcommand per pipeline stage, configuration
// from an optional INI file with flag overrides. Exit codes: 0 success,
// 1 domain/configuration error, 2 usage error.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "biphoton/config.hpp"
#include "biphoton/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Narrowband photon-pair source simulator and analysis toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  int grating = 0;

  CLI::Option* config_opt =
      app.add_option("--config", config_path, "Configuration file (INI)")
          ->check(CLI::ExistingFile);
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "Root seed (overrides the config)");
  CLI::Option* out_opt =
      app.add_option("--out", out_dir, "Output directory (overrides the config)");
  CLI::Option* grating_opt =
      app.add_option("--grating", grating,
                     "Poling grating to pump, by target wavelength")
          ->check(CLI::IsMember({850, 854}));

  struct Stage {
    biphoton::ExperimentKind kind;
    const char* description;
  };
  const std::vector<Stage> stages = {
      {biphoton::ExperimentKind::PhaseMatch,
       "Solve the phase-matched operating point and pump focusing"},
      {biphoton::ExperimentKind::Spectrum,
       "Tabulate the down-conversion envelope and filter transmission"},
      {biphoton::ExperimentKind::Simulate,
       "Generate detection timestamp streams"},
      {biphoton::ExperimentKind::Correlate,
       "Histogram coincidences and fit the ring-down decay"},
      {biphoton::ExperimentKind::Tomography,
       "Simulate analyzer counts and reconstruct the polarization state"},
      {biphoton::ExperimentKind::FullPipeline, "Run every stage in order"},
  };
  for (const Stage& stage : stages)
    app.add_subcommand(biphoton::to_string(stage.kind), stage.description);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& error) {
    app.exit(error);
    return 2;
  }

  biphoton::RunConfig config;
  if (config_opt->count() > 0) {
    try {
      config = biphoton::load_config(config_path);
    } catch (const biphoton::ConfigError& error) {
      std::cerr << "error: " << config_path;
      if (error.line > 0)
        std::cerr << ':' << error.line << ':' << error.column;
      std::cerr << ": " << error.what() << '\n';
      return 1;
    }
  }

  if (seed_opt->count() > 0) config.seed = seed;
  if (out_opt->count() > 0) config.output_dir = out_dir;
  if (grating_opt->count() > 0) config.grating = grating;
  for (const Stage& stage : stages)
    if (app.got_subcommand(biphoton::to_string(stage.kind)))
      config.experiment = stage.kind;

  return biphoton::run(config);
}
