#include "biphoton/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <utility>
#include <vector>

#include "biphoton/constants.hpp"
#include "biphoton/io.hpp"
#include "biphoton/rng.hpp"
#include "biphoton/tomography.hpp"

namespace biphoton {
namespace {

namespace fs = std::filesystem;

std::string out_path(const StageContext& context, const char* name) {
  return (fs::path(context.config.output_dir) / name).string();
}

using Report = std::vector<std::pair<std::string, std::string>>;

void add(Report& report, const std::string& key, double value) {
  report.emplace_back(key, format_number(value));
}

}  // namespace

SourceConfig StageContext::source() const {
  SourceConfig source;
  source.pump_power = config.pump_power_mw;
  source.generated_pair_rate_per_mw = config.pair_rate_per_mw;
  source.spectrum = spectrum;
  source.detuning_span = config.detuning_span_mhz * 1e6;
  source.polarization_state = config.source_state();
  source.splitter =
      config.splitter == "pbs" ? Splitter::PBS : Splitter::BS50;
  source.pump_frequency_jitter_rms = config.pump_jitter_khz * 1e3;
  source.chunk_seconds = config.chunk_seconds;
  return source;
}

StageContext make_context(const RunConfig& config) {
  config.validate();

  StageContext context;
  context.config = config;

  const CrystalSpec crystal = config.crystal_spec();
  context.phase_match =
      degenerate_phase_match(crystal, config.grating_index());

  const double pump_index = refractive_index(
      context.phase_match.pump_wavelength, OpticAxis::Y, crystal.temperature);
  context.focus =
      optimal_pump_waist(crystal.length, context.phase_match.pump_wavelength,
                         pump_index, config.focusing_xi);

  const double pump_frequency =
      kSpeedOfLight / context.phase_match.pump_wavelength;
  context.spectrum = std::make_shared<SpdcSpectrum>(
      crystal, config.grating_index(), pump_frequency);

  context.chain = config.filter_chain(context.spectrum->center_frequency());
  context.filter_fwhm = effective_filter_fwhm(context.chain);
  return context;
}

void run_phasematch_stage(const StageContext& context) {
  const RunConfig& config = context.config;
  const CrystalSpec crystal = config.crystal_spec();
  const double tuning = temperature_tuning_coefficient(
      crystal, config.grating_index(), crystal.temperature);

  Report report;
  report.emplace_back("grating", format_number(config.grating));
  add(report, "grating_period_um",
      crystal.gratings[config.grating_index()] * 1e6);
  add(report, "temperature_c", crystal.temperature);
  add(report, "degenerate_wavelength_nm",
      context.phase_match.signal_wavelength * 1e9);
  add(report, "pump_wavelength_nm", context.phase_match.pump_wavelength * 1e9);
  add(report, "residual_mismatch_rad_per_m", context.phase_match.mismatch);
  add(report, "tuning_coefficient_nm_per_k", tuning * 1e9);
  add(report, "focusing_xi", context.focus.xi);
  add(report, "pump_index", context.focus.pump_index);
  add(report, "pump_waist_um", context.focus.waist * 1e6);
  add(report, "rayleigh_range_mm", context.focus.rayleigh_range * 1e3);
  write_key_value_report(out_path(context, "phasematch.txt"), report);
}

void run_spectrum_stage(const StageContext& context) {
  const SpdcSpectrum& spectrum = *context.spectrum;
  write_curve_csv(
      out_path(context, "spectrum.csv"), "detuning_hz", "relative_intensity",
      spectrum.detunings(), spectrum.intensities(),
      {"down-conversion envelope around the degenerate frequency",
       "fwhm_hz = " + format_number(spectrum.fwhm())});

  // Composite transmission, fine scan across the locked window.
  {
    const double span = 50.0 * context.filter_fwhm;
    const std::size_t n = 2001;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = -span + 2.0 * span * static_cast<double>(i) /
                         static_cast<double>(n - 1);
      y[i] = cascade_relative_transmission(context.chain,
                                           x[i] + context.chain.lock_frequency);
    }
    write_curve_csv(out_path(context, "filter_window.csv"), "detuning_hz",
                    "relative_transmission", x, y,
                    {"composite filter window around the lock frequency"});
  }

  // Coarse scan over the source bandwidth showing the mode cleanup.
  {
    const double span = spectrum.fwhm();
    const std::size_t n = 8001;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = -span + 2.0 * span * static_cast<double>(i) /
                         static_cast<double>(n - 1);
      y[i] = cascade_relative_transmission(context.chain,
                                           x[i] + context.chain.lock_frequency);
    }
    write_curve_csv(out_path(context, "filter_vernier.csv"), "detuning_hz",
                    "relative_transmission", x, y,
                    {"composite transmission across the source bandwidth"});
  }

  Report report;
  add(report, "spdc_fwhm_ghz", spectrum.fwhm() * 1e-9);
  add(report, "filter_fwhm_mhz", context.filter_fwhm * 1e-6);
  add(report, "ringdown_ns", cascade_ringdown_time(context.chain) * 1e9);
  report.emplace_back(
      "transmission_windows",
      std::to_string(count_transmission_windows(context.chain, spectrum, 0.5)));
  write_key_value_report(out_path(context, "spectrum_report.txt"), report);
}

DetectionStreams run_simulate_stage(const StageContext& context) {
  const RunConfig& config = context.config;
  const DetectorSpec detector = config.detector_spec();
  const DetectionStreams streams = run_experiment(
      context.source(), context.chain, detector, detector, config.duration_s,
      config.electronic_delay_ns * 1e-9, config.seed,
      ExperimentOptions{config.threads});
  write_timestamps_binary(out_path(context, "timestamps.bin"), streams);
  write_timestamps_csv(out_path(context, "timestamps.csv"), streams);
  return streams;
}

void run_correlate_stage(const StageContext& context,
                         const DetectionStreams& streams) {
  const RunConfig& config = context.config;
  const CoincidenceHistogram histogram = build_histogram(
      streams, config.bin_ns * 1e-9, config.window_min_ns * 1e-9,
      config.window_max_ns * 1e-9, config.threads);
  write_histogram_csv(out_path(context, "histogram.csv"), histogram);
  write_histogram_plot_csv(out_path(context, "histogram_plot.csv"), histogram);

  const DecayFit fit = fit_decay(histogram);
  const double rate = coincidence_rate(histogram, fit);

  Report fit_report;
  add(fit_report, "amplitude_counts", fit.amplitude);
  add(fit_report, "amplitude_sigma", fit.amplitude_sigma);
  add(fit_report, "decay_time_ns", fit.decay_time * 1e9);
  add(fit_report, "decay_time_sigma_ns", fit.decay_time_sigma * 1e9);
  add(fit_report, "background_counts", fit.background);
  add(fit_report, "background_sigma", fit.background_sigma);
  add(fit_report, "onset_ns", fit.onset * 1e9);
  add(fit_report, "onset_sigma_ns", fit.onset_sigma * 1e9);
  add(fit_report, "edge_width_ns", fit.edge_width * 1e9);
  add(fit_report, "edge_width_sigma_ns", fit.edge_width_sigma * 1e9);
  add(fit_report, "bandwidth_mhz", fit.bandwidth * 1e-6);
  add(fit_report, "bandwidth_sigma_mhz", fit.bandwidth_sigma * 1e-6);
  fit_report.emplace_back("iterations", std::to_string(fit.iterations));
  add(fit_report, "chi_square", fit.chi_square);
  add(fit_report, "coincidence_rate_hz", rate);
  write_key_value_report(out_path(context, "decay_fit.txt"), fit_report);

  std::vector<EfficiencyFactor> budget = {
      {"short cavity peak", config.cavity_peak_transmission},
      {"long cavity peak", config.cavity_peak_transmission},
      {"fiber coupling", config.fiber_coupling},
      {"detector efficiency", config.detector_efficiency},
  };
  const double rate_per_mw =
      config.pump_power_mw > 0.0 ? rate / config.pump_power_mw : 0.0;
  const BrightnessReport brightness =
      brightness_report(rate_per_mw, config.pump_power_mw,
                        config.detector_efficiency, fit.bandwidth, budget);

  Report brightness_lines;
  add(brightness_lines, "detected_pairs_per_s_per_mw",
      brightness.detected_pairs_per_s_per_mw);
  add(brightness_lines, "pump_power_mw", config.pump_power_mw);
  add(brightness_lines, "extrapolated_rate_hz", brightness.extrapolated_rate);
  add(brightness_lines, "bandwidth_mhz", fit.bandwidth * 1e-6);
  add(brightness_lines, "spectral_brightness_per_s_mhz_mw",
      brightness.spectral_brightness);
  for (const auto& [label, value] : budget) {
    std::string key = "budget_" + label;
    for (char& c : key)
      if (c == ' ') c = '_';
    add(brightness_lines, key, value);
  }
  add(brightness_lines, "budget_total", efficiency_budget(budget));
  write_key_value_report(out_path(context, "brightness.txt"), brightness_lines);
}

void run_tomography_stage(const StageContext& context) {
  const RunConfig& config = context.config;
  const DensityMatrix truth = config.source_state();
  const TomographyRecord record = simulate_counts(
      truth, canonical_16_settings(), config.counts_per_setting,
      config.accidental_mean, derive_seed(config.seed, "tomography"));
  write_tomography_counts_csv(out_path(context, "tomography_counts.csv"),
                              record);

  const DensityMatrix linear = linear_reconstruction(record);
  const DensityMatrix estimate = mle_reconstruction(record);
  write_density_matrix_blocks_csv(out_path(context, "density_matrix.csv"),
                                  estimate);
  write_density_matrix_long_csv(out_path(context, "density_matrix_long.csv"),
                                estimate);

  EntanglementReport metrics;
  if (config.bootstrap_resamples > 0) {
    metrics = bootstrap_errors(record, config.bootstrap_resamples,
                               derive_seed(config.seed, "bootstrap"),
                               config.threads);
  } else {
    metrics = entanglement_report(estimate);
  }

  Report report;
  add(report, "concurrence", metrics.concurrence);
  add(report, "concurrence_sigma", metrics.concurrence_sigma);
  add(report, "fidelity_singlet", metrics.fidelity);
  add(report, "fidelity_sigma", metrics.fidelity_sigma);
  add(report, "visibility_hv", metrics.visibility_hv);
  add(report, "visibility_hv_sigma", metrics.visibility_hv_sigma);
  add(report, "visibility_diag", metrics.visibility_diag);
  add(report, "visibility_diag_sigma", metrics.visibility_diag_sigma);
  add(report, "log_likelihood", tomography_log_likelihood(record, estimate));
  report.emplace_back("linear_estimate_physical",
                      linear.physical ? "true" : "false");
  report.emplace_back("bootstrap_resamples",
                      std::to_string(config.bootstrap_resamples));
  write_key_value_report(out_path(context, "metrics.txt"), report);
}

int run(const RunConfig& config) {
  try {
    fs::create_directories(config.output_dir);
    const std::string canonical = dump_config(config);
    {
      std::ofstream stream(fs::path(config.output_dir) / "config.ini");
      if (!stream)
        throw IoError("cannot write into output directory '" +
                      config.output_dir + "'");
      stream << canonical;
    }
    write_manifest((fs::path(config.output_dir) / "manifest.json").string(),
                   canonical, config.seed);

    const StageContext context = make_context(config);
    switch (config.experiment) {
      case ExperimentKind::PhaseMatch:
        run_phasematch_stage(context);
        break;
      case ExperimentKind::Spectrum:
        run_phasematch_stage(context);
        run_spectrum_stage(context);
        break;
      case ExperimentKind::Simulate:
        run_simulate_stage(context);
        break;
      case ExperimentKind::Correlate:
        run_correlate_stage(context, run_simulate_stage(context));
        break;
      case ExperimentKind::Tomography:
        run_tomography_stage(context);
        break;
      case ExperimentKind::FullPipeline:
        run_phasematch_stage(context);
        run_spectrum_stage(context);
        run_correlate_stage(context, run_simulate_stage(context));
        run_tomography_stage(context);
        break;
    }
    return 0;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << '\n';
    return 1;
  }
}

}  // namespace biphoton
