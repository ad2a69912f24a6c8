#pragma once

#include <memory>

#include "biphoton/config.hpp"
#include "biphoton/correlator.hpp"
#include "biphoton/crystal.hpp"
#include "biphoton/filter.hpp"
#include "biphoton/simulation.hpp"

namespace biphoton {

/// @brief Objects every stage derives from one configuration: the
/// phase-matched operating point, the down-conversion envelope, and the
/// filter chain locked to the degenerate frequency.
struct StageContext {
  RunConfig config;
  PhaseMatchPoint phase_match;
  FocusSpec focus;
  std::shared_ptr<const SpdcSpectrum> spectrum;
  FilterChain chain;
  double filter_fwhm = 0.0;  ///< composite transmission FWHM [Hz]

  /// Pair-generation parameters assembled from the configuration.
  SourceConfig source() const;
};

/// Validates the configuration and computes the derived context.
StageContext make_context(const RunConfig& config);

// Stage runners. Each writes its report/data files into
// config.output_dir (which must exist) and returns what later stages
// consume. Everything they emit is a pure function of (config, seed).
void run_phasematch_stage(const StageContext& context);
void run_spectrum_stage(const StageContext& context);
DetectionStreams run_simulate_stage(const StageContext& context);
void run_correlate_stage(const StageContext& context,
                         const DetectionStreams& streams);
void run_tomography_stage(const StageContext& context);

/// @brief Execute the configured experiment end to end: create the output
/// directory, write the manifest and the canonical configuration, run the
/// selected stage(s). Returns 0 on success and 1 on any domain or I/O
/// failure (message to stderr).
int run(const RunConfig& config);

}  // namespace biphoton
