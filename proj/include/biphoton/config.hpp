#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "biphoton/crystal.hpp"
#include "biphoton/filter.hpp"
#include "biphoton/simulation.hpp"

namespace biphoton {

/// Which stage of the toolchain a run executes.
enum class ExperimentKind {
  PhaseMatch,
  Spectrum,
  Simulate,
  Correlate,
  Tomography,
  FullPipeline,
};

/// Canonical lower-case name ("phasematch", ..., "full-pipeline").
std::string to_string(ExperimentKind kind);

/// Inverse of to_string; throws std::invalid_argument on unknown names.
ExperimentKind experiment_kind_from_string(const std::string& name);

/// @brief Thrown on malformed configuration text. Lines and columns are
/// 1-based; validation failures detected after parsing carry the offending
/// key instead and set line = column = 0.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& message, int line_in = 0, int column_in = 0)
      : std::runtime_error(message), line(line_in), column(column_in) {}
  int line;
  int column;
};

/// @brief Complete description of one reproducible run: experiment kind,
/// root seed, output directory, and every stage parameter grouped by the
/// module it feeds. Defaults reproduce the source's design operating point.
///
/// On disk this is an INI-style text file:
///
///     # comment (';' also starts one); blank lines ignored
///     [section]
///     key = value
///
/// Section and key names are lower-case with underscores; values are
/// scalars (number, boolean true/false, or bare string). Unknown sections
/// or keys are rejected with their position.
struct RunConfig {
  // [run]
  ExperimentKind experiment = ExperimentKind::FullPipeline;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  int threads = 0;  ///< OpenMP worker count; 0 = library default

  // [crystal] — geometry, poling and operating point.
  double crystal_length_mm = 20.0;
  double crystal_width_mm = 6.0;
  double crystal_height_mm = 1.0;
  double grating_850_period_um = 14.03;
  double grating_854_period_um = 14.63;
  int grating = 850;  ///< which poling grating the pump addresses (850 | 854)
  double temperature_c = 25.0;
  double focusing_xi = 5.68;

  // [filter] — the two locked etalons, short (bandpass) then long (narrow).
  double short_cavity_length_um = 77.5;
  double short_cavity_finesse = 620.0;
  double long_cavity_length_mm = 10.0;
  double long_cavity_finesse = 620.0;
  double cavity_peak_transmission = 0.88;

  // [source] — pair generation and splitting.
  double pump_power_mw = 70.0;
  double pair_rate_per_mw = 1066.6;  ///< generated, in-span pairs/(s mW)
  double detuning_span_mhz = 200.0;  ///< sampled width around degeneracy
  double pump_jitter_khz = 250.0;    ///< pump frequency stability, rms
  double chunk_seconds = 1.0;
  std::string splitter = "pbs";  ///< "pbs" | "bs50"
  /// "singlet" | "calibrated" | "werner"
  std::string polarization_state = "singlet";
  double werner_p = 1.0;
  double calibrated_v_hv = 0.991;
  double calibrated_v_diag = 0.975;
  double duration_s = 10.0;  ///< acquisition time for simulate/correlate

  // [detector] — identical for both arms.
  double detector_efficiency = 0.45;
  double dark_rate_hz = 50.0;
  double jitter_ns = 1.0;
  double fiber_coupling = 0.42;
  double electronic_delay_ns = 100.0;  ///< added to channel A

  // [correlator]
  double bin_ns = 1.0;
  double window_min_ns = -200.0;
  double window_max_ns = 200.0;

  // [tomography]
  double counts_per_setting = 10000.0;
  double accidental_mean = 0.0;  ///< expected accidentals per setting
  int bootstrap_resamples = 0;

  /// Throws ConfigError naming the first key whose value violates its
  /// constraint. Called by load_config / parse_config after reading.
  void validate() const;

  /// Index into CrystalSpec::gratings for the selected grating.
  std::size_t grating_index() const { return grating == 850 ? 0 : 1; }

  // Materialized stage parameter blocks (derived, always consistent with
  // the scalar fields above).
  CrystalSpec crystal_spec() const;
  FilterChain filter_chain(double lock_frequency) const;
  DetectorSpec detector_spec() const;
  /// Polarization density matrix selected by polarization_state.
  DensityMatrix source_state() const;
};

/// Parse configuration text; empty input yields all defaults.
RunConfig parse_config(const std::string& text);

/// @brief Load and validate a configuration file. Missing file throws
/// ConfigError; parse errors carry 1-based line/column.
RunConfig load_config(const std::string& path);

/// @brief Canonical text form: every key in its section, fixed order,
/// shortest round-trip number formatting. parse(dump(c)) reproduces c.
std::string dump_config(const RunConfig& config);

}  // namespace biphoton
