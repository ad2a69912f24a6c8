#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "biphoton/density_matrix.hpp"
#include "biphoton/filter.hpp"
#include "biphoton/rng.hpp"

namespace biphoton {

/// Beam splitter variant behind the crystal.
enum class Splitter { BS50, PBS };

/// Where one photon of a pair ends up.
enum class Arm : std::uint8_t { A, B, Lost };

/// Detector channel label.
enum class Channel : std::uint8_t { A = 0, B = 1 };

/// Whether a record came from a pair photon or detector noise. Diagnostics
/// only: analysis code must not branch on it.
enum class RecordOrigin : std::uint8_t { Pair = 0, Dark = 1 };

/// Joint H/V outcome collapsed at a polarizing splitter.
enum class PairPolarization : std::uint8_t { Undetermined, HH, HV, VH, VV };

/// @brief Pair-generation stage parameters. The default generated rate is
/// calibrated (not first-principles) so that the detected coincidence rate
/// with the default filter chain and detectors reproduces the measured
/// 4.8 pairs/(s mW); the generated figure refers to pairs whose detunings
/// fall inside detuning_span around degeneracy.
struct SourceConfig {
  double pump_power = 70.0;                     ///< [mW]
  double generated_pair_rate_per_mw = 1066.6;   ///< pairs/(s mW) in-span
  std::shared_ptr<const SpdcSpectrum> spectrum; ///< envelope for detunings
  double detuning_span = 200e6;  ///< full sampled width around degeneracy [Hz]
  DensityMatrix polarization_state = singlet_state();
  Splitter splitter = Splitter::PBS;
  /// Pump frequency jitter, rms [Hz]; the 125 kHz master-laser stability
  /// doubled by second-harmonic generation.
  double pump_frequency_jitter_rms = 250e3;
  /// Duration shard length for concurrent chunk processing [s]; part of the
  /// configuration so that one (config, duration, seed) triple fixes the
  /// streams bit-for-bit at any worker count.
  double chunk_seconds = 1.0;

  void validate() const;
};

/// @brief Fiber coupling + detector of one arm.
struct DetectorSpec {
  double efficiency = 0.45;   ///< quantum efficiency
  double dark_rate = 50.0;    ///< [counts/s]
  double jitter_rms = 1e-9;   ///< timing resolution, Gaussian rms [s]
  double arm_coupling = 0.42; ///< fiber coupling efficiency

  void validate() const;
};

/// @brief One generated pair. The idler detuning is not stored: it is
/// defined as pump_offset - signal_detuning, which keeps energy conservation
/// exact at the bit level.
struct PairEvent {
  double emission_time = 0.0;    ///< [s]
  double signal_detuning = 0.0;  ///< signal offset from degeneracy [Hz]
  double pump_offset = 0.0;      ///< pump jitter for this pair [Hz]
  Arm signal_arm = Arm::Lost;
  Arm idler_arm = Arm::Lost;
  PairPolarization polarization = PairPolarization::Undetermined;
};

/// Idler offset from degeneracy [Hz].
inline double idler_detuning(const PairEvent& event) {
  return event.pump_offset - event.signal_detuning;
}

/// @brief One detector click, quantized to the 4 ps timestamp grid.
struct DetectionRecord {
  std::int64_t timestamp_ps = 0;
  Channel channel = Channel::A;
  RecordOrigin origin = RecordOrigin::Pair;
};

inline bool operator==(const DetectionRecord& a, const DetectionRecord& b) {
  return a.timestamp_ps == b.timestamp_ps && a.channel == b.channel &&
         a.origin == b.origin;
}

/// @brief The two per-channel click streams of one run, each sorted by
/// timestamp (ties by origin).
struct DetectionStreams {
  std::vector<DetectionRecord> channel_a;
  std::vector<DetectionRecord> channel_b;
  double duration = 0.0;  ///< acquisition time [s]
};

/// Execution knobs that must not change results, only speed.
struct ExperimentOptions {
  int threads = 0;  ///< OpenMP worker count; 0 = library default
};

/// Nearest point on the 4 ps grid, as integer picoseconds.
std::int64_t quantize_timestamp(double seconds);

/// @brief Homogeneous Poisson pair generation with envelope-distributed
/// detunings and Gaussian pump jitter; splitting included. Chunked
/// internally exactly like run_experiment, so the same seed reproduces the
/// same pairs there.
std::vector<PairEvent> generate_pair_events(const SourceConfig& config,
                                            double duration,
                                            std::uint64_t seed);

/// @brief Assign arms (and for the PBS the collapsed joint polarization,
/// sampled from the state's H/V diagonal; H exits to arm A). For the 50/50
/// splitter, pairs that exit into the same arm are marked lost on both
/// sides: they cannot contribute a cross-channel coincidence.
void split_pair(PairEvent& event, Splitter splitter,
                const DensityMatrix& state, Rng& rng);

/// Result of pushing one photon through the filter line.
struct FilterOutcome {
  bool passed = false;
  double delay = 0.0;  ///< ring-down delay [s], zero when blocked
};

/// @brief Precomputed view over a filter chain: validates once and caches
/// the composite ring-down time so per-photon sampling is cheap.
class FilterResponse {
 public:
  explicit FilterResponse(FilterChain chain);

  const FilterChain& chain() const { return chain_; }
  double effective_fwhm() const { return effective_fwhm_; }
  double ringdown_time() const { return ringdown_time_; }

  /// Absolute transmission probability at a detuning (peak factors included).
  double transmission(double detuning) const;

 private:
  FilterChain chain_;
  double effective_fwhm_;
  double ringdown_time_;
};

/// @brief Bernoulli pass with probability = absolute cascade transmission at
/// the photon's detuning; on success a one-sided-exponential ring-down delay
/// with mean = cached composite ring-down time.
FilterOutcome filter_photon(double detuning, const FilterResponse& response,
                            Rng& rng);

/// Convenience overload; rebuilds the cached response per call.
FilterOutcome filter_photon(double detuning, const FilterChain& chain,
                            Rng& rng);

/// @brief Coupling + quantum-efficiency thinning and Gaussian timing jitter;
/// empty when the photon is lost.
std::optional<double> detect(double arrival_time, const DetectorSpec& detector,
                             Rng& rng);

/// @brief Poisson dark-count process over [0, duration), sorted [s].
std::vector<double> dark_counts(const DetectorSpec& detector, double duration,
                                std::uint64_t seed);

/// @brief Full pipeline: generate pairs, split, filter arm A, detect both
/// arms, add dark counts, apply the electronic delay to channel A, quantize
/// and sort. Clicks falling outside [0, duration] after delays are dropped.
/// Deterministic for a fixed (config, duration, seed) at any worker count:
/// every chunk draws from substreams derived from (seed, chunk index) and the
/// merge is an ordered concatenation.
DetectionStreams run_experiment(const SourceConfig& source,
                                const std::optional<FilterChain>& filter_on_a,
                                const DetectorSpec& detector_a,
                                const DetectorSpec& detector_b, double duration,
                                double electronic_delay, std::uint64_t seed,
                                const ExperimentOptions& options = {});

/// Single-threaded reference implementation; must produce bit-identical
/// streams to run_experiment (checked by tests and the benchmark tool).
DetectionStreams run_experiment_serial(
    const SourceConfig& source, const std::optional<FilterChain>& filter_on_a,
    const DetectorSpec& detector_a, const DetectorSpec& detector_b,
    double duration, double electronic_delay, std::uint64_t seed);

}  // namespace biphoton
