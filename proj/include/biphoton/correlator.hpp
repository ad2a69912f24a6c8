#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "biphoton/simulation.hpp"

namespace biphoton {

/// @brief Binned arrival-time differences with the acquisition metadata
/// needed for rate extraction. Immutable once built. The delay convention is
/// stream B minus stream A as passed to build_histogram; the channel-stream
/// overload orders the channels so the axis reads A minus B.
struct CoincidenceHistogram {
  double bin_width = 1e-9;    ///< [s]
  double t_min = -200e-9;     ///< window start, inclusive [s]
  double t_max = 200e-9;      ///< window end, exclusive [s]
  std::vector<std::int64_t> counts;
  double acquisition_time = 0.0;  ///< [s]
  double rate_a = 0.0;            ///< singles rate, channel A [counts/s]
  double rate_b = 0.0;            ///< singles rate, channel B [counts/s]

  std::size_t bins() const { return counts.size(); }
  double bin_center(std::size_t index) const {
    return t_min + (static_cast<double>(index) + 0.5) * bin_width;
  }
  void validate() const;
};

/// @brief Delay histogram of all pairs (a, b) with b - a inside
/// [t_min, t_max), built with a two-index sweep in O(N_A + N_B + pairs).
/// Streams are integer picoseconds and must be sorted ascending; the window
/// must be an integer number of bins. Partitions of stream A are processed
/// concurrently and merged by bin-wise addition.
CoincidenceHistogram build_histogram(std::span<const std::int64_t> stream_a,
                                     std::span<const std::int64_t> stream_b,
                                     double bin_width, double t_min,
                                     double t_max, double acquisition_time,
                                     int threads = 0);

/// Single-threaded reference implementation (same contract, same output).
CoincidenceHistogram build_histogram_serial(
    std::span<const std::int64_t> stream_a,
    std::span<const std::int64_t> stream_b, double bin_width, double t_min,
    double t_max, double acquisition_time);

/// @brief Convenience: histogram a simulated run's two channels with the
/// unfiltered channel B as the reference, so the delay axis is channel A
/// minus channel B and the filtered arm's ring-down decays rightward.
/// rate_a / rate_b still report the per-channel singles rates.
CoincidenceHistogram build_histogram(const DetectionStreams& streams,
                                     double bin_width, double t_min,
                                     double t_max, int threads = 0);

/// @brief Fitted one-sided exponential decay over a flat background, with
/// the onset edge smeared by the detectors' Gaussian timing jitter:
/// model(t) = background + amplitude * E(t) where E is the unit-amplitude
/// exponential exp(-(t - onset) / decay_time) * [t >= onset] convolved with
/// a Gaussian of rms edge_width. edge_width -> 0 recovers the sharp-onset
/// exponential; fitting the sharp model directly on jitter-smeared data
/// biases decay_time upward by over 10%. The bandwidth is the single-pole
/// linewidth 1/(2 pi tau).
struct DecayFit {
  double amplitude = 0.0;    ///< [counts/bin]
  double decay_time = 0.0;   ///< tau [s]
  double background = 0.0;   ///< [counts/bin]
  double onset = 0.0;        ///< t0 [s]
  double edge_width = 0.0;   ///< Gaussian rms of the onset edge [s]
  double bandwidth = 0.0;    ///< 1 / (2 pi tau) [Hz]
  double amplitude_sigma = 0.0;
  double decay_time_sigma = 0.0;
  double background_sigma = 0.0;
  double onset_sigma = 0.0;
  double edge_width_sigma = 0.0;
  double bandwidth_sigma = 0.0;
  int iterations = 0;
  double chi_square = 0.0;  ///< weighted residual sum at the optimum
};

/// @brief Thrown when the decay fit cannot run (no detectable peak) or does
/// not converge within the iteration budget.
struct FitError : std::runtime_error {
  FitError(const std::string& message, double residual_norm_in,
           int iterations_in)
      : std::runtime_error(message),
        residual_norm(residual_norm_in),
        iterations(iterations_in) {}
  double residual_norm;
  int iterations;
};

/// @brief Damped least squares (Levenberg-Marquardt) with analytic Jacobian
/// and Poisson weights 1/max(count, 1); at most 200 iterations, relative
/// parameter tolerance 1e-8. Requires a peak standing at least five standard
/// deviations above the estimated background.
DecayFit fit_decay(const CoincidenceHistogram& histogram);

/// @brief Background-subtracted counts inside [onset, onset + 7 tau], per
/// second of acquisition. Zero-amplitude fits give exactly zero.
double coincidence_rate(const CoincidenceHistogram& histogram,
                        const DecayFit& fit);

/// One multiplicative loss factor with a human-readable label.
using EfficiencyFactor = std::pair<std::string, double>;

/// Product of the factors; each must lie in (0, 1]. Empty list gives 1.
double efficiency_budget(const std::vector<EfficiencyFactor>& factors);

/// The source's design loss chain: two cavity peaks, fiber, detector.
std::vector<EfficiencyFactor> design_efficiency_budget();

/// @brief Detected-rate bookkeeping around one measured figure.
struct BrightnessReport {
  double detected_pairs_per_s_per_mw = 0.0;
  double extrapolated_rate = 0.0;     ///< pairs/s at the given pump power
  double spectral_brightness = 0.0;   ///< generated pairs/(s MHz mW)
  std::vector<EfficiencyFactor> budget;

  void validate() const;
};

/// @brief extrapolated = rate_per_mw * pump_power; spectral brightness =
/// rate_per_mw / (detector_efficiency^2 * bandwidth_in_MHz). Bandwidth is
/// passed in Hz. Zero rate gives an all-zero report; zero efficiency or
/// bandwidth is an argument error.
BrightnessReport brightness_report(
    double rate_per_mw, double pump_power, double detector_efficiency,
    double bandwidth, std::vector<EfficiencyFactor> budget = {});

}  // namespace biphoton
