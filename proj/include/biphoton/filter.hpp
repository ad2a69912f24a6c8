#pragma once

#include <cstddef>
#include <vector>

#include "biphoton/crystal.hpp"

namespace biphoton {

/// @brief One Fabry-Perot etalon in the filter line.
struct CavitySpec {
  double length = 0.0;             ///< mirror spacing [m]
  double finesse = 0.0;            ///< FSR / linewidth
  double peak_transmission = 1.0;  ///< on-resonance power transmission
  double center_offset = 0.0;      ///< nearest resonance vs. lock [Hz]

  void validate() const;
};

/// @brief Ordered cascade of cavities, all referenced to one lock frequency
/// (the master laser / atomic transition the cavities are stabilized to).
struct FilterChain {
  std::vector<CavitySpec> cavities;
  double lock_frequency = 0.0;  ///< [Hz]

  void validate() const;
};

/// Free spectral range c / (2 L) [Hz].
double cavity_fsr(double length);

/// Resonance FWHM = FSR / finesse [Hz].
double cavity_linewidth(const CavitySpec& cavity);

/// @brief Airy power transmission at detuning from the lock frequency,
/// including the peak transmission factor:
/// T(d) = T_peak / (1 + (2F/pi)^2 sin^2(pi (d - center_offset) / FSR)).
double airy_transmission(const CavitySpec& cavity, double detuning);

/// Airy transmission normalized to 1 on resonance.
double airy_relative_transmission(const CavitySpec& cavity, double detuning);

/// Product of member transmissions, peak factors included.
double cascade_transmission(const FilterChain& chain, double detuning);

/// Product of peak-normalized member transmissions.
double cascade_relative_transmission(const FilterChain& chain, double detuning);

/// @brief FWHM of the composite transmission window nearest the lock
/// frequency, found numerically [Hz].
double effective_filter_fwhm(const FilterChain& chain);

/// Cavity ring-down time of the composite window, 1 / (2 pi FWHM) [s].
double cascade_ringdown_time(const FilterChain& chain);

/// @brief Relative down-conversion intensity sinc^2(delta_k L / 2) with the
/// signal at nu0 + detuning (y axis) and idler at nu0 - detuning (z axis),
/// nu0 = pump_frequency / 2.
double spdc_intensity(const CrystalSpec& crystal, std::size_t grating_index,
                      double pump_frequency, double detuning);

/// @brief Full width at half maximum of the down-conversion envelope [Hz];
/// throws std::runtime_error if no half-max crossing exists within +-5 THz.
double spdc_fwhm(const CrystalSpec& crystal, std::size_t grating_index,
                 double pump_frequency);

/// @brief Immutable tabulated down-conversion envelope around degeneracy.
/// Peak-normalized; linear interpolation between grid nodes, zero outside
/// the tabulated span. Safe to share across threads after construction.
class SpdcSpectrum {
 public:
  /// Tabulates over [-half_span, +half_span]; half_span = 0 picks 2x the
  /// envelope FWHM. The default grid keeps node spacing well below the
  /// envelope's curvature scale.
  SpdcSpectrum(const CrystalSpec& crystal, std::size_t grating_index,
               double pump_frequency, double half_span = 0.0,
               std::size_t points = 4097);

  double pump_frequency() const { return pump_frequency_; }
  /// Degenerate signal/idler frequency, pump / 2 [Hz].
  double center_frequency() const { return 0.5 * pump_frequency_; }
  double fwhm() const { return fwhm_; }
  double half_span() const { return half_span_; }
  std::size_t grating_index() const { return grating_index_; }

  /// Interpolated relative intensity at a detuning from center [dimensionless].
  double intensity(double detuning) const;

  const std::vector<double>& detunings() const { return detunings_; }
  const std::vector<double>& intensities() const { return intensities_; }

 private:
  double pump_frequency_;
  double half_span_;
  double fwhm_;
  std::size_t grating_index_;
  std::vector<double> detunings_;
  std::vector<double> intensities_;
};

/// @brief Number of disjoint detuning intervals where the cascade's relative
/// transmission reaches the threshold, scanned over +-half_span around lock
/// (half_span = 0 uses the spectrum's FWHM). Scan step is 1 MHz or an eighth
/// of the narrowest cavity linewidth, whichever is finer.
int count_transmission_windows(const FilterChain& chain,
                               const SpdcSpectrum& spectrum, double threshold,
                               double half_span = 0.0);

/// @brief Inverse-CDF sampler for detunings, restricted to a window of the
/// tabulated envelope. Immutable after construction; one uniform variate in
/// [0,1) maps to one detuning.
class DetuningSampler {
 public:
  DetuningSampler(const SpdcSpectrum& spectrum, double half_span,
                  std::size_t points = 2049);

  double sample(double u) const;

 private:
  std::vector<double> grid_;
  std::vector<double> cdf_;  // normalized to end at 1
};

}  // namespace biphoton
