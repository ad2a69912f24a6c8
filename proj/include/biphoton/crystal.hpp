#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace biphoton {

/// Crystal optic axis a wave is polarized along (propagation is along x).
enum class OpticAxis { Y, Z };

/// @brief Thrown when no quasi-phase-matched root exists inside the search
/// bracket (e.g. absurd poling period or temperature).
struct NoPhaseMatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// @brief Periodically poled KTP crystal: geometry, poling periods and the
/// operating temperature. Two gratings side by side, selectable by index.
struct CrystalSpec {
  double length = 20e-3;        ///< interaction length [m]
  double width = 6e-3;          ///< informational [m]
  double height = 1e-3;         ///< informational [m]
  std::vector<double> gratings = {14.03e-6, 14.63e-6};  ///< poling periods [m]
  double temperature = 25.0;    ///< [deg C]
  /// Identifier of the temperature-dependent Sellmeier coefficient set.
  std::string dispersion_model = "kato-takaoka-2002";

  /// Throws std::invalid_argument / std::domain_error on a bad field.
  void validate() const;
};

/// @brief Result of the pump-focusing calculation.
struct FocusSpec {
  double xi = 0.0;              ///< focusing parameter L / z_R
  double rayleigh_range = 0.0;  ///< z_R [m]
  double waist = 0.0;           ///< w0 [m]
  double pump_wavelength = 0.0; ///< vacuum [m]
  double pump_index = 0.0;      ///< refractive index at the pump

  /// Checks the internal relation z_R = pi w0^2 n_p / lambda (1e-9 relative).
  void validate() const;
};

/// @brief One collinear quasi-phase-matched solution.
struct PhaseMatchPoint {
  double pump_wavelength = 0.0;    ///< vacuum [m]
  double signal_wavelength = 0.0;  ///< vacuum [m]
  double idler_wavelength = 0.0;   ///< vacuum [m]
  std::size_t grating_index = 0;
  double mismatch = 0.0;           ///< residual delta-k [rad/m]

  /// Checks vacuum-wavelength energy conservation (1e-12 relative).
  void validate() const;
};

/// @brief Refractive index of flux-grown KTP along the y or z axis, with the
/// linear thermo-optic correction; Kato & Takaoka (2002) coefficient set.
/// Validity window [0.40, 3.54] um (the blue end is a short extrapolation of
/// the published 0.43 um bound to cover the 425 nm pump) and [-20, 200] deg C.
/// Pure function: identical inputs give bit-identical outputs.
double refractive_index(double wavelength, OpticAxis axis, double temperature);

/// @brief Collinear type-II quasi-phase-matching mismatch
/// delta_k = k_p - k_s - k_i - 2*pi/Lambda, with the pump and signal along y
/// and the idler along z. Requires 1/lp = 1/ls + 1/li within 1e-9 relative.
double qpm_mismatch(const CrystalSpec& crystal, std::size_t grating_index,
                    double pump_wavelength, double signal_wavelength,
                    double idler_wavelength);

/// @brief Degenerate phase-matched wavelength (signal = idler = 2 * pump) for
/// one grating at the crystal's temperature. Coarse 1 nm scan over 800-900 nm
/// for a sign change, then bisection; throws NoPhaseMatchError without a
/// bracket.
double degenerate_qpm_wavelength(const CrystalSpec& crystal,
                                 std::size_t grating_index);

/// @brief Same root packaged with its residual mismatch.
PhaseMatchPoint degenerate_phase_match(const CrystalSpec& crystal,
                                       std::size_t grating_index);

/// @brief d(lambda_deg)/dT by central difference around the given temperature
/// (default step 1 K) [m/K].
double temperature_tuning_coefficient(const CrystalSpec& crystal,
                                      std::size_t grating_index,
                                      double temperature, double step = 1.0);

/// @brief Pump waist for a target focusing parameter: z_R = L / xi and
/// w0 = sqrt(z_R * lambda / (pi * n_p)).
FocusSpec optimal_pump_waist(double length, double pump_wavelength,
                             double pump_index, double xi);

}  // namespace biphoton
