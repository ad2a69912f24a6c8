#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "biphoton/density_matrix.hpp"
#include "biphoton/rng.hpp"

namespace biphoton {

/// @brief Analyzer state selected by a quarter- and a half-waveplate in
/// front of an H-transmitting polarizing splitter. Fast-axis angles are
/// measured from horizontal; each plate is R(theta) diag(1, e^{i phi})
/// R(-theta) with phi = pi/2 (quarter) or pi (half), light passing the
/// quarter plate first. The returned state is the transmission-port
/// projector pulled back through both plates.
Eigen::Vector2cd waveplate_projector(double quarter_angle, double half_angle);

/// @brief One two-arm analyzer configuration of the tomography sequence.
struct MeasurementSetting {
  std::string label;       ///< e.g. "DR": arm-A state then arm-B state
  double quarter_a = 0.0;  ///< [rad]
  double half_a = 0.0;     ///< [rad]
  double quarter_b = 0.0;  ///< [rad]
  double half_b = 0.0;     ///< [rad]
  Eigen::Vector4cd projector = Eigen::Vector4cd::Zero();  ///< product state

  /// Throws unless the projector is normalized to 1e-12.
  void validate() const;
};

/// @brief The standard 16-projector product-state sequence over
/// {H, V, D, R, L} used for two-qubit reconstruction, in its conventional
/// order (HH, HV, VV, VH, RH, RV, DV, DH, DR, DD, RD, HD, VD, VL, HL, RL).
std::vector<MeasurementSetting> canonical_16_settings();

/// @brief Measured coincidences per analyzer setting, with the per-setting
/// accidental estimate carried alongside.
struct TomographyRecord {
  struct Entry {
    MeasurementSetting setting;
    double raw_count = 0.0;
    double accidental_estimate = 0.0;
  };
  std::vector<Entry> entries;
  double counts_per_setting = 0.0;  ///< nominal N per setting

  void validate() const;
};

/// @brief Forward model: count ~ Poisson(N Tr(rho Pi) + accidental_mean) per
/// setting, with one derived RNG substream per setting index.
TomographyRecord simulate_counts(const DensityMatrix& state,
                                 const std::vector<MeasurementSetting>& settings,
                                 double counts_per_setting,
                                 double accidental_mean, std::uint64_t seed);

/// Noiseless counts: exactly N Tr(rho Pi), zero accidentals.
TomographyRecord exact_counts(const DensityMatrix& state,
                              const std::vector<MeasurementSetting>& settings,
                              double counts_per_setting);

/// Result of accidental subtraction; clamped reports whether any setting
/// hit the max(0, raw - estimate) clamp.
struct CorrectedCounts {
  std::vector<double> counts;
  bool clamped = false;
};

/// corrected = max(0, raw - estimate) per setting.
CorrectedCounts subtract_accidentals(const TomographyRecord& record);

/// @brief Invert the linear map counts -> rho on the 16-projector basis,
/// hermitize and trace-normalize. The output may be non-physical (negative
/// eigenvalues) on noisy data; the flag on DensityMatrix says which.
DensityMatrix linear_reconstruction(const TomographyRecord& record);

/// Eigenvalue clipping at zero + renormalization (projection to the
/// physical set); used to seed the likelihood optimizer.
DensityMatrix physicalize(const DensityMatrix& state);

/// Optimizer knobs for mle_reconstruction.
struct MleOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-10;  ///< on the log-likelihood change
  int random_restarts = 4;            ///< besides the linear-estimate start
  std::uint64_t restart_seed = 0x243F6A8885A308D3ULL;  ///< fixed by default
};

/// @brief Thrown when the likelihood optimizer stagnates; carries the best
/// iterate found and the gradient norm there.
struct MleStagnation : std::runtime_error {
  MleStagnation(const std::string& message, DensityMatrix best_in,
                double gradient_norm_in)
      : std::runtime_error(message),
        best(std::move(best_in)),
        gradient_norm(gradient_norm_in) {}
  DensityMatrix best;
  double gradient_norm;
};

/// @brief Maximum-likelihood reconstruction: rho = T^dag T / Tr(T^dag T)
/// with a lower-triangular complex T (16 real parameters, overall flux
/// absorbed in T's scale), maximizing the Poisson log-likelihood
/// sum_i [k_i ln mu_i - mu_i] by damped Gauss-Newton (Fisher scoring).
/// Physical by construction for any non-negative counts.
DensityMatrix mle_reconstruction(const TomographyRecord& record,
                                 const MleOptions& options = {});

/// @brief Poisson log-likelihood of a state against a record, with the
/// per-state optimal flux scale s* = sum(k) / sum(Tr(rho Pi)) applied.
/// Larger is better; lets callers compare estimates on one scale.
double tomography_log_likelihood(const TomographyRecord& record,
                                 const DensityMatrix& state);

/// @brief Wootters concurrence via the spin-flipped-overlap construction:
/// C = max(0, l1 - l2 - l3 - l4), l_i the descending square roots of the
/// eigenvalues of rho (sy x sy) rho* (sy x sy). Clamped to [0, 1].
double concurrence(const DensityMatrix& state);

/// Overlap <Psi-| rho |Psi-> with the singlet.
double fidelity_with_singlet(const DensityMatrix& state);

/// Product measurement basis for polarization-correlation visibility.
enum class VisibilityBasis { HV, Diagonal };

/// @brief Anti-correlation visibility V = (anti - corr)/(anti + corr) of the
/// joint outcome probabilities in the chosen product basis.
double visibility(const DensityMatrix& state, VisibilityBasis basis);

/// @brief Entanglement metrics with (optionally bootstrapped) uncertainties.
/// Metric values are clamped to [0, 1].
struct EntanglementReport {
  double concurrence = 0.0;
  double fidelity = 0.0;
  double visibility_hv = 0.0;
  double visibility_diag = 0.0;
  double concurrence_sigma = 0.0;
  double fidelity_sigma = 0.0;
  double visibility_hv_sigma = 0.0;
  double visibility_diag_sigma = 0.0;

  void validate() const;
};

/// Metrics of one state; uncertainty fields left at zero.
EntanglementReport entanglement_report(const DensityMatrix& state);

/// @brief Bootstrap: Poisson-resample the raw counts n_resamples times with
/// per-resample derived seeds, re-run the MLE and metrics, and report the
/// central estimate (MLE of the original record) with sample standard
/// deviations. Resamples run concurrently; the reduction is ordered, so the
/// result is identical for any worker count.
EntanglementReport bootstrap_errors(const TomographyRecord& record,
                                    int n_resamples, std::uint64_t seed,
                                    int threads = 0);

/// Single-threaded reference implementation (same output).
EntanglementReport bootstrap_errors_serial(const TomographyRecord& record,
                                           int n_resamples,
                                           std::uint64_t seed);

}  // namespace biphoton
