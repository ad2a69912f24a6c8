#pragma once

#include <Eigen/Dense>

namespace biphoton {

/// @brief Two-qubit polarization density matrix in the H/V product basis,
/// ordered |HH>, |HV>, |VH>, |VV> (first slot = arm-A photon).
/// Construction via make() enforces hermiticity and unit trace to 1e-10;
/// the physical flag records whether all eigenvalues are >= -1e-10 (linear
/// tomographic inversion can produce slightly negative ones).
struct DensityMatrix {
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
  bool physical = true;

  /// Validates and wraps a raw matrix; throws std::invalid_argument when it
  /// is not Hermitian or not unit-trace, flags negative eigenvalues.
  static DensityMatrix make(const Eigen::Matrix4cd& matrix);

  /// Probabilities of the four joint H/V outcomes (the matrix diagonal).
  Eigen::Vector4d hv_probabilities() const;

  /// Smallest eigenvalue (diagnostic for near-physical states).
  double min_eigenvalue() const;
};

/// (|HV> - |VH>) / sqrt(2), the target state of the source.
DensityMatrix singlet_state();

/// (|HV> + |VH>) / sqrt(2).
DensityMatrix triplet_psi_plus_state();

/// p |Psi-><Psi-| + (1-p) I/4.
DensityMatrix werner_state(double p);

/// I/4.
DensityMatrix maximally_mixed_state();

/// Normalized |psi><psi| from an arbitrary nonzero vector.
DensityMatrix pure_state(const Eigen::Vector4cd& psi);

/// @brief Bell-diagonal model of the measured source,
/// a |Psi-><Psi-| + b |Psi+><Psi+| + (1-a-b) I/4, with (a, b) chosen in
/// closed form so that the polarization anti-correlation visibilities come
/// out at the requested values: a = (v_hv + v_diag)/2, b = (v_hv - v_diag)/2.
/// Requires v_hv >= v_diag and a physical result.
DensityMatrix calibrated_source_state(double v_hv, double v_diag);

}  // namespace biphoton
