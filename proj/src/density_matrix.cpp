#include "biphoton/density_matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace biphoton {

DensityMatrix DensityMatrix::make(const Eigen::Matrix4cd& matrix) {
  const double herm_err = (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
  if (herm_err > 1e-10)
    throw std::invalid_argument("density matrix is not Hermitian");
  const double trace_err = std::abs(matrix.trace() - std::complex<double>(1.0));
  if (trace_err > 1e-10)
    throw std::invalid_argument("density matrix trace differs from 1");

  DensityMatrix state;
  state.rho = 0.5 * (matrix + matrix.adjoint());  // exact hermitization
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(state.rho);
  state.physical = solver.eigenvalues().minCoeff() >= -1e-10;
  return state;
}

Eigen::Vector4d DensityMatrix::hv_probabilities() const {
  return rho.diagonal().real();
}

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(rho);
  return solver.eigenvalues().minCoeff();
}

namespace {

Eigen::Vector4cd singlet_vector() {
  Eigen::Vector4cd psi;
  psi << 0.0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0;
  return psi;
}

Eigen::Vector4cd psi_plus_vector() {
  Eigen::Vector4cd psi;
  psi << 0.0, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0;
  return psi;
}

}  // namespace

DensityMatrix singlet_state() { return pure_state(singlet_vector()); }

DensityMatrix triplet_psi_plus_state() { return pure_state(psi_plus_vector()); }

DensityMatrix werner_state(double p) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("Werner mixing parameter must be in [0, 1]");
  const Eigen::Vector4cd psi = singlet_vector();
  const Eigen::Matrix4cd rho =
      p * (psi * psi.adjoint()) +
      (1.0 - p) * 0.25 * Eigen::Matrix4cd::Identity();
  return DensityMatrix::make(rho);
}

DensityMatrix maximally_mixed_state() {
  return DensityMatrix::make(0.25 * Eigen::Matrix4cd::Identity());
}

DensityMatrix pure_state(const Eigen::Vector4cd& psi) {
  const double norm = psi.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("state vector must be nonzero");
  const Eigen::Vector4cd unit = psi / norm;
  return DensityMatrix::make(unit * unit.adjoint());
}

DensityMatrix calibrated_source_state(double v_hv, double v_diag) {
  if (!(v_hv >= v_diag))
    throw std::invalid_argument(
        "calibration expects v_hv >= v_diag for this Bell-diagonal family");
  const double a = 0.5 * (v_hv + v_diag);
  const double b = 0.5 * (v_hv - v_diag);
  const double rest = 1.0 - a - b;
  if (rest < -1e-12 || b < -1e-12)
    throw std::invalid_argument("requested visibilities have no physical state");

  const Eigen::Vector4cd minus = singlet_vector();
  const Eigen::Vector4cd plus = psi_plus_vector();
  const Eigen::Matrix4cd rho = a * (minus * minus.adjoint()) +
                               b * (plus * plus.adjoint()) +
                               rest * 0.25 * Eigen::Matrix4cd::Identity();
  DensityMatrix state = DensityMatrix::make(rho);
  if (!state.physical)
    throw std::invalid_argument("requested visibilities have no physical state");
  return state;
}

}  // namespace biphoton
