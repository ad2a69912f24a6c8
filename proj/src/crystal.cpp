#include "biphoton/crystal.hpp"

#include <cmath>
#include <sstream>

#include "biphoton/constants.hpp"

namespace biphoton {

namespace {

// Documented validity of the kato-takaoka-2002 coefficients [m]; the blue
// bound is extrapolated from the published 0.43 um down to 0.40 um so the
// 425 nm pump is representable.
constexpr double kWavelengthMin = 0.40e-6;
constexpr double kWavelengthMax = 3.54e-6;
constexpr double kTemperatureMin = -20.0;
constexpr double kTemperatureMax = 200.0;

[[noreturn]] void throw_out_of_range(const char* what, double value,
                                     double lo, double hi) {
  std::ostringstream msg;
  msg << what << " = " << value << " outside validity window [" << lo << ", "
      << hi << "]";
  throw std::domain_error(msg.str());
}

}  // namespace

void CrystalSpec::validate() const {
  if (!(length > 0.0)) throw std::invalid_argument("crystal length must be > 0");
  if (gratings.empty())
    throw std::invalid_argument("crystal needs at least one poling period");
  for (double period : gratings)
    if (!(period > 0.0))
      throw std::invalid_argument("poling period must be > 0");
  if (temperature < kTemperatureMin || temperature > kTemperatureMax)
    throw_out_of_range("temperature [C]", temperature, kTemperatureMin,
                       kTemperatureMax);
}

void FocusSpec::validate() const {
  if (!(xi > 0.0) || !(rayleigh_range > 0.0) || !(waist > 0.0) ||
      !(pump_wavelength > 0.0) || !(pump_index > 0.0))
    throw std::invalid_argument("focus parameters must be positive");
  const double zr = kPi * waist * waist * pump_index / pump_wavelength;
  if (std::abs(zr - rayleigh_range) > 1e-9 * rayleigh_range)
    throw std::invalid_argument(
        "focus spec inconsistent: z_R != pi w0^2 n / lambda");
}

void PhaseMatchPoint::validate() const {
  const double lhs = 1.0 / pump_wavelength;
  const double rhs = 1.0 / signal_wavelength + 1.0 / idler_wavelength;
  if (std::abs(lhs - rhs) > 1e-12 * lhs)
    throw std::invalid_argument("phase-match point violates energy conservation");
}

double refractive_index(double wavelength, OpticAxis axis, double temperature) {
  if (wavelength < kWavelengthMin || wavelength > kWavelengthMax)
    throw_out_of_range("wavelength [m]", wavelength, kWavelengthMin,
                       kWavelengthMax);
  if (temperature < kTemperatureMin || temperature > kTemperatureMax)
    throw_out_of_range("temperature [C]", temperature, kTemperatureMin,
                       kTemperatureMax);

  const double lum = wavelength * 1e6;  // coefficients are quoted for um
  const double l2 = lum * lum;
  double n0_sq, dndt;
  if (axis == OpticAxis::Y) {
    n0_sq = 3.45018 + 0.04341 / (l2 - 0.04597) + 16.98825 / (l2 - 39.43799);
    dndt = (0.1997 / (lum * lum * lum) - 0.4063 / l2 + 0.5154 / lum + 0.5425) *
           1e-5;
  } else {
    n0_sq = 4.59423 + 0.06206 / (l2 - 0.04763) + 110.80672 / (l2 - 86.12171);
    dndt = (0.9221 / (lum * lum * lum) - 2.9220 / l2 + 3.6677 / lum - 0.1897) *
           1e-5;
  }
  // Thermo-optic derivatives are referenced to 20 C.
  return std::sqrt(n0_sq) + (temperature - 20.0) * dndt;
}

double qpm_mismatch(const CrystalSpec& crystal, std::size_t grating_index,
                    double pump_wavelength, double signal_wavelength,
                    double idler_wavelength) {
  if (grating_index >= crystal.gratings.size())
    throw std::invalid_argument("grating index out of range");
  const double lhs = 1.0 / pump_wavelength;
  const double rhs = 1.0 / signal_wavelength + 1.0 / idler_wavelength;
  if (std::abs(lhs - rhs) > 1e-9 * lhs)
    throw std::invalid_argument(
        "pump/signal/idler wavelengths violate energy conservation");

  const double t = crystal.temperature;
  // Type-II assignment: pump and signal along y, idler along z.
  const double kp =
      2.0 * kPi * refractive_index(pump_wavelength, OpticAxis::Y, t) /
      pump_wavelength;
  const double ks =
      2.0 * kPi * refractive_index(signal_wavelength, OpticAxis::Y, t) /
      signal_wavelength;
  const double ki =
      2.0 * kPi * refractive_index(idler_wavelength, OpticAxis::Z, t) /
      idler_wavelength;
  return kp - ks - ki - 2.0 * kPi / crystal.gratings[grating_index];
}

namespace {

// Mismatch at the degenerate point as a function of the signal/idler
// wavelength (pump at half that wavelength).
double degenerate_mismatch(const CrystalSpec& crystal,
                           std::size_t grating_index, double lambda) {
  return qpm_mismatch(crystal, grating_index, 0.5 * lambda, lambda, lambda);
}

}  // namespace

double degenerate_qpm_wavelength(const CrystalSpec& crystal,
                                 std::size_t grating_index) {
  crystal.validate();
  if (grating_index >= crystal.gratings.size())
    throw std::invalid_argument("grating index out of range");

  // Coarse scan for a sign change, 1 nm steps over the search bracket.
  constexpr double kLo = 800e-9;
  constexpr double kHi = 900e-9;
  constexpr double kStep = 1e-9;
  double a = kLo;
  double fa = degenerate_mismatch(crystal, grating_index, a);
  double b = 0.0, fb = 0.0;
  bool bracketed = false;
  for (double x = kLo + kStep; x <= kHi + 0.5 * kStep; x += kStep) {
    fb = degenerate_mismatch(crystal, grating_index, x);
    b = x;
    if (fa == 0.0 || fa * fb <= 0.0) {
      bracketed = true;
      break;
    }
    a = b;
    fa = fb;
  }
  if (!bracketed)
    throw NoPhaseMatchError(
        "no quasi-phase-matched degenerate wavelength in 800-900 nm");

  // Bisection; the interval shrinks below the 1e-14 m tolerance in ~50
  // halvings, leaving the residual mismatch well under 0.1 rad/m.
  while (b - a > 1e-14) {
    const double mid = 0.5 * (a + b);
    const double fm = degenerate_mismatch(crystal, grating_index, mid);
    if (fa * fm <= 0.0) {
      b = mid;
      fb = fm;
    } else {
      a = mid;
      fa = fm;
    }
  }
  return std::abs(fa) < std::abs(fb) ? a : b;
}

PhaseMatchPoint degenerate_phase_match(const CrystalSpec& crystal,
                                       std::size_t grating_index) {
  const double lambda = degenerate_qpm_wavelength(crystal, grating_index);
  PhaseMatchPoint point;
  point.pump_wavelength = 0.5 * lambda;
  point.signal_wavelength = lambda;
  point.idler_wavelength = lambda;
  point.grating_index = grating_index;
  point.mismatch = degenerate_mismatch(crystal, grating_index, lambda);
  point.validate();
  return point;
}

double temperature_tuning_coefficient(const CrystalSpec& crystal,
                                      std::size_t grating_index,
                                      double temperature, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("temperature step must be > 0");
  CrystalSpec shifted = crystal;
  shifted.temperature = temperature + step;
  const double hi = degenerate_qpm_wavelength(shifted, grating_index);
  shifted.temperature = temperature - step;
  const double lo = degenerate_qpm_wavelength(shifted, grating_index);
  return (hi - lo) / (2.0 * step);
}

FocusSpec optimal_pump_waist(double length, double pump_wavelength,
                             double pump_index, double xi) {
  if (!(length > 0.0) || !(pump_wavelength > 0.0) || !(pump_index > 0.0) ||
      !(xi > 0.0))
    throw std::invalid_argument("focus inputs must be positive");
  FocusSpec spec;
  spec.xi = xi;
  spec.rayleigh_range = length / xi;
  spec.waist =
      std::sqrt(spec.rayleigh_range * pump_wavelength / (kPi * pump_index));
  spec.pump_wavelength = pump_wavelength;
  spec.pump_index = pump_index;
  spec.validate();
  return spec;
}

}  // namespace biphoton
