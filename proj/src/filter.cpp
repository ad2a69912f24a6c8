#include "biphoton/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "biphoton/constants.hpp"

namespace biphoton {

void CavitySpec::validate() const {
  if (!(length > 0.0)) throw std::invalid_argument("cavity length must be > 0");
  if (!(finesse > 1.0)) throw std::invalid_argument("finesse must be > 1");
  if (!(peak_transmission > 0.0) || peak_transmission > 1.0)
    throw std::invalid_argument("peak_transmission must be in (0, 1]");
  if (!std::isfinite(center_offset))
    throw std::invalid_argument("center_offset must be finite");
}

void FilterChain::validate() const {
  if (cavities.empty())
    throw std::invalid_argument("filter chain needs at least one cavity");
  for (const auto& cavity : cavities) cavity.validate();
  if (!(lock_frequency > 0.0))
    throw std::invalid_argument("lock_frequency must be > 0");
}

double cavity_fsr(double length) {
  if (!(length > 0.0)) throw std::invalid_argument("cavity length must be > 0");
  return kSpeedOfLight / (2.0 * length);
}

double cavity_linewidth(const CavitySpec& cavity) {
  cavity.validate();
  return cavity_fsr(cavity.length) / cavity.finesse;
}

double airy_relative_transmission(const CavitySpec& cavity, double detuning) {
  const double fsr = cavity_fsr(cavity.length);
  const double coeff = 2.0 * cavity.finesse / kPi;
  const double s = std::sin(kPi * (detuning - cavity.center_offset) / fsr);
  return 1.0 / (1.0 + coeff * coeff * s * s);
}

double airy_transmission(const CavitySpec& cavity, double detuning) {
  return cavity.peak_transmission * airy_relative_transmission(cavity, detuning);
}

double cascade_transmission(const FilterChain& chain, double detuning) {
  double product = 1.0;
  for (const auto& cavity : chain.cavities)
    product *= airy_transmission(cavity, detuning);
  return product;
}

double cascade_relative_transmission(const FilterChain& chain,
                                     double detuning) {
  double product = 1.0;
  for (const auto& cavity : chain.cavities)
    product *= airy_relative_transmission(cavity, detuning);
  return product;
}

namespace {

// Smallest member linewidth; sets every numeric scan scale in this file.
double narrowest_linewidth(const FilterChain& chain) {
  double narrowest = std::numeric_limits<double>::infinity();
  for (const auto& cavity : chain.cavities)
    narrowest = std::min(narrowest, cavity_linewidth(cavity));
  return narrowest;
}

// Bisect cascade_relative_transmission(x) == target on [lo, hi]; assumes the
// value at lo is above target and at hi below (or vice versa).
double bisect_crossing(const FilterChain& chain, double target, double lo,
                       double hi) {
  double flo = cascade_relative_transmission(chain, lo) - target;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = cascade_relative_transmission(chain, mid) - target;
    if ((flo > 0.0) == (fm > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double effective_filter_fwhm(const FilterChain& chain) {
  chain.validate();
  const double scale = narrowest_linewidth(chain);

  // Locate the composite peak near the lock frequency by a fine scan; with
  // zero center offsets it sits at zero detuning, with offsets nearby.
  double peak_x = 0.0;
  double peak_t = cascade_relative_transmission(chain, 0.0);
  const double span = 2.0 * scale;
  const double step = scale / 200.0;
  for (double x = -span; x <= span; x += step) {
    const double t = cascade_relative_transmission(chain, x);
    if (t > peak_t) {
      peak_t = t;
      peak_x = x;
    }
  }

  const double half = 0.5 * peak_t;
  // Expand outward until the transmission falls below half max on each side.
  double right = peak_x + step;
  while (cascade_relative_transmission(chain, right) > half)
    right += 0.25 * scale;
  double left = peak_x - step;
  while (cascade_relative_transmission(chain, left) > half)
    left -= 0.25 * scale;
  const double hi = bisect_crossing(chain, half, peak_x, right);
  const double lo = bisect_crossing(chain, half, peak_x, left);
  return hi - lo;
}

double cascade_ringdown_time(const FilterChain& chain) {
  return 1.0 / (2.0 * kPi * effective_filter_fwhm(chain));
}

namespace {

double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

}  // namespace

double spdc_intensity(const CrystalSpec& crystal, std::size_t grating_index,
                      double pump_frequency, double detuning) {
  const double nu0 = 0.5 * pump_frequency;
  const double lambda_p = kSpeedOfLight / pump_frequency;
  const double lambda_s = kSpeedOfLight / (nu0 + detuning);
  const double lambda_i = kSpeedOfLight / (nu0 - detuning);
  const double dk =
      qpm_mismatch(crystal, grating_index, lambda_p, lambda_s, lambda_i);
  const double s = sinc(0.5 * dk * crystal.length);
  return s * s;
}

double spdc_fwhm(const CrystalSpec& crystal, std::size_t grating_index,
                 double pump_frequency) {
  const double peak = spdc_intensity(crystal, grating_index, pump_frequency, 0.0);
  const double half = 0.5 * peak;
  constexpr double kLimit = 5e12;  // search bound [Hz]

  // March outward until the envelope first drops below half max, then bisect.
  auto crossing = [&](double direction) {
    const double step = 1e9 * direction;
    double prev = 0.0;
    for (double x = step; std::abs(x) <= kLimit; x += step) {
      if (spdc_intensity(crystal, grating_index, pump_frequency, x) < half) {
        double lo = prev, hi = x;
        for (int i = 0; i < 80; ++i) {
          const double mid = 0.5 * (lo + hi);
          if (spdc_intensity(crystal, grating_index, pump_frequency, mid) >=
              half)
            lo = mid;
          else
            hi = mid;
        }
        return 0.5 * (lo + hi);
      }
      prev = x;
    }
    throw std::runtime_error(
        "down-conversion envelope never drops below half max within +-5 THz");
  };

  return crossing(+1.0) - crossing(-1.0);
}

SpdcSpectrum::SpdcSpectrum(const CrystalSpec& crystal,
                           std::size_t grating_index, double pump_frequency,
                           double half_span, std::size_t points)
    : pump_frequency_(pump_frequency), grating_index_(grating_index) {
  crystal.validate();
  if (!(pump_frequency > 0.0))
    throw std::invalid_argument("pump frequency must be > 0");
  if (points < 3) throw std::invalid_argument("spectrum needs >= 3 grid points");

  fwhm_ = spdc_fwhm(crystal, grating_index, pump_frequency);
  half_span_ = half_span > 0.0 ? half_span : 2.0 * fwhm_;

  detunings_.resize(points);
  intensities_.resize(points);
  const double step = 2.0 * half_span_ / static_cast<double>(points - 1);
  double peak = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = -half_span_ + step * static_cast<double>(i);
    detunings_[i] = x;
    intensities_[i] = spdc_intensity(crystal, grating_index, pump_frequency, x);
    peak = std::max(peak, intensities_[i]);
  }
  for (double& value : intensities_) value /= peak;
}

double SpdcSpectrum::intensity(double detuning) const {
  if (detuning < detunings_.front() || detuning > detunings_.back()) return 0.0;
  const auto it =
      std::upper_bound(detunings_.begin(), detunings_.end(), detuning);
  if (it == detunings_.begin()) return intensities_.front();
  if (it == detunings_.end()) return intensities_.back();
  const std::size_t hi = static_cast<std::size_t>(it - detunings_.begin());
  const std::size_t lo = hi - 1;
  const double t =
      (detuning - detunings_[lo]) / (detunings_[hi] - detunings_[lo]);
  return intensities_[lo] + t * (intensities_[hi] - intensities_[lo]);
}

int count_transmission_windows(const FilterChain& chain,
                               const SpdcSpectrum& spectrum, double threshold,
                               double half_span) {
  chain.validate();
  if (!(threshold > 0.0) || threshold >= 1.0)
    throw std::invalid_argument("window threshold must be in (0, 1)");
  const double span = half_span > 0.0 ? half_span : spectrum.fwhm();
  const double step = std::min(1e6, narrowest_linewidth(chain) / 8.0);

  // A window is a maximal run of consecutive grid points at or above the
  // threshold; the step is far below the narrowest feature width, so no
  // window can slip between nodes.
  int windows = 0;
  bool inside = false;
  const auto n = static_cast<long long>(std::ceil(2.0 * span / step));
  for (long long i = 0; i <= n; ++i) {
    const double x = -span + step * static_cast<double>(i);
    const bool above = cascade_relative_transmission(chain, x) >= threshold;
    if (above && !inside) ++windows;
    inside = above;
  }
  return windows;
}

DetuningSampler::DetuningSampler(const SpdcSpectrum& spectrum,
                                 double half_span, std::size_t points) {
  if (!(half_span > 0.0))
    throw std::invalid_argument("sampler half_span must be > 0");
  if (points < 2) throw std::invalid_argument("sampler needs >= 2 grid points");

  grid_.resize(points);
  cdf_.resize(points);
  const double step = 2.0 * half_span / static_cast<double>(points - 1);
  double running = 0.0;
  double prev = spectrum.intensity(-half_span);
  grid_[0] = -half_span;
  cdf_[0] = 0.0;
  for (std::size_t i = 1; i < points; ++i) {
    const double x = -half_span + step * static_cast<double>(i);
    const double value = spectrum.intensity(x);
    running += 0.5 * (prev + value) * step;
    grid_[i] = x;
    cdf_[i] = running;
    prev = value;
  }
  if (!(running > 0.0))
    throw std::invalid_argument("envelope vanishes over the sampling window");
  for (double& c : cdf_) c /= running;
  cdf_.back() = 1.0;
}

double DetuningSampler::sample(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.begin()) return grid_.front();
  if (it == cdf_.end()) return grid_.back();
  const std::size_t hi = static_cast<std::size_t>(it - cdf_.begin());
  const std::size_t lo = hi - 1;
  const double width = cdf_[hi] - cdf_[lo];
  const double t = width > 0.0 ? (u - cdf_[lo]) / width : 0.0;
  return grid_[lo] + t * (grid_[hi] - grid_[lo]);
}

}  // namespace biphoton
