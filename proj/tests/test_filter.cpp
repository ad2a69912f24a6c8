// Fabry-Perot cascade and down-conversion envelope tests. Frozen numbers
// come from an independent high-precision evaluation of the same design:
// a 77.5 um and a 10 mm cavity, finesse 620 each, peak transmission 0.88.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <stdexcept>

#include "biphoton/constants.hpp"
#include "biphoton/crystal.hpp"
#include "biphoton/filter.hpp"

using namespace biphoton;

namespace {

CavitySpec short_cavity() { return {77.5e-6, 620.0, 0.88, 0.0}; }
CavitySpec long_cavity() { return {10e-3, 620.0, 0.88, 0.0}; }

FilterChain design_chain() {
  FilterChain chain;
  chain.cavities = {short_cavity(), long_cavity()};
  chain.lock_frequency = kSpeedOfLight / 850e-9;
  return chain;
}

SpdcSpectrum design_spectrum() {
  const CrystalSpec crystal;
  const PhaseMatchPoint point = degenerate_phase_match(crystal, 0);
  return SpdcSpectrum(crystal, 0, kSpeedOfLight / point.pump_wavelength);
}

}  // namespace

TEST_CASE("free spectral ranges match the frozen design values") {
  CHECK(cavity_fsr(77.5e-6) == doctest::Approx(1.9341449e12).epsilon(1e-6));
  CHECK(cavity_fsr(10e-3) == doctest::Approx(14.9896229e9).epsilon(1e-6));
}

TEST_CASE("cavity linewidths are FSR over finesse") {
  CHECK(cavity_linewidth(short_cavity()) ==
        doctest::Approx(3.1195885e9).epsilon(1e-6));
  CHECK(cavity_linewidth(long_cavity()) ==
        doctest::Approx(24.176811e6).epsilon(1e-6));
}

TEST_CASE("airy transmission peaks, halves and repeats where it should") {
  const CavitySpec cavity = long_cavity();
  const double fsr = cavity_fsr(cavity.length);
  const double lw = cavity_linewidth(cavity);
  CHECK(airy_transmission(cavity, 0.0) ==
        doctest::Approx(0.88).epsilon(1e-12));
  // Half maximum at half a linewidth (to the large-finesse approximation).
  CHECK(airy_transmission(cavity, 0.5 * lw) ==
        doctest::Approx(0.44).epsilon(1e-4));
  // Deep Airy minimum between orders.
  CHECK(airy_transmission(cavity, 0.5 * fsr) ==
        doctest::Approx(0.88 / (1.0 + std::pow(2.0 * 620.0 / kPi, 2.0)))
            .epsilon(1e-9));
  // Exact periodicity in the FSR.
  CHECK(airy_transmission(cavity, 3.7e6 + fsr) ==
        doctest::Approx(airy_transmission(cavity, 3.7e6)).epsilon(1e-9));
  // Relative form is peak-normalized.
  CHECK(airy_relative_transmission(cavity, 0.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a center offset moves the resonance") {
  CavitySpec cavity = long_cavity();
  cavity.center_offset = 40e6;
  CHECK(airy_transmission(cavity, 40e6) ==
        doctest::Approx(0.88).epsilon(1e-12));
  CHECK(airy_transmission(cavity, 0.0) < 0.5);
}

TEST_CASE("cascade transmission is the member product") {
  const FilterChain chain = design_chain();
  const double d = 11e6;
  CHECK(cascade_transmission(chain, d) ==
        doctest::Approx(airy_transmission(chain.cavities[0], d) *
                        airy_transmission(chain.cavities[1], d))
            .epsilon(1e-12));
  CHECK(cascade_relative_transmission(chain, 0.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cascade_transmission(chain, 0.0) ==
        doctest::Approx(0.88 * 0.88).epsilon(1e-12));
}

TEST_CASE("cavity validation rejects nonsense") {
  CavitySpec cavity = long_cavity();
  cavity.finesse = 0.0;
  CHECK_THROWS_AS(cavity.validate(), std::invalid_argument);
  cavity = long_cavity();
  cavity.peak_transmission = 1.2;
  CHECK_THROWS_AS(cavity.validate(), std::invalid_argument);
  FilterChain chain = design_chain();
  chain.lock_frequency = -1.0;
  CHECK_THROWS_AS(chain.validate(), std::invalid_argument);
}

TEST_CASE("composite window FWHM and ring-down match the frozen design") {
  const FilterChain chain = design_chain();
  CHECK(effective_filter_fwhm(chain) ==
        doctest::Approx(24.175385e6).epsilon(1e-7));
  CHECK(cascade_ringdown_time(chain) ==
        doctest::Approx(6.5833468e-9).epsilon(1e-7));
}

TEST_CASE("two identical Lorentzian-like windows narrow by sqrt(sqrt(2)-1)") {
  FilterChain pair;
  pair.cavities = {long_cavity(), long_cavity()};
  pair.lock_frequency = kSpeedOfLight / 850e-9;
  const double single = cavity_linewidth(long_cavity());
  CHECK(effective_filter_fwhm(pair) ==
        doctest::Approx(single * std::sqrt(std::sqrt(2.0) - 1.0))
            .epsilon(0.02));
}

TEST_CASE("down-conversion envelope has the frozen width on both gratings") {
  const CrystalSpec crystal;
  const PhaseMatchPoint p0 = degenerate_phase_match(crystal, 0);
  CHECK(spdc_fwhm(crystal, 0, kSpeedOfLight / p0.pump_wavelength) ==
        doctest::Approx(129.0991385e9).epsilon(1e-6));
  const PhaseMatchPoint p1 = degenerate_phase_match(crystal, 1);
  CHECK(spdc_fwhm(crystal, 1, kSpeedOfLight / p1.pump_wavelength) ==
        doctest::Approx(129.4316e9).epsilon(1e-4));
}

TEST_CASE("envelope width scales inversely with crystal length") {
  CrystalSpec crystal;
  const PhaseMatchPoint point = degenerate_phase_match(crystal, 0);
  const double pump_frequency = kSpeedOfLight / point.pump_wavelength;
  const double fwhm_20 = spdc_fwhm(crystal, 0, pump_frequency);
  crystal.length = 40e-3;
  const double fwhm_40 = spdc_fwhm(crystal, 0, pump_frequency);
  CHECK(fwhm_40 / fwhm_20 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("envelope peaks at degeneracy when pumped on the matched root") {
  const CrystalSpec crystal;
  const PhaseMatchPoint point = degenerate_phase_match(crystal, 0);
  CHECK(spdc_intensity(crystal, 0, kSpeedOfLight / point.pump_wavelength,
                       0.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("tabulated envelope interpolates the direct evaluation") {
  const CrystalSpec crystal;
  const PhaseMatchPoint point = degenerate_phase_match(crystal, 0);
  const double pump_frequency = kSpeedOfLight / point.pump_wavelength;
  const SpdcSpectrum spectrum(crystal, 0, pump_frequency);
  CHECK(spectrum.fwhm() == doctest::Approx(129.0991385e9).epsilon(1e-6));
  CHECK(spectrum.half_span() ==
        doctest::Approx(2.0 * spectrum.fwhm()).epsilon(1e-12));
  CHECK(spectrum.intensity(0.0) == doctest::Approx(1.0).epsilon(1e-9));
  for (const double d : {3.21e9, -47.8e9, 101.3e9, -220.0e9}) {
    CHECK(spectrum.intensity(d) ==
          doctest::Approx(spdc_intensity(crystal, 0, pump_frequency, d))
              .epsilon(1e-4));
  }
  // Zero outside the tabulated span.
  CHECK(spectrum.intensity(spectrum.half_span() * 1.01) == 0.0);
}

TEST_CASE("window count: one for the design chain, nine for the long cavity "
          "alone over its FSR comb") {
  const SpdcSpectrum spectrum = design_spectrum();
  CHECK(count_transmission_windows(design_chain(), spectrum, 0.5) == 1);
  FilterChain alone;
  alone.cavities = {long_cavity()};
  alone.lock_frequency = kSpeedOfLight / 850e-9;
  CHECK(count_transmission_windows(alone, spectrum, 0.5, 71.5e9) == 9);
}

TEST_CASE("window threshold must lie in (0, 1)") {
  const SpdcSpectrum spectrum = design_spectrum();
  CHECK_THROWS_AS(count_transmission_windows(design_chain(), spectrum, 1.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(count_transmission_windows(design_chain(), spectrum, 0.0),
                  std::invalid_argument);
}

TEST_CASE("detuning sampler is monotone and symmetric on a flat window") {
  const SpdcSpectrum spectrum = design_spectrum();
  const DetuningSampler sampler(spectrum, 100e6);
  // Across +-100 MHz the 129 GHz envelope is flat to ~1e-5, so the inverse
  // CDF is linear in u to that accuracy.
  CHECK(std::abs(sampler.sample(0.5)) < 1e5);
  CHECK(sampler.sample(0.25) == doctest::Approx(-50e6).epsilon(1e-3));
  CHECK(sampler.sample(0.75) == doctest::Approx(50e6).epsilon(1e-3));
  double previous = sampler.sample(0.0);
  CHECK(previous == doctest::Approx(-100e6).epsilon(1e-6));
  for (double u = 0.05; u < 1.0; u += 0.05) {
    const double x = sampler.sample(u);
    CHECK(x > previous);
    previous = x;
  }
}
