// Coincidence histogram construction and decay-curve analysis.
//
// The histogram builder is checked against a brute-force O(N^2) pairing
// oracle and for exact agreement between the threaded and serial paths.
// The decay fitter is checked on synthetic data generated from the model
// itself, where every parameter is known exactly.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "biphoton/correlator.hpp"
#include "biphoton/rng.hpp"
#include "biphoton/simulation.hpp"

using namespace biphoton;

namespace {

/// Sorted stream of Poisson arrivals with the given rate over [0, duration),
/// as integer picoseconds.
std::vector<std::int64_t> poisson_stream(double rate, double duration,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::int64_t> stream;
  double t = rng.exponential(1.0 / rate);
  while (t < duration) {
    stream.push_back(quantize_timestamp(t));
    t += rng.exponential(1.0 / rate);
  }
  return stream;
}

/// Reference pairing: count every (a, b) combination whose delay b - a lies
/// inside the window, one bin at a time. Quadratic, but unambiguous.
std::vector<std::int64_t> brute_force_counts(
    const std::vector<std::int64_t>& stream_a,
    const std::vector<std::int64_t>& stream_b, std::int64_t bin_ps,
    std::int64_t t_min_ps, std::int64_t t_max_ps) {
  const std::size_t bins =
      static_cast<std::size_t>((t_max_ps - t_min_ps) / bin_ps);
  std::vector<std::int64_t> counts(bins, 0);
  for (const std::int64_t a : stream_a) {
    for (const std::int64_t b : stream_b) {
      const std::int64_t delay = b - a;
      if (delay < t_min_ps || delay >= t_max_ps) continue;
      ++counts[static_cast<std::size_t>((delay - t_min_ps) / bin_ps)];
    }
  }
  return counts;
}

/// The fitter's response model, re-derived independently: a one-sided
/// exponential with a Gaussian-smeared onset,
///   m(t) = background + amplitude
///            * exp(s^2/(2 tau^2) - d/tau) * Phi(d/s - s/tau),  d = t - onset,
/// written via erfc for stability at the parameters used here.
double smeared_decay(double t, double amplitude, double decay_time,
                     double background, double onset, double edge_width) {
  const double d = t - onset;
  const double u = edge_width / decay_time;
  const double z = d / edge_width - u;
  const double shape =
      std::exp(-u * (z + 0.5 * u)) * 0.5 * std::erfc(-z / std::sqrt(2.0));
  return background + amplitude * shape;
}

CoincidenceHistogram synthetic_histogram(double amplitude, double decay_time,
                                         double background, double onset,
                                         double edge_width) {
  CoincidenceHistogram histogram;
  histogram.bin_width = 1e-9;
  histogram.t_min = -50e-9;
  histogram.t_max = 150e-9;
  histogram.acquisition_time = 100.0;
  const std::size_t bins = 200;
  histogram.counts.resize(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    const double model = smeared_decay(histogram.bin_center(i), amplitude,
                                       decay_time, background, onset,
                                       edge_width);
    histogram.counts[i] = std::llround(model);
  }
  return histogram;
}

}  // namespace

TEST_CASE("histogram window validation") {
  const std::vector<std::int64_t> empty;
  const std::span<const std::int64_t> a(empty);
  CHECK_THROWS_AS(build_histogram(a, a, 0.0, -1e-9, 1e-9, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_histogram(a, a, 1e-9, 1e-9, 1e-9, 1.0),
                  std::invalid_argument);
  // Sub-picosecond bins round to zero grid ticks.
  CHECK_THROWS_AS(build_histogram(a, a, 0.4e-12, -1e-9, 1e-9, 1.0),
                  std::invalid_argument);
  // 2.5 bins of 1 ns in a 2.5 ns window.
  CHECK_THROWS_AS(build_histogram(a, a, 1e-9, 0.0, 2.5e-9, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_WITH(build_histogram(a, a, 1e-9, 0.0, 2.5e-9, 1.0),
                    "window length must be an integer number of bins");
}

TEST_CASE("histogram rejects unsorted streams") {
  const std::vector<std::int64_t> sorted = {0, 100, 200};
  const std::vector<std::int64_t> unsorted = {100, 0, 200};
  CHECK_THROWS_WITH(build_histogram(unsorted, sorted, 1e-9, -10e-9, 10e-9, 1.0),
                    "timestamp stream A is not sorted");
  CHECK_THROWS_WITH(build_histogram(sorted, unsorted, 1e-9, -10e-9, 10e-9, 1.0),
                    "timestamp stream B is not sorted");
}

TEST_CASE("histogram validate rejects inconsistent metadata") {
  CoincidenceHistogram histogram;
  histogram.counts.assign(400, 0);
  histogram.acquisition_time = 1.0;
  CHECK_NOTHROW(histogram.validate());
  histogram.acquisition_time = 0.0;
  CHECK_THROWS_AS(histogram.validate(), std::invalid_argument);
  histogram.acquisition_time = 1.0;
  histogram.counts[3] = -1;
  CHECK_THROWS_AS(histogram.validate(), std::invalid_argument);
  histogram.counts[3] = 0;
  histogram.bin_width = 0.0;
  CHECK_THROWS_AS(histogram.validate(), std::invalid_argument);
}

TEST_CASE("single pair lands in the delay bin b minus a") {
  const std::vector<std::int64_t> stream_a = {1000};
  const std::vector<std::int64_t> stream_b = {6000};  // delay +5000 ps
  const auto histogram =
      build_histogram(stream_a, stream_b, 1e-9, -10e-9, 10e-9, 2.0);
  REQUIRE(histogram.bins() == 20);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < histogram.bins(); ++i) {
    total += histogram.counts[i];
    if (histogram.counts[i] > 0) {
      CHECK(i == 15);  // [-10 ns, ...): bin 15 covers [+5 ns, +6 ns)
      CHECK(histogram.bin_center(i) == doctest::Approx(5.5e-9));
    }
  }
  CHECK(total == 1);
  CHECK(histogram.rate_a == doctest::Approx(0.5));
  CHECK(histogram.rate_b == doctest::Approx(0.5));

  // Reversing the roles mirrors the delay to -5 ns, which sits on a bin
  // boundary and therefore counts in the bin it opens: [-5 ns, -4 ns).
  const auto mirrored =
      build_histogram(stream_b, stream_a, 1e-9, -10e-9, 10e-9, 2.0);
  CHECK(mirrored.counts[5] == 1);
  CHECK(mirrored.bin_center(5) == doctest::Approx(-4.5e-9));
}

TEST_CASE("histogram matches the brute-force pairing oracle") {
  // Dense enough that hundreds of pairings fall inside the window, small
  // enough that the quadratic oracle stays fast.
  auto stream_a = poisson_stream(2e6, 1e-3, 401);
  auto stream_b = poisson_stream(3e6, 1e-3, 402);
  REQUIRE(stream_a.size() > 100);
  REQUIRE(stream_b.size() > 100);
  const double bin = 2e-9;
  const double t_min = -40e-9;
  const double t_max = 40e-9;
  const auto expected =
      brute_force_counts(stream_a, stream_b, 2000, -40000, 40000);
  const auto serial =
      build_histogram_serial(stream_a, stream_b, bin, t_min, t_max, 1e-3);
  const auto threaded =
      build_histogram(stream_a, stream_b, bin, t_min, t_max, 1e-3, 3);
  REQUIRE(serial.counts.size() == expected.size());
  CHECK(serial.counts == expected);
  CHECK(threaded.counts == expected);
  std::int64_t total = 0;
  for (const auto c : expected) total += c;
  CHECK(total > 100);  // the agreement must be exercised, not vacuous
}

TEST_CASE("threaded histogram equals the serial reference") {
  const auto stream_a = poisson_stream(30000.0, 0.5, 17);
  const auto stream_b = poisson_stream(30000.0, 0.5, 18);
  const auto reference = build_histogram_serial(stream_a, stream_b, 1e-9,
                                                -200e-9, 200e-9, 0.5);
  for (const int threads : {1, 2, 3, 0}) {
    const auto histogram = build_histogram(stream_a, stream_b, 1e-9, -200e-9,
                                           200e-9, 0.5, threads);
    CHECK(histogram.counts == reference.counts);
    CHECK(histogram.rate_a == reference.rate_a);
    CHECK(histogram.rate_b == reference.rate_b);
  }
}

TEST_CASE("delaying one stream shifts the delay axis") {
  const auto stream_a = poisson_stream(20000.0, 0.2, 23);
  auto stream_b = poisson_stream(20000.0, 0.2, 24);
  const auto before = build_histogram(stream_a, stream_b, 1e-9, -50e-9, 50e-9,
                                      0.2);
  const std::int64_t shift_ps = 7000;  // 7 bins
  for (auto& b : stream_b) b += shift_ps;
  const auto after = build_histogram(stream_a, stream_b, 1e-9, -50e-9, 50e-9,
                                     0.2);
  // A pair at delay d now sits at d + 7 ns, so bins move up by 7 places
  // wherever both windows cover the pair.
  for (std::size_t i = 7; i < after.bins(); ++i)
    CHECK(after.counts[i] == before.counts[i - 7]);
}

TEST_CASE("channel-stream overload reads channel A minus channel B") {
  DetectionStreams streams;
  streams.duration = 4.0;
  streams.channel_a.push_back({7000, Channel::A, RecordOrigin::Pair});
  streams.channel_a.push_back({40000, Channel::A, RecordOrigin::Dark});
  streams.channel_b.push_back({2000, Channel::B, RecordOrigin::Pair});
  const auto histogram = build_histogram(streams, 1e-9, -10e-9, 10e-9);
  // 7000 - 2000 = +5 ns relative to the channel B reference click.
  CHECK(histogram.counts[15] == 1);
  std::int64_t total = 0;
  for (const auto c : histogram.counts) total += c;
  CHECK(total == 1);
  // Rates stay labeled per channel even though B is the reference stream.
  CHECK(histogram.rate_a == doctest::Approx(2.0 / 4.0));
  CHECK(histogram.rate_b == doctest::Approx(1.0 / 4.0));
  CHECK(histogram.acquisition_time == doctest::Approx(4.0));
}

TEST_CASE("accidental coincidences of independent streams are flat") {
  const double rate_a = 2000.0;
  const double rate_b = 2000.0;
  const double duration = 10.0;
  const auto stream_a = poisson_stream(rate_a, duration, 91);
  const auto stream_b = poisson_stream(rate_b, duration, 92);
  const auto histogram = build_histogram(stream_a, stream_b, 1e-9, -100e-9,
                                         100e-9, duration);
  std::int64_t total = 0;
  for (const auto c : histogram.counts) total += c;
  // Expected accidentals per bin: rate_a * rate_b * duration * bin_width.
  const double per_bin = rate_a * rate_b * duration * 1e-9;
  const double expected = per_bin * static_cast<double>(histogram.bins());
  CHECK(std::abs(static_cast<double>(total) - expected) <
        5.0 * std::sqrt(expected));
}

TEST_CASE("decay fit rejects histograms without a peak") {
  CoincidenceHistogram flat;
  flat.bin_width = 1e-9;
  flat.t_min = -50e-9;
  flat.t_max = 150e-9;
  flat.acquisition_time = 10.0;
  flat.counts.assign(200, 100);
  CHECK_THROWS_WITH_AS(fit_decay(flat),
                       "no detectable coincidence peak above background",
                       FitError);

  CoincidenceHistogram tiny;
  tiny.bin_width = 1e-9;
  tiny.t_min = 0.0;
  tiny.t_max = 4e-9;
  tiny.acquisition_time = 10.0;
  tiny.counts.assign(4, 0);
  CHECK_THROWS_WITH_AS(fit_decay(tiny), "histogram too short to fit a decay",
                       FitError);
}

TEST_CASE("decay fit recovers exact model parameters") {
  const double amplitude = 5e5;
  const double decay_time = 6.6e-9;
  const double background = 250.0;
  const double onset = 20.4e-9;
  const double edge_width = 1.3e-9;
  const auto histogram =
      synthetic_histogram(amplitude, decay_time, background, onset, edge_width);
  const DecayFit fit = fit_decay(histogram);
  CHECK(fit.amplitude == doctest::Approx(amplitude).epsilon(1e-3));
  CHECK(fit.decay_time == doctest::Approx(decay_time).epsilon(1e-3));
  CHECK(fit.background == doctest::Approx(background).epsilon(0.02));
  CHECK(std::abs(fit.onset - onset) < 0.02e-9);
  CHECK(fit.edge_width == doctest::Approx(edge_width).epsilon(0.02));
  CHECK(fit.bandwidth ==
        doctest::Approx(1.0 / (2.0 * std::numbers::pi * fit.decay_time)));
  CHECK(fit.iterations < 200);
  CHECK(fit.chi_square < 1.0);  // integer rounding is the only residual
  CHECK(fit.decay_time_sigma > 0.0);
  CHECK(fit.amplitude_sigma > 0.0);
  CHECK(fit.bandwidth_sigma > 0.0);
}

TEST_CASE("decay fit collapses the edge width on sharp-onset data") {
  // Sharp exponential sampled at bin centers, onset between two centers.
  CoincidenceHistogram histogram;
  histogram.bin_width = 1e-9;
  histogram.t_min = -50e-9;
  histogram.t_max = 150e-9;
  histogram.acquisition_time = 100.0;
  const double amplitude = 4e5;
  const double decay_time = 7.0e-9;
  const double background = 300.0;
  const double onset = 20.3e-9;
  histogram.counts.resize(200);
  for (std::size_t i = 0; i < 200; ++i) {
    const double t = histogram.bin_center(i);
    const double excess =
        t >= onset ? amplitude * std::exp(-(t - onset) / decay_time) : 0.0;
    histogram.counts[i] = std::llround(background + excess);
  }
  const DecayFit fit = fit_decay(histogram);
  CHECK(fit.decay_time == doctest::Approx(decay_time).epsilon(5e-3));
  CHECK(fit.edge_width < 0.5 * histogram.bin_width);
}

TEST_CASE("coincidence rate integrates the excess over seven lifetimes") {
  const auto histogram = synthetic_histogram(5e5, 6.6e-9, 250.0, 20.4e-9,
                                             1.3e-9);
  const DecayFit fit = fit_decay(histogram);
  const double rate = coincidence_rate(histogram, fit);
  double expected = 0.0;
  for (std::size_t i = 0; i < histogram.bins(); ++i) {
    const double center = histogram.bin_center(i);
    if (center < fit.onset || center > fit.onset + 7.0 * fit.decay_time)
      continue;
    expected += static_cast<double>(histogram.counts[i]) - fit.background;
  }
  expected /= histogram.acquisition_time;
  CHECK(rate == doctest::Approx(expected));
  CHECK(rate > 0.0);

  DecayFit empty;
  CHECK(coincidence_rate(histogram, empty) == 0.0);
}

TEST_CASE("efficiency budget multiplies the loss chain") {
  CHECK(efficiency_budget({}) == doctest::Approx(1.0));
  const auto design = design_efficiency_budget();
  REQUIRE(design.size() == 4);
  CHECK(efficiency_budget(design) ==
        doctest::Approx(0.88 * 0.88 * 0.42 * 0.45).epsilon(1e-12));
  CHECK_THROWS_AS(efficiency_budget({{"broken", 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(efficiency_budget({{"gain", 1.2}}), std::invalid_argument);
  CHECK_THROWS_WITH(efficiency_budget({{"gain", 1.2}}),
                    "efficiency factor 'gain' must be in (0, 1]");
}

TEST_CASE("brightness report extrapolates and normalizes the pair rate") {
  const auto report =
      brightness_report(4.8, 70.0, 0.45, 22.4e6, design_efficiency_budget());
  CHECK(report.detected_pairs_per_s_per_mw == doctest::Approx(4.8));
  CHECK(report.extrapolated_rate == doctest::Approx(336.0));
  CHECK(report.spectral_brightness ==
        doctest::Approx(4.8 / (0.45 * 0.45 * 22.4)).epsilon(1e-12));
  CHECK(report.budget.size() == 4);

  const auto idle = brightness_report(0.0, 70.0, 0.45, 22.4e6);
  CHECK(idle.detected_pairs_per_s_per_mw == 0.0);
  CHECK(idle.extrapolated_rate == 0.0);
  CHECK(idle.spectral_brightness == 0.0);

  CHECK_THROWS_AS(brightness_report(-1.0, 70.0, 0.45, 22.4e6),
                  std::invalid_argument);
  CHECK_THROWS_AS(brightness_report(4.8, -1.0, 0.45, 22.4e6),
                  std::invalid_argument);
  CHECK_THROWS_AS(brightness_report(4.8, 70.0, 0.0, 22.4e6),
                  std::invalid_argument);
  CHECK_THROWS_AS(brightness_report(4.8, 70.0, 0.45, 0.0),
                  std::invalid_argument);
}
