#include "biphoton/correlator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "biphoton/constants.hpp"

#ifdef BIPHOTON_HAVE_OPENMP
#include <omp.h>
#endif

namespace biphoton {

void CoincidenceHistogram::validate() const {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be > 0");
  if (!(t_max > t_min))
    throw std::invalid_argument("window must satisfy t_max > t_min");
  if (!(acquisition_time > 0.0))
    throw std::invalid_argument("acquisition_time must be > 0");
  for (std::int64_t c : counts)
    if (c < 0) throw std::invalid_argument("histogram counts must be >= 0");
}

namespace {

struct WindowGrid {
  std::int64_t bin_ps;
  std::int64_t t_min_ps;
  std::int64_t t_max_ps;
  std::size_t bins;
};

WindowGrid make_grid(double bin_width, double t_min, double t_max) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin_width must be > 0");
  if (!(t_max > t_min))
    throw std::invalid_argument("window must satisfy t_max > t_min");
  WindowGrid grid;
  grid.bin_ps = std::llround(bin_width / kPicosecond);
  grid.t_min_ps = std::llround(t_min / kPicosecond);
  grid.t_max_ps = std::llround(t_max / kPicosecond);
  if (grid.bin_ps <= 0)
    throw std::invalid_argument("bin_width must be at least 1 ps");
  if ((grid.t_max_ps - grid.t_min_ps) % grid.bin_ps != 0)
    throw std::invalid_argument(
        "window length must be an integer number of bins");
  grid.bins = static_cast<std::size_t>((grid.t_max_ps - grid.t_min_ps) /
                                       grid.bin_ps);
  return grid;
}

void require_sorted(std::span<const std::int64_t> stream, const char* name) {
  if (!std::is_sorted(stream.begin(), stream.end())) {
    std::string message = "timestamp stream ";
    message += name;
    message += " is not sorted";
    throw std::invalid_argument(message);
  }
}

// Accumulate the delays b - a for one contiguous range of stream A into a
// local histogram. lo/hi are sweep cursors into stream B carried across
// consecutive a values; both only ever move forward.
void sweep_range(std::span<const std::int64_t> stream_a,
                 std::span<const std::int64_t> stream_b, std::size_t a_begin,
                 std::size_t a_end, const WindowGrid& grid,
                 std::vector<std::int64_t>& counts) {
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t i = a_begin; i < a_end; ++i) {
    const std::int64_t a = stream_a[i];
    const std::int64_t window_lo = a + grid.t_min_ps;
    const std::int64_t window_hi = a + grid.t_max_ps;
    while (lo < stream_b.size() && stream_b[lo] < window_lo) ++lo;
    if (hi < lo) hi = lo;
    while (hi < stream_b.size() && stream_b[hi] < window_hi) ++hi;
    for (std::size_t j = lo; j < hi; ++j) {
      const std::int64_t delay = stream_b[j] - a;
      const std::size_t bin =
          static_cast<std::size_t>((delay - grid.t_min_ps) / grid.bin_ps);
      ++counts[bin];
    }
  }
}

CoincidenceHistogram finish_histogram(std::vector<std::int64_t> counts,
                                      std::size_t n_a, std::size_t n_b,
                                      double bin_width, double t_min,
                                      double t_max, double acquisition_time) {
  CoincidenceHistogram histogram;
  histogram.bin_width = bin_width;
  histogram.t_min = t_min;
  histogram.t_max = t_max;
  histogram.counts = std::move(counts);
  histogram.acquisition_time = acquisition_time;
  if (acquisition_time > 0.0) {
    histogram.rate_a = static_cast<double>(n_a) / acquisition_time;
    histogram.rate_b = static_cast<double>(n_b) / acquisition_time;
  }
  return histogram;
}

}  // namespace

CoincidenceHistogram build_histogram_serial(
    std::span<const std::int64_t> stream_a,
    std::span<const std::int64_t> stream_b, double bin_width, double t_min,
    double t_max, double acquisition_time) {
  const WindowGrid grid = make_grid(bin_width, t_min, t_max);
  require_sorted(stream_a, "A");
  require_sorted(stream_b, "B");
  std::vector<std::int64_t> counts(grid.bins, 0);
  sweep_range(stream_a, stream_b, 0, stream_a.size(), grid, counts);
  return finish_histogram(std::move(counts), stream_a.size(), stream_b.size(),
                          bin_width, t_min, t_max, acquisition_time);
}

CoincidenceHistogram build_histogram(std::span<const std::int64_t> stream_a,
                                     std::span<const std::int64_t> stream_b,
                                     double bin_width, double t_min,
                                     double t_max, double acquisition_time,
                                     int threads) {
  const WindowGrid grid = make_grid(bin_width, t_min, t_max);
  require_sorted(stream_a, "A");
  require_sorted(stream_b, "B");

#ifdef BIPHOTON_HAVE_OPENMP
  const int workers = threads > 0 ? threads : omp_get_max_threads();
  // Integer bin counts merge associatively, so partitioning stream A across
  // workers cannot change the result, only the speed.
  std::vector<std::vector<std::int64_t>> partials(
      static_cast<std::size_t>(workers),
      std::vector<std::int64_t>(grid.bins, 0));
  const std::size_t n = stream_a.size();
#pragma omp parallel num_threads(workers)
  {
    const std::size_t worker = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t per =
        (n + static_cast<std::size_t>(workers) - 1) /
        static_cast<std::size_t>(workers);
    const std::size_t begin = std::min(n, worker * per);
    const std::size_t end = std::min(n, begin + per);
    if (begin < end)
      sweep_range(stream_a, stream_b, begin, end, grid, partials[worker]);
  }
  std::vector<std::int64_t> counts(grid.bins, 0);
  for (const auto& partial : partials)
    for (std::size_t i = 0; i < grid.bins; ++i) counts[i] += partial[i];
#else
  (void)threads;
  std::vector<std::int64_t> counts(grid.bins, 0);
  sweep_range(stream_a, stream_b, 0, stream_a.size(), grid, counts);
#endif

  return finish_histogram(std::move(counts), stream_a.size(), stream_b.size(),
                          bin_width, t_min, t_max, acquisition_time);
}

namespace {

std::vector<std::int64_t> extract_timestamps(
    const std::vector<DetectionRecord>& records) {
  std::vector<std::int64_t> timestamps;
  timestamps.reserve(records.size());
  for (const auto& record : records) timestamps.push_back(record.timestamp_ps);
  return timestamps;
}

}  // namespace

CoincidenceHistogram build_histogram(const DetectionStreams& streams,
                                     double bin_width, double t_min,
                                     double t_max, int threads) {
  const auto a = extract_timestamps(streams.channel_a);
  const auto b = extract_timestamps(streams.channel_b);
  // Channel B (unfiltered) is the reference, so the delay axis reads
  // channel A minus channel B and the filtered channel's ring-down decays
  // toward positive delays.
  CoincidenceHistogram histogram = build_histogram(
      b, a, bin_width, t_min, t_max, streams.duration, threads);
  std::swap(histogram.rate_a, histogram.rate_b);  // keep per-channel labels
  return histogram;
}

namespace {

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double upper = values[mid];
  if (values.size() % 2 == 0) {
    const double lower =
        *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lower + upper);
  }
  return upper;
}

struct FitState {
  double amplitude;
  double decay_time;
  double background;
  double onset;
  double edge_width;
};

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

// Edge widths below this are numerically indistinguishable from a sharp
// onset at any realistic bin width; the fit clamps here instead of letting
// the parameter underflow.
constexpr double kEdgeWidthFloor = 1e-15;  // [s]

// Unit-amplitude decay shape: the one-sided exponential exp(-d / tau) for
// d >= 0 (d = t - onset) convolved with a Gaussian edge of rms width sigma,
//   E(d) = exp(sigma^2 / (2 tau^2) - d / tau) * Phi(d / sigma - sigma / tau),
// with Phi the standard normal CDF. The erfc form is used for moderate
// arguments; deep in the left tail the erfc underflows before the
// exponential prefactor cancels it, so the asymptotic expansion of Phi is
// substituted there (relative error below 1e-5 at the branch point, on a
// shape value that is itself below 1e-14 of the peak). Also returns the
// Gaussian factor phi(d / sigma) shared by the partial derivatives.
struct ShapeTerms {
  double shape;     ///< E(d)
  double gaussian;  ///< phi(d / sigma), standard normal pdf
};

ShapeTerms decay_shape(double d, double decay_time, double edge_width) {
  const double u = edge_width / decay_time;
  const double x = d / edge_width;
  const double z = x - u;
  const double gaussian = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
  double shape;
  if (z >= -8.0) {
    // The exponent equals -u * (z + u / 2) <= 8 u - u^2 / 2 <= 32 on this
    // branch, so the prefactor cannot overflow.
    shape =
        std::exp(-u * (z + 0.5 * u)) * 0.5 * std::erfc(-z / std::sqrt(2.0));
  } else {
    // exp(...) * phi(z) collapses to phi(d / sigma) exactly.
    const double zz = z * z;
    shape = gaussian / (-z) *
            (1.0 - 1.0 / zz + 3.0 / (zz * zz) - 15.0 / (zz * zz * zz));
  }
  return {shape, gaussian};
}

// Model and its five partial derivatives at one bin center.
double model_value(const FitState& p, double t) {
  return p.background +
         p.amplitude *
             decay_shape(t - p.onset, p.decay_time, p.edge_width).shape;
}

Vec5 model_gradient(const FitState& p, double t) {
  const double d = t - p.onset;
  const double tau = p.decay_time;
  const double sigma = p.edge_width;
  const auto [shape, gaussian] = decay_shape(d, tau, sigma);
  Vec5 gradient;
  gradient[0] = shape;
  gradient[1] =
      p.amplitude * ((d / (tau * tau) - sigma * sigma / (tau * tau * tau)) *
                         shape +
                     gaussian * sigma / (tau * tau));
  gradient[2] = 1.0;
  gradient[3] = p.amplitude * (shape / tau - gaussian / sigma);
  gradient[4] =
      p.amplitude * (sigma / (tau * tau) * shape -
                     (d / (sigma * sigma) + 1.0 / tau) * gaussian);
  return gradient;
}

double weighted_residual_sum(const FitState& p,
                             const std::vector<double>& centers,
                             const std::vector<double>& counts,
                             const std::vector<double>& weights) {
  double sum = 0.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double r = counts[i] - model_value(p, centers[i]);
    sum += weights[i] * r * r;
  }
  return sum;
}

// Inverse computed in Marquardt-scaled form: the parameters mix counts and
// seconds, so the raw normal matrix spans ~24 decades and plain LU loses the
// small-curvature directions. Rescaling to unit diagonal first keeps the
// condition number at the parameter-correlation level.
template <int N>
Eigen::Matrix<double, N, N> scaled_inverse(
    const Eigen::Matrix<double, N, N>& matrix) {
  Eigen::Matrix<double, N, 1> scale;
  for (int k = 0; k < N; ++k)
    scale[k] = 1.0 / std::sqrt(std::max(matrix(k, k), 1e-300));
  const Eigen::Matrix<double, N, N> scaled =
      scale.asDiagonal() * matrix * scale.asDiagonal();
  const Eigen::Matrix<double, N, N> inverse = scaled.fullPivLu().inverse();
  return scale.asDiagonal() * inverse * scale.asDiagonal();
}

}  // namespace

DecayFit fit_decay(const CoincidenceHistogram& histogram) {
  histogram.validate();
  const std::size_t n = histogram.bins();
  if (n < 8)
    throw FitError("histogram too short to fit a decay", 0.0, 0);

  std::vector<double> centers(n);
  std::vector<double> counts(n);
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    centers[i] = histogram.bin_center(i);
    counts[i] = static_cast<double>(histogram.counts[i]);
    weights[i] = 1.0 / std::max(counts[i], 1.0);
  }

  // Peak must stand clear of the background before a fit is attempted.
  const std::size_t peak =
      static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) -
                               counts.begin());
  const double background_estimate = median_of(counts);
  if (counts[peak] <=
      background_estimate + 5.0 * std::sqrt(std::max(background_estimate, 1.0)))
    throw FitError("no detectable coincidence peak above background", 0.0, 0);

  FitState p;
  if (peak >= 4) {
    std::vector<double> leading(counts.begin(),
                                counts.begin() + static_cast<long>(peak) - 1);
    p.background = median_of(leading);
  } else {
    p.background = *std::min_element(counts.begin(), counts.end());
  }
  p.amplitude = std::max(counts[peak] - p.background, 1.0);
  p.onset = centers[peak] - 0.5 * histogram.bin_width;
  p.edge_width = 0.5 * histogram.bin_width;
  p.decay_time = 5.0 * histogram.bin_width;
  for (std::size_t i = peak; i < n; ++i) {
    if (counts[i] - p.background <= p.amplitude / std::numbers::e) {
      if (i > peak) p.decay_time = centers[i] - centers[peak];
      break;
    }
  }

  double chi2 = weighted_residual_sum(p, centers, counts, weights);
  double lambda = 1e-3;
  int iteration = 0;
  bool converged = false;
  for (; iteration < 200 && !converged; ++iteration) {
    Mat5 normal = Mat5::Zero();
    Vec5 gradient = Vec5::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec5 g = model_gradient(p, centers[i]);
      const double r = counts[i] - model_value(p, centers[i]);
      normal += weights[i] * g * g.transpose();
      gradient += weights[i] * r * g;
    }

    // Marquardt scaling: solve in units where the normal matrix has unit
    // diagonal, so the mixed counts/seconds parameter scales (spanning ~24
    // decades) do not defeat the linear solver.
    Vec5 scale_vec;
    for (int k = 0; k < 5; ++k)
      scale_vec[k] = 1.0 / std::sqrt(std::max(normal(k, k), 1e-300));
    Mat5 damped = scale_vec.asDiagonal() * normal * scale_vec.asDiagonal();
    for (int k = 0; k < 5; ++k) damped(k, k) += lambda;
    const Vec5 scaled_gradient = scale_vec.asDiagonal() * gradient;
    const Vec5 step =
        scale_vec.asDiagonal() * damped.fullPivLu().solve(scaled_gradient);

    FitState trial = p;
    trial.amplitude += step[0];
    trial.decay_time += step[1];
    trial.background += step[2];
    trial.onset += step[3];
    // Below the floor the edge is numerically sharp; above, growth is capped
    // per step because the Newton step in the edge width diverges as 1/width
    // when the width collapses (gradient ~ width, curvature ~ width^2).
    trial.edge_width =
        std::clamp(p.edge_width + step[4], kEdgeWidthFloor,
                   2.0 * p.edge_width + 0.5 * histogram.bin_width);

    const bool feasible = trial.decay_time > 0.0 && trial.amplitude >= 0.0 &&
                          trial.background >= 0.0;
    const double trial_chi2 =
        feasible ? weighted_residual_sum(trial, centers, counts, weights)
                 : std::numeric_limits<double>::infinity();
    // Numerically stationary at trusted damping: successive chi-square
    // values agree to nine digits, so the optimum is reached even when a
    // degenerate flat direction keeps the raw parameter steps finite.
    if (lambda <= 1.0 &&
        std::abs(trial_chi2 - chi2) <= 1e-9 * (chi2 + 1e-300)) {
      if (trial_chi2 <= chi2) {
        p = trial;
        chi2 = trial_chi2;
      }
      converged = true;
    } else if (trial_chi2 <= chi2) {
      double largest_change = 0.0;
      const double scale = std::max({std::abs(p.amplitude),
                                     std::abs(p.background), 1.0});
      largest_change = std::max(std::abs(trial.amplitude - p.amplitude),
                                std::abs(trial.background - p.background)) /
                       scale;
      largest_change =
          std::max(largest_change, std::abs(trial.decay_time - p.decay_time) /
                                       std::max(p.decay_time, 1e-30));
      largest_change =
          std::max(largest_change,
                   std::abs(trial.onset - p.onset) /
                       std::max(std::abs(p.onset), histogram.bin_width));
      // An edge width below a twentieth of a bin moves no bin-center sample
      // by a detectable amount, so it must not gate convergence.
      if (std::max(trial.edge_width, p.edge_width) >
          0.05 * histogram.bin_width)
        largest_change =
            std::max(largest_change,
                     std::abs(trial.edge_width - p.edge_width) /
                         std::max(p.edge_width, histogram.bin_width));
      p = trial;
      chi2 = trial_chi2;
      lambda = std::max(lambda * 0.1, 1e-12);
      if (largest_change < 1e-8) converged = true;
    } else {
      lambda *= 10.0;
      if (lambda > 1e14)
        throw FitError("decay fit stalled (damping exhausted)",
                       std::sqrt(chi2), iteration);
    }
  }
  if (!converged)
    throw FitError("decay fit did not converge in 200 iterations",
                   std::sqrt(chi2), iteration);

  // Covariance of the weighted problem at the optimum. On sharp-edged data
  // the edge width collapses to the floor and decouples (its model column is
  // identically zero); invert only the identifiable block in that case.
  Mat5 normal = Mat5::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec5 g = model_gradient(p, centers[i]);
    normal += weights[i] * g * g.transpose();
  }
  Mat5 covariance = Mat5::Zero();
  if (normal(4, 4) > 0.0) {
    covariance = scaled_inverse<5>(normal);
  } else {
    covariance.topLeftCorner<4, 4>() =
        scaled_inverse<4>(normal.topLeftCorner<4, 4>());
  }

  DecayFit fit;
  fit.amplitude = p.amplitude;
  fit.decay_time = p.decay_time;
  fit.background = p.background;
  fit.onset = p.onset;
  fit.edge_width = p.edge_width;
  fit.bandwidth = 1.0 / (2.0 * kPi * p.decay_time);
  fit.amplitude_sigma = std::sqrt(std::max(covariance(0, 0), 0.0));
  fit.decay_time_sigma = std::sqrt(std::max(covariance(1, 1), 0.0));
  fit.background_sigma = std::sqrt(std::max(covariance(2, 2), 0.0));
  fit.onset_sigma = std::sqrt(std::max(covariance(3, 3), 0.0));
  fit.edge_width_sigma = std::sqrt(std::max(covariance(4, 4), 0.0));
  fit.bandwidth_sigma =
      fit.decay_time_sigma / (2.0 * kPi * p.decay_time * p.decay_time);
  fit.iterations = iteration;
  fit.chi_square = chi2;
  return fit;
}

double coincidence_rate(const CoincidenceHistogram& histogram,
                        const DecayFit& fit) {
  histogram.validate();
  if (fit.amplitude == 0.0) return 0.0;
  const double window_end = fit.onset + 7.0 * fit.decay_time;
  double excess = 0.0;
  for (std::size_t i = 0; i < histogram.bins(); ++i) {
    const double center = histogram.bin_center(i);
    if (center < fit.onset || center > window_end) continue;
    excess += static_cast<double>(histogram.counts[i]) - fit.background;
  }
  return excess / histogram.acquisition_time;
}

double efficiency_budget(const std::vector<EfficiencyFactor>& factors) {
  double product = 1.0;
  for (const auto& [label, factor] : factors) {
    if (!(factor > 0.0) || factor > 1.0)
      throw std::invalid_argument("efficiency factor '" + label +
                                  "' must be in (0, 1]");
    product *= factor;
  }
  return product;
}

std::vector<EfficiencyFactor> design_efficiency_budget() {
  return {{"cavity-1-peak", 0.88},
          {"cavity-2-peak", 0.88},
          {"fiber-coupling", 0.42},
          {"detector-efficiency", 0.45}};
}

void BrightnessReport::validate() const {
  if (detected_pairs_per_s_per_mw < 0.0 || extrapolated_rate < 0.0 ||
      spectral_brightness < 0.0)
    throw std::invalid_argument("brightness figures must be >= 0");
  if (!budget.empty()) {
    const double product = efficiency_budget(budget);
    if (!(product > 0.0) || product > 1.0)
      throw std::invalid_argument("efficiency budget product must be in (0,1]");
  }
}

BrightnessReport brightness_report(double rate_per_mw, double pump_power,
                                   double detector_efficiency,
                                   double bandwidth,
                                   std::vector<EfficiencyFactor> budget) {
  if (rate_per_mw < 0.0)
    throw std::invalid_argument("rate_per_mw must be >= 0");
  if (pump_power < 0.0) throw std::invalid_argument("pump_power must be >= 0");
  BrightnessReport report;
  report.budget = std::move(budget);
  if (rate_per_mw == 0.0) {
    report.validate();
    return report;
  }
  if (!(detector_efficiency > 0.0))
    throw std::invalid_argument("detector_efficiency must be > 0");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
  report.detected_pairs_per_s_per_mw = rate_per_mw;
  report.extrapolated_rate = rate_per_mw * pump_power;
  const double bandwidth_mhz = bandwidth / 1e6;
  report.spectral_brightness =
      rate_per_mw / (detector_efficiency * detector_efficiency * bandwidth_mhz);
  report.validate();
  return report;
}

}  // namespace biphoton
