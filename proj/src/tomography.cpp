#include "biphoton/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "biphoton/constants.hpp"

#ifdef BIPHOTON_HAVE_OPENMP
#include <omp.h>
#endif

namespace biphoton {

namespace {

using Eigen::Matrix2cd;
using Eigen::Matrix4cd;
using Eigen::Vector2cd;
using Eigen::Vector4cd;
using Complex = std::complex<double>;

Matrix2cd rotation(double theta) {
  Matrix2cd r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

Matrix2cd waveplate(double theta, double retardance) {
  Matrix2cd phase = Matrix2cd::Zero();
  phase(0, 0) = 1.0;
  phase(1, 1) = std::exp(Complex(0.0, retardance));
  return rotation(theta) * phase * rotation(-theta);
}

Vector4cd product_state(const Vector2cd& a, const Vector2cd& b) {
  Vector4cd v;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) v[2 * i + j] = a[i] * b[j];
  return v;
}

}  // namespace

Vector2cd waveplate_projector(double quarter_angle, double half_angle) {
  const Matrix2cd quarter = waveplate(quarter_angle, 0.5 * kPi);
  const Matrix2cd half = waveplate(half_angle, kPi);
  Vector2cd horizontal;
  horizontal << 1.0, 0.0;
  // The analyzer counts photons that exit the plates in |H>; the equivalent
  // projector on the input side is the plates' inverse applied to |H>.
  return quarter.adjoint() * (half.adjoint() * horizontal);
}

void MeasurementSetting::validate() const {
  if (std::abs(projector.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("measurement projector must be normalized");
}

namespace {

struct AnalyzerAngles {
  char name;
  double quarter;
  double half;
};

// Fast-axis angle table realizing the six standard analyzer states with the
// plate convention above.
constexpr AnalyzerAngles kAnalyzerTable[] = {
    {'H', 0.0, 0.0},
    {'V', 0.0, kPi / 4.0},
    {'D', -kPi / 4.0, kPi / 8.0},
    {'A', kPi / 4.0, 3.0 * kPi / 8.0},
    {'R', -kPi / 4.0, 0.0},
    {'L', 0.0, 3.0 * kPi / 8.0},
};

AnalyzerAngles analyzer_for(char name) {
  for (const auto& entry : kAnalyzerTable)
    if (entry.name == name) return entry;
  throw std::invalid_argument(std::string("unknown analyzer state '") + name +
                              "'");
}

}  // namespace

std::vector<MeasurementSetting> canonical_16_settings() {
  static constexpr const char* kOrder[16] = {
      "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
      "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL"};
  std::vector<MeasurementSetting> settings;
  settings.reserve(16);
  for (const char* label : kOrder) {
    const AnalyzerAngles a = analyzer_for(label[0]);
    const AnalyzerAngles b = analyzer_for(label[1]);
    MeasurementSetting setting;
    setting.label = label;
    setting.quarter_a = a.quarter;
    setting.half_a = a.half;
    setting.quarter_b = b.quarter;
    setting.half_b = b.half;
    setting.projector = product_state(waveplate_projector(a.quarter, a.half),
                                      waveplate_projector(b.quarter, b.half));
    setting.validate();
    settings.push_back(std::move(setting));
  }
  return settings;
}

void TomographyRecord::validate() const {
  if (entries.empty())
    throw std::invalid_argument("tomography record has no settings");
  if (!(counts_per_setting > 0.0))
    throw std::invalid_argument("counts_per_setting must be > 0");
  for (const auto& entry : entries) {
    entry.setting.validate();
    if (entry.raw_count < 0.0 || entry.accidental_estimate < 0.0)
      throw std::invalid_argument("counts and accidentals must be >= 0");
  }
}

namespace {

// Real part of <v| rho |v>, collapsing Eigen's 1x1 product to a scalar.
double real_expectation(const Matrix4cd& rho, const Vector4cd& v) {
  const Complex value = v.adjoint() * rho * v;
  return value.real();
}

double projection_probability(const DensityMatrix& state,
                              const Vector4cd& projector) {
  return std::max(0.0, real_expectation(state.rho, projector));
}

}  // namespace

TomographyRecord simulate_counts(const DensityMatrix& state,
                                 const std::vector<MeasurementSetting>& settings,
                                 double counts_per_setting,
                                 double accidental_mean, std::uint64_t seed) {
  if (!(counts_per_setting > 0.0))
    throw std::invalid_argument("counts_per_setting must be > 0");
  if (accidental_mean < 0.0)
    throw std::invalid_argument("accidental_mean must be >= 0");
  TomographyRecord record;
  record.counts_per_setting = counts_per_setting;
  record.entries.reserve(settings.size());
  for (std::size_t i = 0; i < settings.size(); ++i) {
    const double mean =
        counts_per_setting * projection_probability(state, settings[i].projector) +
        accidental_mean;
    Rng rng(derive_seed(seed, "tomo-counts", i));
    TomographyRecord::Entry entry;
    entry.setting = settings[i];
    entry.raw_count = static_cast<double>(rng.poisson(mean));
    entry.accidental_estimate = accidental_mean;
    record.entries.push_back(std::move(entry));
  }
  return record;
}

TomographyRecord exact_counts(const DensityMatrix& state,
                              const std::vector<MeasurementSetting>& settings,
                              double counts_per_setting) {
  if (!(counts_per_setting > 0.0))
    throw std::invalid_argument("counts_per_setting must be > 0");
  TomographyRecord record;
  record.counts_per_setting = counts_per_setting;
  record.entries.reserve(settings.size());
  for (const auto& setting : settings) {
    TomographyRecord::Entry entry;
    entry.setting = setting;
    entry.raw_count =
        counts_per_setting * projection_probability(state, setting.projector);
    entry.accidental_estimate = 0.0;
    record.entries.push_back(std::move(entry));
  }
  return record;
}

CorrectedCounts subtract_accidentals(const TomographyRecord& record) {
  record.validate();
  CorrectedCounts corrected;
  corrected.counts.reserve(record.entries.size());
  for (const auto& entry : record.entries) {
    const double value = entry.raw_count - entry.accidental_estimate;
    if (value < 0.0) corrected.clamped = true;
    corrected.counts.push_back(std::max(0.0, value));
  }
  return corrected;
}

DensityMatrix linear_reconstruction(const TomographyRecord& record) {
  const CorrectedCounts corrected = subtract_accidentals(record);
  const std::size_t m = record.entries.size();
  if (m != 16)
    throw std::invalid_argument(
        "linear reconstruction needs exactly 16 settings");

  // Tr(Pi rho) = sum_{i,j} Pi(i,j) rho(j,i); unknowns x[4i+j] = rho(j,i).
  Eigen::MatrixXcd system(16, 16);
  Eigen::VectorXcd rhs(16);
  for (std::size_t nu = 0; nu < m; ++nu) {
    const Vector4cd psi = record.entries[nu].setting.projector;
    const Matrix4cd projector = psi * psi.adjoint();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        system(static_cast<long>(nu), 4 * i + j) = projector(i, j);
    rhs[static_cast<long>(nu)] = corrected.counts[nu];
  }

  const Eigen::VectorXcd x = system.fullPivLu().solve(rhs);
  Matrix4cd rho;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) rho(j, i) = x[4 * i + j];

  rho = 0.5 * (rho + rho.adjoint().eval());
  const double trace = rho.trace().real();
  if (!(std::abs(trace) > 1e-12))
    throw std::invalid_argument("record has no counts to reconstruct from");
  rho /= trace;
  return DensityMatrix::make(rho);
}

DensityMatrix physicalize(const DensityMatrix& state) {
  Eigen::SelfAdjointEigenSolver<Matrix4cd> solver(state.rho);
  const Eigen::Vector4d clipped = solver.eigenvalues().cwiseMax(0.0);
  const double total = clipped.sum();
  if (!(total > 0.0))
    throw std::invalid_argument("state has no positive eigenvalue to keep");
  const Matrix4cd rho = solver.eigenvectors() *
                        (clipped / total).asDiagonal().toDenseMatrix().cast<Complex>() *
                        solver.eigenvectors().adjoint();
  return DensityMatrix::make(0.5 * (rho + rho.adjoint().eval()));
}

namespace {

// --- Cholesky-style likelihood parametrization ----------------------------
//
// rho = T^dag T / Tr(T^dag T) with T lower triangular; 16 real parameters:
// four real diagonal entries followed by the six complex sub-diagonal
// entries in row order.

constexpr int kParams = 16;
using ParamVector = Eigen::Matrix<double, kParams, 1>;
using ParamMatrix = Eigen::Matrix<double, kParams, kParams>;

struct LowerIndex {
  int row;
  int col;
};
constexpr LowerIndex kOffDiagonal[6] = {{1, 0}, {2, 0}, {2, 1},
                                        {3, 0}, {3, 1}, {3, 2}};

Matrix4cd params_to_matrix(const ParamVector& p) {
  Matrix4cd t = Matrix4cd::Zero();
  for (int d = 0; d < 4; ++d) t(d, d) = p[d];
  for (int k = 0; k < 6; ++k) {
    const auto [row, col] = kOffDiagonal[k];
    t(row, col) = Complex(p[4 + 2 * k], p[5 + 2 * k]);
  }
  return t;
}

ParamVector matrix_to_params(const Matrix4cd& t) {
  ParamVector p;
  for (int d = 0; d < 4; ++d) p[d] = t(d, d).real();
  for (int k = 0; k < 6; ++k) {
    const auto [row, col] = kOffDiagonal[k];
    p[4 + 2 * k] = t(row, col).real();
    p[5 + 2 * k] = t(row, col).imag();
  }
  return p;
}

// Lower-triangular T with T^dag T = M (reverse Cholesky): factor the
// index-reversed matrix and flip back.
Matrix4cd reverse_cholesky(const Matrix4cd& m) {
  Matrix4cd reversed;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) reversed(i, j) = m(3 - i, 3 - j);
  const Eigen::LLT<Matrix4cd> llt(reversed);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("reverse Cholesky of a non-PD matrix");
  const Matrix4cd l = llt.matrixL();
  Matrix4cd upper;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) upper(i, j) = l(3 - i, 3 - j);
  return upper.adjoint();
}

struct LikelihoodWorkspace {
  std::vector<Vector4cd> projectors;
  std::vector<double> counts;
  double count_total = 0.0;
};

double negative_log_likelihood(const LikelihoodWorkspace& w,
                               const ParamVector& p) {
  const Matrix4cd t = params_to_matrix(p);
  const double floor = 1e-12 * (1.0 + w.count_total);
  double nll = 0.0;
  for (std::size_t nu = 0; nu < w.projectors.size(); ++nu) {
    const double mu = std::max((t * w.projectors[nu]).squaredNorm(), floor);
    nll += mu - w.counts[nu] * std::log(mu);
  }
  return nll;
}

// Gradient and Fisher information of the negative log-likelihood.
void derivatives(const LikelihoodWorkspace& w, const ParamVector& p,
                 ParamVector& gradient, ParamMatrix& fisher) {
  const Matrix4cd t = params_to_matrix(p);
  const double floor = 1e-12 * (1.0 + w.count_total);
  gradient.setZero();
  fisher.setZero();
  for (std::size_t nu = 0; nu < w.projectors.size(); ++nu) {
    const Vector4cd& psi = w.projectors[nu];
    const Vector4cd v = t * psi;
    const double mu = std::max(v.squaredNorm(), floor);

    // d mu / d p: mu = |T psi|^2, so a real perturbation of T(j,k) adds
    // 2 Re(conj(v_j) psi_k) and an imaginary one adds -2 Im(conj(v_j) psi_k).
    ParamVector dmu;
    for (int d = 0; d < 4; ++d)
      dmu[d] = 2.0 * (std::conj(v[d]) * psi[d]).real();
    for (int k = 0; k < 6; ++k) {
      const auto [row, col] = kOffDiagonal[k];
      const Complex z = std::conj(v[row]) * psi[col];
      dmu[4 + 2 * k] = 2.0 * z.real();
      dmu[5 + 2 * k] = -2.0 * z.imag();
    }

    gradient += (1.0 - w.counts[nu] / mu) * dmu;
    fisher += (1.0 / mu) * (dmu * dmu.transpose());
  }
}

struct OptimizerResult {
  ParamVector params;
  double nll = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
};

OptimizerResult optimize_from(const LikelihoodWorkspace& w, ParamVector p,
                              const MleOptions& options) {
  OptimizerResult result;
  double nll = negative_log_likelihood(w, p);
  double lambda = 1e-3;
  ParamVector gradient;
  ParamMatrix fisher;
  for (int iteration = 0; iteration < options.max_iterations; ++iteration) {
    derivatives(w, p, gradient, fisher);
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      ParamMatrix damped = fisher;
      for (int k = 0; k < kParams; ++k)
        damped(k, k) += lambda * (fisher(k, k) + 1e-12);
      const ParamVector step = damped.ldlt().solve(-gradient);
      const ParamVector trial = p + step;
      const double trial_nll = negative_log_likelihood(w, trial);
      if (trial_nll <= nll) {
        const double improvement = nll - trial_nll;
        p = trial;
        nll = trial_nll;
        lambda = std::max(lambda * 0.25, 1e-12);
        accepted = true;
        if (improvement <=
            options.relative_tolerance * (1.0 + std::abs(nll))) {
          result.converged = true;
        }
        break;
      }
      lambda *= 8.0;
      if (lambda > 1e16) break;
    }
    if (!accepted) break;
    if (result.converged) break;
  }
  derivatives(w, p, gradient, fisher);
  result.params = p;
  result.nll = nll;
  result.gradient_norm = gradient.norm();
  return result;
}

DensityMatrix normalized_state(const ParamVector& p) {
  const Matrix4cd t = params_to_matrix(p);
  Matrix4cd rho = t.adjoint() * t;
  const double trace = rho.trace().real();
  if (!(trace > 0.0))
    throw std::invalid_argument("likelihood optimum has zero trace");
  rho /= trace;
  return DensityMatrix::make(0.5 * (rho + rho.adjoint().eval()));
}

double scale_to_counts(const LikelihoodWorkspace& w, const Matrix4cd& rho) {
  double expected = 0.0;
  for (const auto& psi : w.projectors)
    expected += std::max(real_expectation(rho, psi), 0.0);
  if (!(expected > 0.0)) return 1.0;
  return w.count_total / expected;
}

LikelihoodWorkspace make_workspace(const TomographyRecord& record) {
  LikelihoodWorkspace w;
  const CorrectedCounts corrected = subtract_accidentals(record);
  w.projectors.reserve(record.entries.size());
  w.counts = corrected.counts;
  for (const auto& entry : record.entries)
    w.projectors.push_back(entry.setting.projector);
  for (double c : w.counts) w.count_total += c;
  if (!(w.count_total > 0.0))
    throw std::invalid_argument("record has no counts to fit");
  return w;
}

}  // namespace

DensityMatrix mle_reconstruction(const TomographyRecord& record,
                                 const MleOptions& options) {
  const LikelihoodWorkspace w = make_workspace(record);

  std::vector<ParamVector> starts;
  // Start 0: the physicalized linear estimate, scaled into count units and
  // nudged positive-definite so the triangular factor exists.
  {
    const DensityMatrix linear = linear_reconstruction(record);
    const DensityMatrix seed_state = physicalize(linear);
    const double scale = scale_to_counts(w, seed_state.rho);
    const Matrix4cd m =
        scale * seed_state.rho +
        (1e-8 * scale) * Matrix4cd::Identity();
    starts.push_back(matrix_to_params(reverse_cholesky(m)));
  }
  // Deterministic random restarts guard against a bad linear seed.
  for (int restart = 0; restart < options.random_restarts; ++restart) {
    Rng rng(derive_seed(options.restart_seed, "mle-restart",
                        static_cast<std::uint64_t>(restart)));
    ParamVector p;
    for (int k = 0; k < kParams; ++k) p[k] = rng.normal(0.0, 1.0);
    Matrix4cd t = params_to_matrix(p);
    const double trace = (t.adjoint() * t).trace().real();
    const DensityMatrix trial_state =
        DensityMatrix::make((t.adjoint() * t / trace).eval());
    const double scale = scale_to_counts(w, trial_state.rho);
    t *= std::sqrt(scale / trace);
    starts.push_back(matrix_to_params(t));
  }

  OptimizerResult best;
  bool any_converged = false;
  for (const ParamVector& start : starts) {
    const OptimizerResult result = optimize_from(w, start, options);
    const bool better =
        (result.converged && !any_converged) ||
        (result.converged == any_converged && result.nll < best.nll);
    if (better) best = result;
    any_converged = any_converged || result.converged;
  }
  if (!any_converged)
    throw MleStagnation("likelihood optimizer stagnated on every start",
                        normalized_state(best.params), best.gradient_norm);
  return normalized_state(best.params);
}

double tomography_log_likelihood(const TomographyRecord& record,
                                 const DensityMatrix& state) {
  const LikelihoodWorkspace w = make_workspace(record);
  const double scale = scale_to_counts(w, state.rho);
  const double floor = 1e-12 * (1.0 + w.count_total);
  double ll = 0.0;
  for (std::size_t nu = 0; nu < w.projectors.size(); ++nu) {
    const double mu = std::max(
        scale * real_expectation(state.rho, w.projectors[nu]), floor);
    ll += w.counts[nu] * std::log(mu) - mu;
  }
  return ll;
}

double concurrence(const DensityMatrix& state) {
  Matrix4cd flip = Matrix4cd::Zero();
  flip(0, 3) = -1.0;
  flip(1, 2) = 1.0;
  flip(2, 1) = 1.0;
  flip(3, 0) = -1.0;  // sigma_y x sigma_y
  const Matrix4cd r = state.rho * flip * state.rho.conjugate() * flip;
  const Eigen::ComplexEigenSolver<Matrix4cd> solver(r);
  Eigen::Vector4d roots;
  for (int i = 0; i < 4; ++i)
    roots[i] = std::sqrt(std::max(solver.eigenvalues()[i].real(), 0.0));
  std::sort(roots.data(), roots.data() + 4, std::greater<double>());
  const double c = roots[0] - roots[1] - roots[2] - roots[3];
  return std::clamp(c, 0.0, 1.0);
}

double fidelity_with_singlet(const DensityMatrix& state) {
  Vector4cd psi;
  psi << 0.0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0;
  return real_expectation(state.rho, psi);
}

double visibility(const DensityMatrix& state, VisibilityBasis basis) {
  double anti = 0.0;
  double corr = 0.0;
  if (basis == VisibilityBasis::HV) {
    const Eigen::Vector4d p = state.hv_probabilities();
    anti = p[1] + p[2];
    corr = p[0] + p[3];
  } else {
    Vector2cd d, a;
    d << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    a << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    const Vector4cd dd = product_state(d, d);
    const Vector4cd da = product_state(d, a);
    const Vector4cd ad = product_state(a, d);
    const Vector4cd aa = product_state(a, a);
    anti = real_expectation(state.rho, da) + real_expectation(state.rho, ad);
    corr = real_expectation(state.rho, dd) + real_expectation(state.rho, aa);
  }
  const double total = anti + corr;
  if (!(total > 0.0)) return 0.0;
  return (anti - corr) / total;
}

void EntanglementReport::validate() const {
  const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(concurrence) || !in_unit(fidelity) || !in_unit(visibility_hv) ||
      !in_unit(visibility_diag))
    throw std::invalid_argument("entanglement metrics must lie in [0, 1]");
  if (concurrence_sigma < 0.0 || fidelity_sigma < 0.0 ||
      visibility_hv_sigma < 0.0 || visibility_diag_sigma < 0.0)
    throw std::invalid_argument("uncertainties must be >= 0");
}

EntanglementReport entanglement_report(const DensityMatrix& state) {
  EntanglementReport report;
  report.concurrence = concurrence(state);
  report.fidelity = std::clamp(fidelity_with_singlet(state), 0.0, 1.0);
  report.visibility_hv =
      std::clamp(visibility(state, VisibilityBasis::HV), 0.0, 1.0);
  report.visibility_diag =
      std::clamp(visibility(state, VisibilityBasis::Diagonal), 0.0, 1.0);
  report.validate();
  return report;
}

namespace {

struct MetricSample {
  double concurrence;
  double fidelity;
  double visibility_hv;
  double visibility_diag;
};

MetricSample resample_metrics(const TomographyRecord& record,
                              std::uint64_t seed, std::uint64_t index) {
  TomographyRecord resampled = record;
  Rng rng(derive_seed(seed, "bootstrap", index));
  for (auto& entry : resampled.entries)
    entry.raw_count =
        static_cast<double>(rng.poisson(std::max(entry.raw_count, 0.0)));
  DensityMatrix state = maximally_mixed_state();
  try {
    state = mle_reconstruction(resampled);
  } catch (const MleStagnation& stalled) {
    state = stalled.best;  // best iterate is still a physical state
  }
  const EntanglementReport report = entanglement_report(state);
  return {report.concurrence, report.fidelity, report.visibility_hv,
          report.visibility_diag};
}

EntanglementReport reduce_bootstrap(const TomographyRecord& record,
                                    const std::vector<MetricSample>& samples) {
  EntanglementReport report =
      entanglement_report(mle_reconstruction(record));
  const std::size_t n = samples.size();
  if (n < 2) return report;

  const auto deviation = [n](const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(n - 1));
  };

  std::vector<double> c(n), f(n), vh(n), vd(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = samples[i].concurrence;
    f[i] = samples[i].fidelity;
    vh[i] = samples[i].visibility_hv;
    vd[i] = samples[i].visibility_diag;
  }
  report.concurrence_sigma = deviation(c);
  report.fidelity_sigma = deviation(f);
  report.visibility_hv_sigma = deviation(vh);
  report.visibility_diag_sigma = deviation(vd);
  report.validate();
  return report;
}

}  // namespace

EntanglementReport bootstrap_errors(const TomographyRecord& record,
                                    int n_resamples, std::uint64_t seed,
                                    int threads) {
  record.validate();
  if (n_resamples < 1)
    throw std::invalid_argument("n_resamples must be >= 1");
  std::vector<MetricSample> samples(static_cast<std::size_t>(n_resamples));

#ifdef BIPHOTON_HAVE_OPENMP
  const int workers = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = resample_metrics(record, seed, i);
#else
  (void)threads;
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = resample_metrics(record, seed, i);
#endif

  return reduce_bootstrap(record, samples);
}

EntanglementReport bootstrap_errors_serial(const TomographyRecord& record,
                                           int n_resamples,
                                           std::uint64_t seed) {
  record.validate();
  if (n_resamples < 1)
    throw std::invalid_argument("n_resamples must be >= 1");
  std::vector<MetricSample> samples(static_cast<std::size_t>(n_resamples));
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = resample_metrics(record, seed, i);
  return reduce_bootstrap(record, samples);
}

}  // namespace biphoton
