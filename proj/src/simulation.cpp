#include "biphoton/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "biphoton/constants.hpp"

#ifdef BIPHOTON_HAVE_OPENMP
#include <omp.h>
#endif

namespace biphoton {

void SourceConfig::validate() const {
  if (pump_power < 0.0) throw std::invalid_argument("pump power must be >= 0");
  if (generated_pair_rate_per_mw < 0.0)
    throw std::invalid_argument("generated pair rate must be >= 0");
  if (!(detuning_span > 0.0))
    throw std::invalid_argument("detuning_span must be > 0");
  if (pump_frequency_jitter_rms < 0.0)
    throw std::invalid_argument("pump frequency jitter must be >= 0");
  if (!(chunk_seconds > 0.0))
    throw std::invalid_argument("chunk_seconds must be > 0");
  if (!polarization_state.physical)
    throw std::invalid_argument("polarization state must be physical");
  if (pump_power * generated_pair_rate_per_mw > 0.0 && !spectrum)
    throw std::invalid_argument("source with nonzero rate needs a spectrum");
}

void DetectorSpec::validate() const {
  if (efficiency < 0.0 || efficiency > 1.0)
    throw std::invalid_argument("detector efficiency must be in [0, 1]");
  if (arm_coupling < 0.0 || arm_coupling > 1.0)
    throw std::invalid_argument("arm_coupling must be in [0, 1]");
  if (dark_rate < 0.0) throw std::invalid_argument("dark_rate must be >= 0");
  if (jitter_rms < 0.0) throw std::invalid_argument("jitter_rms must be >= 0");
}

std::int64_t quantize_timestamp(double seconds) {
  constexpr double kGridPs = kTimeGrid / kPicosecond;  // 4 ps
  return static_cast<std::int64_t>(
             std::llround(seconds / kTimeGrid)) *
         static_cast<std::int64_t>(kGridPs);
}

void split_pair(PairEvent& event, Splitter splitter,
                const DensityMatrix& state, Rng& rng) {
  if (splitter == Splitter::PBS) {
    // The polarizing splitter projects onto the joint H/V basis; sample the
    // outcome from the state's diagonal. H exits toward arm A.
    const Eigen::Vector4d probs = state.hv_probabilities();
    const double u = rng.uniform();
    double acc = 0.0;
    int outcome = 3;
    for (int i = 0; i < 4; ++i) {
      acc += probs[i];
      if (u < acc) {
        outcome = i;
        break;
      }
    }
    static constexpr PairPolarization kOutcomes[4] = {
        PairPolarization::HH, PairPolarization::HV, PairPolarization::VH,
        PairPolarization::VV};
    event.polarization = kOutcomes[outcome];
    const bool signal_h = outcome < 2;         // HH, HV
    const bool idler_h = (outcome % 2) == 0;   // HH, VH
    event.signal_arm = signal_h ? Arm::A : Arm::B;
    event.idler_arm = idler_h ? Arm::A : Arm::B;
  } else {
    event.polarization = PairPolarization::Undetermined;
    const Arm signal = rng.uniform() < 0.5 ? Arm::A : Arm::B;
    const Arm idler = rng.uniform() < 0.5 ? Arm::A : Arm::B;
    if (signal == idler) {
      // Same-exit pairs cannot produce a cross-channel coincidence.
      event.signal_arm = Arm::Lost;
      event.idler_arm = Arm::Lost;
    } else {
      event.signal_arm = signal;
      event.idler_arm = idler;
    }
  }
}

FilterResponse::FilterResponse(FilterChain chain) : chain_(std::move(chain)) {
  chain_.validate();
  effective_fwhm_ = effective_filter_fwhm(chain_);
  ringdown_time_ = 1.0 / (2.0 * kPi * effective_fwhm_);
}

double FilterResponse::transmission(double detuning) const {
  return cascade_transmission(chain_, detuning);
}

FilterOutcome filter_photon(double detuning, const FilterResponse& response,
                            Rng& rng) {
  FilterOutcome outcome;
  if (rng.uniform() >= response.transmission(detuning)) return outcome;
  outcome.passed = true;
  outcome.delay = rng.exponential(response.ringdown_time());
  return outcome;
}

FilterOutcome filter_photon(double detuning, const FilterChain& chain,
                            Rng& rng) {
  return filter_photon(detuning, FilterResponse(chain), rng);
}

std::optional<double> detect(double arrival_time, const DetectorSpec& detector,
                             Rng& rng) {
  detector.validate();
  const double survival = detector.arm_coupling * detector.efficiency;
  if (rng.uniform() >= survival) return std::nullopt;
  double timestamp = arrival_time;
  if (detector.jitter_rms > 0.0)
    timestamp += rng.normal(0.0, detector.jitter_rms);
  return timestamp;
}

std::vector<double> dark_counts(const DetectorSpec& detector, double duration,
                                std::uint64_t seed) {
  detector.validate();
  if (duration < 0.0) throw std::invalid_argument("duration must be >= 0");
  std::vector<double> timestamps;
  if (detector.dark_rate <= 0.0 || duration == 0.0) return timestamps;
  Rng rng(derive_seed(seed, "dark"));
  const double mean_gap = 1.0 / detector.dark_rate;
  for (double t = rng.exponential(mean_gap); t < duration;
       t += rng.exponential(mean_gap))
    timestamps.push_back(t);
  return timestamps;
}

namespace {

struct ChunkStreams {
  std::vector<DetectionRecord> a;
  std::vector<DetectionRecord> b;
};

// Substream labels; every chunk derives its generators from (seed, label,
// chunk index), which is what makes worker count irrelevant to the output.
constexpr const char* kPairLabel = "pair-events";
constexpr const char* kTransportLabel = "transport";
constexpr const char* kDarkALabel = "dark-a";
constexpr const char* kDarkBLabel = "dark-b";

std::size_t chunk_count(double duration, double chunk_seconds) {
  if (duration <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(duration / chunk_seconds));
}

// Pair emissions in [t0, t1): Poisson arrivals, envelope-distributed signal
// detuning, Gaussian pump offset, splitter outcome. One generator drives the
// whole chunk, so the event list is a pure function of its seed.
std::vector<PairEvent> chunk_pair_events(const SourceConfig& config,
                                         const DetuningSampler* sampler,
                                         double t0, double t1, Rng& rng) {
  std::vector<PairEvent> events;
  const double rate = config.pump_power * config.generated_pair_rate_per_mw;
  if (rate <= 0.0) return events;
  const double mean_gap = 1.0 / rate;
  for (double t = t0 + rng.exponential(mean_gap); t < t1;
       t += rng.exponential(mean_gap)) {
    PairEvent event;
    event.emission_time = t;
    const double delta = sampler->sample(rng.uniform());
    const double offset =
        config.pump_frequency_jitter_rms > 0.0
            ? rng.normal(0.0, config.pump_frequency_jitter_rms)
            : 0.0;
    event.pump_offset = offset;
    // Signal and idler sit symmetrically around half the jittered pump
    // frequency; the idler detuning is derived, never stored, so the pair's
    // energies sum to the pump offset exactly.
    event.signal_detuning = delta + 0.5 * offset;
    split_pair(event, config.splitter, config.polarization_state, rng);
    events.push_back(event);
  }
  return events;
}

void transport_photon(const PairEvent& event, bool is_signal,
                      const FilterResponse* filter_on_a,
                      const DetectorSpec& detector_a,
                      const DetectorSpec& detector_b, double duration,
                      double electronic_delay, Rng& rng, ChunkStreams& out) {
  const Arm arm = is_signal ? event.signal_arm : event.idler_arm;
  if (arm == Arm::Lost) return;
  double t = event.emission_time;
  if (arm == Arm::A && filter_on_a) {
    const double detuning =
        is_signal ? event.signal_detuning : idler_detuning(event);
    const FilterOutcome outcome = filter_photon(detuning, *filter_on_a, rng);
    if (!outcome.passed) return;
    t += outcome.delay;
  }
  const DetectorSpec& detector = arm == Arm::A ? detector_a : detector_b;
  const double survival = detector.arm_coupling * detector.efficiency;
  if (rng.uniform() >= survival) return;
  if (detector.jitter_rms > 0.0) t += rng.normal(0.0, detector.jitter_rms);
  if (arm == Arm::A) t += electronic_delay;
  if (t < 0.0 || t > duration) return;
  auto& stream = arm == Arm::A ? out.a : out.b;
  stream.push_back({quantize_timestamp(t),
                    arm == Arm::A ? Channel::A : Channel::B,
                    RecordOrigin::Pair});
}

void chunk_darks(const DetectorSpec& detector, double t0, double t1,
                 double duration, double delay, Channel channel, Rng& rng,
                 std::vector<DetectionRecord>& out) {
  if (detector.dark_rate <= 0.0) return;
  const double mean_gap = 1.0 / detector.dark_rate;
  for (double t = t0 + rng.exponential(mean_gap); t < t1;
       t += rng.exponential(mean_gap)) {
    const double shifted = t + delay;
    if (shifted < 0.0 || shifted > duration) continue;
    out.push_back({quantize_timestamp(shifted), channel, RecordOrigin::Dark});
  }
}

ChunkStreams process_chunk(const SourceConfig& source,
                           const DetuningSampler* sampler,
                           const FilterResponse* filter_on_a,
                           const DetectorSpec& detector_a,
                           const DetectorSpec& detector_b, double duration,
                           double electronic_delay, std::uint64_t seed,
                           std::size_t chunk) {
  const double t0 = static_cast<double>(chunk) * source.chunk_seconds;
  const double t1 = std::min(duration, t0 + source.chunk_seconds);

  ChunkStreams out;
  Rng pair_rng(derive_seed(seed, kPairLabel, chunk));
  const std::vector<PairEvent> events =
      chunk_pair_events(source, sampler, t0, t1, pair_rng);

  Rng transport_rng(derive_seed(seed, kTransportLabel, chunk));
  for (const PairEvent& event : events) {
    transport_photon(event, true, filter_on_a, detector_a, detector_b,
                     duration, electronic_delay, transport_rng, out);
    transport_photon(event, false, filter_on_a, detector_a, detector_b,
                     duration, electronic_delay, transport_rng, out);
  }

  Rng dark_a_rng(derive_seed(seed, kDarkALabel, chunk));
  chunk_darks(detector_a, t0, t1, duration, electronic_delay, Channel::A,
              dark_a_rng, out.a);
  Rng dark_b_rng(derive_seed(seed, kDarkBLabel, chunk));
  chunk_darks(detector_b, t0, t1, duration, 0.0, Channel::B, dark_b_rng,
              out.b);
  return out;
}

bool record_before(const DetectionRecord& lhs, const DetectionRecord& rhs) {
  if (lhs.timestamp_ps != rhs.timestamp_ps)
    return lhs.timestamp_ps < rhs.timestamp_ps;
  return static_cast<int>(lhs.origin) < static_cast<int>(rhs.origin);
}

DetectionStreams merge_chunks(std::vector<ChunkStreams>& chunks,
                              double duration) {
  DetectionStreams streams;
  streams.duration = duration;
  std::size_t total_a = 0;
  std::size_t total_b = 0;
  for (const auto& chunk : chunks) {
    total_a += chunk.a.size();
    total_b += chunk.b.size();
  }
  streams.channel_a.reserve(total_a);
  streams.channel_b.reserve(total_b);
  for (const auto& chunk : chunks) {
    streams.channel_a.insert(streams.channel_a.end(), chunk.a.begin(),
                             chunk.a.end());
    streams.channel_b.insert(streams.channel_b.end(), chunk.b.begin(),
                             chunk.b.end());
  }
  // Jitter and ring-down delays blur chunk boundaries; one global sort per
  // channel restores time order. Ties carry identical keys, so any ordering
  // of equal records serializes to the same bytes.
  std::sort(streams.channel_a.begin(), streams.channel_a.end(), record_before);
  std::sort(streams.channel_b.begin(), streams.channel_b.end(), record_before);
  return streams;
}

void validate_run_inputs(const SourceConfig& source,
                         const std::optional<FilterChain>& filter_on_a,
                         const DetectorSpec& detector_a,
                         const DetectorSpec& detector_b, double duration) {
  source.validate();
  detector_a.validate();
  detector_b.validate();
  if (filter_on_a) filter_on_a->validate();
  if (duration < 0.0) throw std::invalid_argument("duration must be >= 0");
}

}  // namespace

std::vector<PairEvent> generate_pair_events(const SourceConfig& config,
                                            double duration,
                                            std::uint64_t seed) {
  config.validate();
  if (duration < 0.0) throw std::invalid_argument("duration must be >= 0");
  std::vector<PairEvent> events;
  const double rate = config.pump_power * config.generated_pair_rate_per_mw;
  if (rate <= 0.0 || duration == 0.0) return events;

  const DetuningSampler sampler(*config.spectrum, 0.5 * config.detuning_span);
  const std::size_t chunks = chunk_count(duration, config.chunk_seconds);
  for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
    const double t0 = static_cast<double>(chunk) * config.chunk_seconds;
    const double t1 = std::min(duration, t0 + config.chunk_seconds);
    Rng rng(derive_seed(seed, kPairLabel, chunk));
    const auto part = chunk_pair_events(config, &sampler, t0, t1, rng);
    events.insert(events.end(), part.begin(), part.end());
  }
  return events;
}

DetectionStreams run_experiment(const SourceConfig& source,
                                const std::optional<FilterChain>& filter_on_a,
                                const DetectorSpec& detector_a,
                                const DetectorSpec& detector_b, double duration,
                                double electronic_delay, std::uint64_t seed,
                                const ExperimentOptions& options) {
  validate_run_inputs(source, filter_on_a, detector_a, detector_b, duration);

  std::optional<FilterResponse> response;
  if (filter_on_a) response.emplace(*filter_on_a);
  std::optional<DetuningSampler> sampler;
  if (source.pump_power * source.generated_pair_rate_per_mw > 0.0)
    sampler.emplace(*source.spectrum, 0.5 * source.detuning_span);

  const std::size_t chunks = chunk_count(duration, source.chunk_seconds);
  std::vector<ChunkStreams> results(chunks);
  const FilterResponse* filter_ptr = response ? &*response : nullptr;
  const DetuningSampler* sampler_ptr = sampler ? &*sampler : nullptr;

#ifdef BIPHOTON_HAVE_OPENMP
  const int threads =
      options.threads > 0 ? options.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t chunk = 0; chunk < chunks; ++chunk)
    results[chunk] =
        process_chunk(source, sampler_ptr, filter_ptr, detector_a, detector_b,
                      duration, electronic_delay, seed, chunk);
#else
  (void)options;
  for (std::size_t chunk = 0; chunk < chunks; ++chunk)
    results[chunk] =
        process_chunk(source, sampler_ptr, filter_ptr, detector_a, detector_b,
                      duration, electronic_delay, seed, chunk);
#endif

  return merge_chunks(results, duration);
}

DetectionStreams run_experiment_serial(
    const SourceConfig& source, const std::optional<FilterChain>& filter_on_a,
    const DetectorSpec& detector_a, const DetectorSpec& detector_b,
    double duration, double electronic_delay, std::uint64_t seed) {
  validate_run_inputs(source, filter_on_a, detector_a, detector_b, duration);

  std::optional<FilterResponse> response;
  if (filter_on_a) response.emplace(*filter_on_a);
  std::optional<DetuningSampler> sampler;
  if (source.pump_power * source.generated_pair_rate_per_mw > 0.0)
    sampler.emplace(*source.spectrum, 0.5 * source.detuning_span);

  const std::size_t chunks = chunk_count(duration, source.chunk_seconds);
  std::vector<ChunkStreams> results(chunks);
  for (std::size_t chunk = 0; chunk < chunks; ++chunk)
    results[chunk] = process_chunk(source, sampler ? &*sampler : nullptr,
                                   response ? &*response : nullptr, detector_a,
                                   detector_b, duration, electronic_delay,
                                   seed, chunk);
  return merge_chunks(results, duration);
}

}  // namespace biphoton
