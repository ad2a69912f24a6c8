// Benchmark the concurrent kernels against their single-threaded reference
// implementations and verify both produce identical results.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "biphoton/config.hpp"
#include "biphoton/correlator.hpp"
#include "biphoton/pipeline.hpp"
#include "biphoton/rng.hpp"
#include "biphoton/simulation.hpp"
#include "biphoton/tomography.hpp"

namespace {

template <typename Callable>
double seconds(Callable&& callable) {
  const auto start = std::chrono::steady_clock::now();
  callable();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

void row(const std::string& name, double serial, double parallel, bool equal) {
  std::cout << name << ": serial " << serial << " s, parallel " << parallel
            << " s, speedup " << (parallel > 0.0 ? serial / parallel : 0.0)
            << "x, identical: " << (equal ? "yes" : "NO") << '\n';
  if (!equal) std::exit(1);
}

std::vector<std::int64_t> timestamps(const std::vector<biphoton::DetectionRecord>& records) {
  std::vector<std::int64_t> out;
  out.reserve(records.size());
  for (const auto& record : records) out.push_back(record.timestamp_ps);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compare concurrent kernels with their serial references"};
  int threads = 0;
  double duration = 20.0;
  int resamples = 16;
  std::uint64_t seed = 42;
  app.add_option("--threads", threads, "Worker count (0 = library default)");
  app.add_option("--duration", duration, "Simulated acquisition time [s]");
  app.add_option("--resamples", resamples, "Bootstrap resamples");
  app.add_option("--seed", seed, "Root seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    return app.exit(error);
  }

  using namespace biphoton;

  RunConfig config;
  config.duration_s = duration;
  const StageContext context = make_context(config);
  const SourceConfig source = context.source();
  const DetectorSpec detector = config.detector_spec();
  const double delay = config.electronic_delay_ns * 1e-9;

  // Event simulation.
  DetectionStreams serial_streams, parallel_streams;
  const double sim_serial = seconds([&] {
    serial_streams = run_experiment_serial(source, context.chain, detector,
                                           detector, duration, delay, seed);
  });
  const double sim_parallel = seconds([&] {
    parallel_streams =
        run_experiment(source, context.chain, detector, detector, duration,
                       delay, seed, ExperimentOptions{threads});
  });
  row("run_experiment", sim_serial, sim_parallel,
      serial_streams.channel_a == parallel_streams.channel_a &&
          serial_streams.channel_b == parallel_streams.channel_b);

  // Coincidence histogram.
  const auto stream_a = timestamps(serial_streams.channel_a);
  const auto stream_b = timestamps(serial_streams.channel_b);
  CoincidenceHistogram serial_histogram, parallel_histogram;
  const double hist_serial = seconds([&] {
    serial_histogram =
        build_histogram_serial(stream_a, stream_b, config.bin_ns * 1e-9,
                               config.window_min_ns * 1e-9,
                               config.window_max_ns * 1e-9, duration);
  });
  const double hist_parallel = seconds([&] {
    parallel_histogram = build_histogram(
        stream_a, stream_b, config.bin_ns * 1e-9, config.window_min_ns * 1e-9,
        config.window_max_ns * 1e-9, duration, threads);
  });
  row("build_histogram", hist_serial, hist_parallel,
      serial_histogram.counts == parallel_histogram.counts);

  // Bootstrap uncertainty estimation.
  const TomographyRecord record =
      simulate_counts(singlet_state(), canonical_16_settings(), 2000.0, 5.0,
                      derive_seed(seed, "bench-tomography"));
  EntanglementReport serial_report, parallel_report;
  const double boot_serial = seconds([&] {
    serial_report = bootstrap_errors_serial(record, resamples, seed);
  });
  const double boot_parallel = seconds([&] {
    parallel_report = bootstrap_errors(record, resamples, seed, threads);
  });
  row("bootstrap_errors", boot_serial, boot_parallel,
      serial_report.concurrence == parallel_report.concurrence &&
          serial_report.concurrence_sigma == parallel_report.concurrence_sigma &&
          serial_report.fidelity == parallel_report.fidelity &&
          serial_report.fidelity_sigma == parallel_report.fidelity_sigma &&
          serial_report.visibility_hv == parallel_report.visibility_hv &&
          serial_report.visibility_hv_sigma ==
              parallel_report.visibility_hv_sigma &&
          serial_report.visibility_diag == parallel_report.visibility_diag &&
          serial_report.visibility_diag_sigma ==
              parallel_report.visibility_diag_sigma);

  return 0;
}
