#pragma once

#include <cstdint>
#include <string_view>

namespace biphoton {

/// @brief SplitMix64 step; used both as a stream-seeding hash and as the
/// expander that turns one 64-bit seed into a full generator state.
/// The algorithm is fixed here (not delegated to the standard library) so
/// that event streams are reproducible across platforms and compilers.
std::uint64_t splitmix64(std::uint64_t& state);

/// @brief Derive an independent substream seed from a root seed, a short
/// module label and a substream index (chunk number, resample number, ...).
/// Hashing the label bytes keeps streams for different purposes decoupled
/// even when they share the root seed and index.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t index = 0);

/// @brief Deterministic pseudo-random generator (xoshiro256**) with the small
/// set of samplers the simulator needs. Sampling algorithms are hand-rolled
/// for the same reason the engine is: std::normal_distribution and friends
/// are implementation-defined, which would break byte-identical replay.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Next raw 64-bit word.
  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Exponential variate with the given mean (inverse-CDF).
  double exponential(double mean);

  /// Gaussian variate (Box-Muller, cosine branch; two uniforms per call).
  double normal(double mean, double sigma);

  /// Poisson variate by counting unit-exponential arrivals; exact for the
  /// moderate means used here (runtime grows linearly with the mean).
  std::uint64_t poisson(double mean);

 private:
  std::uint64_t s_[4];
};

}  // namespace biphoton
