#include "biphoton/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "biphoton/constants.hpp"

namespace biphoton {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t index) {
  std::uint64_t h = root;
  splitmix64(h);
  for (unsigned char c : label) {
    h ^= c;
    splitmix64(h);
  }
  h ^= index;
  splitmix64(h);
  return h;
}

Rng::Rng(std::uint64_t seed) {
  // Expand the seed with splitmix64 as recommended for xoshiro seeding;
  // guarantees the state is never all-zero.
  for (auto& word : s_) word = splitmix64(seed);
}

static inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::exponential(double mean) {
  if (!(mean > 0.0)) throw std::invalid_argument("exponential mean must be > 0");
  return -mean * std::log1p(-uniform());
}

double Rng::normal(double mean, double sigma) {
  // log(0) is avoided by flipping the first uniform into (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

std::uint64_t Rng::poisson(double mean) {
  if (mean < 0.0) throw std::invalid_argument("poisson mean must be >= 0");
  if (mean == 0.0) return 0;
  std::uint64_t k = 0;
  double sum = exponential(1.0);
  while (sum < mean) {
    ++k;
    sum += exponential(1.0);
  }
  return k;
}

}  // namespace biphoton
