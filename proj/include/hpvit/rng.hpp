#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace hpvit {

/// splitmix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seeded generator with platform-independent distributions (std::mt19937_64 bits,
/// hand-written transforms) so datasets and checkpoints are reproducible byte-for-byte.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  /// Stream keyed by (seed, k1, k2, ...), e.g. (seed, epoch, sample index).
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Normal(mean, stddev) resampled until within two standard deviations.
  double truncated_normal(double mean, double stddev);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hpvit
