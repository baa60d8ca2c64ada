#include "hpvit/rng.hpp"

#include <cmath>
#include <numbers>

namespace hpvit {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng Rng::stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = mix_seed(seed);
  for (auto k : keys) s = mix_seed(s ^ mix_seed(k + 0x632BE59BD9B4E019ull));
  return Rng(s);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
  // Lemire-style rejection keeps the result unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = (~std::uint64_t{0} / bound) * bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::truncated_normal(double mean, double stddev) {
  for (;;) {
    const double z = normal();
    if (std::abs(z) <= 2.0) return mean + stddev * z;
  }
}

}  // namespace hpvit
