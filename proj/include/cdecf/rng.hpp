#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cdecf {

/// Deterministic RNG with pinned sampling algorithms. std::mt19937_64 drives
/// the bit stream, but the bounded-int and normal samplers are implemented
/// here so drawn sequences never depend on the standard library's
/// (implementation-defined) distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, n). Rejection sampling, unbiased. n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform double in (0, 1].
  double uniform_unit() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (one fresh pair per call; the second
  /// value is discarded to keep the draw count per call fixed).
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = uniform_unit();
    const double u2 = uniform_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 step; used to derive independent per-component seeds from one
/// master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace cdecf
