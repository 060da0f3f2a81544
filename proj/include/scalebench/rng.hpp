#pragma once

#include <array>
#include <cstdint>

namespace scalebench {

/// SplitMix64 step. Advances `state` and returns the next output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derives an independent 64-bit seed for a named stream of a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// xoshiro256** 1.0 seeded through SplitMix64.
///
/// All distributions are implemented here rather than taken from <random>:
/// the standard library fixes the engines' output but not the distributions',
/// and traces must be identical on every host.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next();

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);

  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Gaussian via the Box-Muller transform (no cached spare).
  double normal(double mean, double stddev);

  /// Poisson count by Knuth's multiplication method; intended for small means.
  std::uint32_t poisson(double mean);

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace scalebench
