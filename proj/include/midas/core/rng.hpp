#pragma once

#include <cstdint>
#include <string_view>

namespace midas {

/// Deterministic xoshiro256** generator with named sub-streams.
///
/// Identical (seed, label path) always yields an identical draw sequence,
/// independent of platform and standard library. Consumers each take a
/// named sub-stream ("workload", "routing", "jitter", "service", ...) so
/// adding or removing draws in one consumer does not shift any other.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Child stream deterministic in (this stream's seed, label).
  Rng substream(std::string_view label) const;

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform01();

  /// Uniform integer in [0, n). Lemire's method with rejection, so the
  /// output is unbiased and platform-stable. n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Uniform real in [a, b).
  double uniform_range(double a, double b);

  /// Exponential with the given mean (mean > 0).
  double exponential(double mean);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t s_[4] = {0, 0, 0, 0};
};

}  // namespace midas
