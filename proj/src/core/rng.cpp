#include "midas/core/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "midas/core/hash.hpp"

namespace midas {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  // Expand the 64-bit seed into xoshiro state with a splitmix64 chain.
  std::uint64_t z = seed;
  for (auto& w : s_) {
    z += 0x9E3779B97F4A7C15ULL;
    w = mix64(z);
  }
  // All-zero state is invalid for xoshiro; mix64 of distinct inputs makes
  // this effectively impossible, but guard anyway.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

Rng Rng::substream(std::string_view label) const {
  if (label.empty()) throw std::invalid_argument("Rng::substream: empty label");
  return Rng(mix64(seed_ ^ mix64(fnv1a64(label))));
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

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::uniform_below: n == 0");
  while (true) {
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    std::uint64_t l = static_cast<std::uint64_t>(m);
    if (l < n) {
      std::uint64_t t = (0 - n) % n;
      if (l < t) continue;
    }
    return static_cast<std::uint64_t>(m >> 64);
  }
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw std::invalid_argument("Rng::uniform_int: lo > hi");
  std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(uniform_below(span));
}

double Rng::uniform_range(double a, double b) {
  return a + (b - a) * uniform01();
}

double Rng::exponential(double mean) {
  if (mean <= 0.0) throw std::invalid_argument("Rng::exponential: mean <= 0");
  // uniform01() < 1 always, so the log argument stays positive.
  return -mean * std::log(1.0 - uniform01());
}

}  // namespace midas
