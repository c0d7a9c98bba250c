#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

#include "uwqsim/errors.hpp"

namespace uwq {

namespace detail {

// SplitMix64 finalizer. Used both to expand seeds into xoshiro state and to
// derive substream seeds from (seed, tag) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// FNV-1a over a byte string; used to turn stream labels into substream tags.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seeded, splittable random stream (xoshiro256++ core, SplitMix64 seeding).
///
/// The generator is hand-rolled rather than taken from <random> because the
/// simulation contract requires bit-identical sequences for a given
/// (seed, substream) on every platform, which the standard distributions do
/// not guarantee. Substreams are derived from the stream's own seed and a
/// tag, independent of how many values have been drawn, so simulations of
/// distinct settings stay reproducible under any execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = detail::mix64(s++);
  }

  /// Child stream fully determined by (this stream's seed, tag).
  Rng substream(std::uint64_t tag) const {
    return Rng(detail::mix64(seed_ ^ detail::mix64(tag)));
  }
  Rng substream(std::string_view label) const { return substream(fnv1a(label)); }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next() {
    const std::uint64_t result =
        detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  /// Exact Poisson sample. Sequential inversion for small means; larger
  /// means are split into chunks that stay clear of exp() underflow. Work
  /// is O(mean), acceptable for the count scales simulated here.
  std::int64_t poisson(double mean) {
    if (mean < 0.0 || !std::isfinite(mean))
      throw InvalidInput("poisson: mean must be finite and non-negative");
    if (mean == 0.0) return 0;
    constexpr double kChunk = 500.0;
    std::int64_t total = 0;
    double remaining = mean;
    while (remaining > kChunk) {
      total += poisson_small(kChunk);
      remaining -= kChunk;
    }
    return total + poisson_small(remaining);
  }

 private:
  std::int64_t poisson_small(double mean) {
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    // Cap far in the tail; the truncated mass is < 1e-12 of the total.
    const std::int64_t cap =
        static_cast<std::int64_t>(mean + 12.0 * std::sqrt(mean) + 30.0);
    while (u > cdf && k < cap) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace uwq
