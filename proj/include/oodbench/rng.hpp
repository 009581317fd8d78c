#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace oodbench::rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

/// SplitMix64 output mixing function.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// FNV-1a hash of a purpose tag. Stable across platforms.
inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Counter-based SplitMix64 generator. Draw order is part of the contract:
/// every consumer documents what it draws so streams stay reproducible.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~0ull - ~0ull % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  /// Standard normal via Box-Muller. The spare value is consumed before the
  /// next pair is drawn, so the stream advances two u64 per generated pair.
  double gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double gauss(double mean, double stddev) { return mean + stddev * gauss(); }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives the initial state for the substream identified by
/// (seed, tag, a, b). Distinct keys give statistically independent streams.
inline std::uint64_t derive_state(std::uint64_t seed, std::string_view tag,
                                  std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(seed ^ kGamma);
  s = mix64(s ^ hash_tag(tag));
  s = mix64(s ^ (a + kGamma));
  s = mix64(s ^ (b + kGamma));
  return s;
}

/// Convenience constructor for a keyed substream.
inline SplitMix64 stream(std::uint64_t seed, std::string_view tag,
                         std::uint64_t a = 0, std::uint64_t b = 0) {
  return SplitMix64(derive_state(seed, tag, a, b));
}

}  // namespace oodbench::rng
