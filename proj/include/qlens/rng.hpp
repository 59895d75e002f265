#pragma once

#include <array>
#include <cstdint>

namespace qlens {

/// SplitMix64 finalizer. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for trial `trial_id` of a run seeded with `base_seed`:
///   mix64(base_seed + 0x9E3779B97F4A7C15 * (trial_id + 1)).
/// The inner map is a bijection in trial_id, so distinct ids give distinct seeds.
constexpr std::uint64_t substream_seed(std::uint64_t base_seed, std::uint64_t trial_id) noexcept {
  return mix64(base_seed + 0x9E3779B97F4A7C15ULL * (trial_id + 1));
}

/// xoshiro256** seeded through SplitMix64. Normal variates use the
/// Marsaglia polar method, with the spare value cached.
///
/// Single owner: derive a substream for each thread instead of sharing.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) noexcept;

  static RngStream substream(std::uint64_t base_seed, std::uint64_t trial_id) noexcept {
    return RngStream(substream_seed(base_seed, trial_id));
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept;
  double uniform(double a, double b) noexcept { return a + (b - a) * uniform01(); }
  double normal() noexcept;
  double laplace(double mu, double b) noexcept;
  /// +1 or -1 with equal probability.
  int rademacher() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qlens
