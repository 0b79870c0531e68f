#pragma once

// SplitMix64: a counter-based 64-bit generator. State is a single counter
// that advances by the golden-ratio increment; each output is a fixed
// bijective mix of the counter. Streams are reproducible across languages.
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// Derived draws:
//   uniform()      = (next() >> 11) * 2^-53              in [0, 1)
//   uniform_open() = ((next() >> 11) + 0.5) * 2^-53      in (0, 1)
//   below(n)       = high 64 bits of next() * n          in [0, n)
//   normal()       = Box-Muller, consumes two uniforms u1 = uniform_open(),
//                    u2 = uniform(), returns sqrt(-2 ln u1) cos(2 pi u2);
//                    the sine branch is discarded.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>

namespace spcit {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() noexcept {
    state_ += kGolden;
    return mix(state_);
  }

  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform_open() noexcept {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::size_t below(std::size_t n) noexcept { return mul_high(next(), n); }

  double normal() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  static constexpr std::uint64_t mul_high(std::uint64_t a, std::uint64_t b) noexcept {
    const std::uint64_t a_lo = a & 0xFFFFFFFFULL, a_hi = a >> 32;
    const std::uint64_t b_lo = b & 0xFFFFFFFFULL, b_hi = b >> 32;
    const std::uint64_t lo_lo = a_lo * b_lo;
    const std::uint64_t hi_lo = a_hi * b_lo;
    const std::uint64_t lo_hi = a_lo * b_hi;
    const std::uint64_t cross = (lo_lo >> 32) + (hi_lo & 0xFFFFFFFFULL) + lo_hi;
    return a_hi * b_hi + (hi_lo >> 32) + (cross >> 32);
  }

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  std::uint64_t state_;
};

/// Derives an independent sub-seed for stream `stream` of a run seeded with
/// `seed`: mix(mix(seed) ^ (stream + 1) * golden).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return SplitMix64::mix(SplitMix64::mix(seed) ^ ((stream + 1) * 0x9E3779B97F4A7C15ULL));
}

/// Named streams used when one top-level seed fans out to components.
namespace seed_stream {
inline constexpr std::uint64_t kSimulation = 1;
inline constexpr std::uint64_t kPointForest = 2;
inline constexpr std::uint64_t kQuantileForest = 3;
inline constexpr std::uint64_t kTransformer = 4;
}  // namespace seed_stream

}  // namespace spcit
