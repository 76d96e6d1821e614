#pragma once

#include <cstdint>

namespace samba {

/// SplitMix64. A stream is fixed by (seed, stream index) so that parallel
/// consumers never share state:
///
///   state0   = seed + (stream + 1) * 0xD1B54A32D192ED03      (mod 2^64)
///   next()   : state += 0x9E3779B97F4A7C15
///              z = state
///              z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///              return z ^ (z >> 31)
///   below(n) = high 64 bits of the 128-bit product next() * n
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : state_(seed + (stream + 1) * 0xD1B54A32D192ED03ULL) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace samba
