#pragma once

#include <cstdint>
#include <string_view>

namespace optfact {

/// Identifier of the pinned random stream, recorded in simulation output
/// so results can be reproduced across machines.
inline constexpr std::string_view kRngAlgorithm = "splitmix64-substream-v1";

/// SplitMix64 sequence generator. Substreams are keyed by (seed, index)
/// so per-draw results do not depend on evaluation order or worker count.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
    return SplitMix64(mix(seed + 0x9E3779B97F4A7C15ull * (index + 1)));
  }

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in (lo, hi]: values that round to exactly lo are
  /// redrawn (lo = 0 would otherwise produce zero weights).
  double next_open(double lo, double hi) {
    for (;;) {
      const double x = lo + next_double() * (hi - lo);
      if (x != lo) return x;
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace optfact
