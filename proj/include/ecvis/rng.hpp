#pragma once

#include <cstddef>
#include <cstdint>

namespace ecvis {

/// SplitMix64 stream. Every derived quantity is computed with integer or
/// exactly-rounded arithmetic so a seed yields the same draws everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by rejection, free of modulo bias.
  std::size_t below(std::size_t n);

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  /// Independent child stream for a sub-task index.
  Rng split(std::uint64_t index) const;

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace ecvis
