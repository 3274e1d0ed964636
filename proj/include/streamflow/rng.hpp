#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace streamflow::numerics {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so any position can be addressed directly.
class SeededRng {
 public:
  SeededRng() = default;
  SeededRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0)
      : seed_(seed), stream_(stream), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_bits() noexcept { return bits_at(seed_, stream_, counter_++); }
  /// Uniform in the open interval (0, 1).
  double next_uniform() noexcept { return uniform_at(seed_, stream_, counter_++); }
  double next_gaussian() noexcept { return gaussian_at(seed_, stream_, counter_++); }
  /// Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound) noexcept;

  static std::uint64_t bits_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;
  static double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;
  /// Standard normal via Box-Muller on two uniforms derived from one counter.
  static double gaussian_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
};

/// Draws `count` standard normal values, advancing `rng`.
std::vector<float> seeded_gaussian(SeededRng& rng, std::size_t count);

}  // namespace streamflow::numerics
