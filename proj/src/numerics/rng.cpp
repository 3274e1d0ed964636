#include "streamflow/rng.hpp"

#include <cmath>
#include <numbers>

namespace streamflow::numerics {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr double to_open_unit(std::uint64_t bits) noexcept {
  // 53 high bits, offset by half an ulp so 0 and 1 are unreachable.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::uint64_t SeededRng::bits_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (stream * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ (counter * 0xaef17502108ef2d9ULL));
  return h;
}

double SeededRng::uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  return to_open_unit(bits_at(seed, stream, counter));
}

double SeededRng::gaussian_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  const std::uint64_t h = bits_at(seed, stream, counter);
  const double u1 = to_open_unit(h);
  const double u2 = to_open_unit(splitmix64(h));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SeededRng::next_below(std::uint64_t bound) noexcept {
  if (bound <= 1) {
    ++counter_;
    return 0;
  }
  return static_cast<std::uint64_t>(next_uniform() * static_cast<double>(bound)) % bound;
}

std::vector<float> seeded_gaussian(SeededRng& rng, std::size_t count) {
  std::vector<float> out(count);
  for (auto& v : out) v = static_cast<float>(rng.next_gaussian());
  return out;
}

}  // namespace streamflow::numerics
