#pragma once

#include <cstdint>
#include <random>

namespace gnat::detail {

// std::mt19937_64 output is fixed by the standard, but the std
// distributions are not; these helpers keep seeded draws identical across
// standard library implementations.
using Rng = std::mt19937_64;

// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
inline std::uint64_t UniformIndex(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound) - 1;
  std::uint64_t draw = rng();
  while (draw > limit) draw = rng();
  return draw % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace gnat::detail
