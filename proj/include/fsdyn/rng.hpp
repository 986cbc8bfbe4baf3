#pragma once

#include <cstdint>

namespace fsdyn {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based draw: a pure function of (seed, stream, counter), so any
// partition of the work over threads sees the same numbers.
constexpr std::uint64_t counter_draw(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t counter) {
  std::uint64_t z = mix64(seed ^ 0x6a09e667f3bcc908ULL);
  z = mix64(z ^ (stream * 0xd1342543de82ef95ULL));
  return mix64(z ^ (counter * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL));
}

// Uniform double in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by multiply-shift (bias below 2^-40 for small n).
inline std::uint64_t to_range(std::uint64_t bits, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits) * n) >> 64);
}

// Derive an independent seed for a named sub-computation.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag + 0x3c6ef372fe94f82bULL));
}

}  // namespace fsdyn
