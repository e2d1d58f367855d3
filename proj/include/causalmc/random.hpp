#pragma once

#include <cstdint>
#include <random>

namespace causalmc {

// Deterministic substream derivation. Cell-level generators are seeded from
// (seed, i, j) so that serial and parallel evaluation orders produce
// identical output.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t a) {
  return splitmix64(seed ^ splitmix64(a));
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(mix(seed, a) ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

// Generator for one logical substream.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return std::mt19937_64(mix(seed, a, b));
}

}  // namespace rng

}  // namespace causalmc
