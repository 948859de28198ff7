#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace splitprune {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Independent named stream derived from a root seed ("init", "noise", "replay", "warmup", ...).
inline Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  return Rng(splitmix64(splitmix64(seed ^ fnv1a(name)) + index));
}

}  // namespace splitprune
