#pragma once

#include <cstdint>
#include <random>

namespace curricle {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to spread user seeds into independent streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed for a named stream (init weights, epoch e, ...) of a master seed.
// Streams with distinct tags are decorrelated even for master seeds 0, 1, 2.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_tag) {
  return splitmix64(master ^ splitmix64(stream_tag));
}

// Uniform double in [0, 1) from the top 53 bits of a single draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

}  // namespace curricle
