#pragma once

#include <cstdint>
#include <random>

namespace pdppo {

using Rng = std::mt19937_64;

/// Stream identifiers for deriving independent generators from one run seed.
enum class SeedStream : std::uint64_t {
  environment = 1,
  network_init = 2,
  agent = 3,
  instance = 4,
  evaluation = 5,
};

/// splitmix64 finalizer; mixes a seed and a stream tag into a new seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

inline Rng make_rng(std::uint64_t seed, SeedStream stream) {
  return Rng(derive_seed(seed, stream));
}

/// Uniform real in [lo, hi).
inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Uniform integer in [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace pdppo
