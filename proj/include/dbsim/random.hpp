#pragma once

#include <cstdint>
#include <random>

namespace dbsim {

using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent stream seeds from a run seed
// without correlated low bits.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// uniform double in [0, 1) with 53 random bits, independent of library
// distribution internals so rollout sampling is stable across platforms
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace dbsim
