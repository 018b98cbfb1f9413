#pragma once

#include <cstdint>
#include <random>

namespace qmix {

// splitmix64 finalizer; decorrelates consecutive seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) { return mix64(mix64(base) ^ index); }

inline std::mt19937_64 make_rng(std::uint64_t base, std::uint64_t index) {
  return std::mt19937_64(derive_seed(base, index));
}

}  // namespace qmix
