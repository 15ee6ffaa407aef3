// Deterministic RNG helpers, including the TPC-C NURand skewed pick.
#pragma once

#include <cstdint>
#include <random>

namespace anydb {

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(uint64_t seed) : eng(seed) {}

  // inclusive bounds
  int64_t uniform(int64_t lo, int64_t hi) {
    return lo + int64_t(eng() % uint64_t(hi - lo + 1));
  }
  double uniform01() { return double(eng() >> 11) * (1.0 / 9007199254740992.0); }
  bool chance(double p) { return uniform01() < p; }

  // TPC-C NURand(A, x, y) with the canonical constant per A.
  int64_t nurand(int64_t A, int64_t x, int64_t y) {
    int64_t C = 0;
    if (A == 255) C = 123;
    else if (A == 1023) C = 259;
    else if (A == 8191) C = 831;
    int64_t a = uniform(0, A);
    int64_t b = uniform(x, y);
    return (((a | b) + C) % (y - x + 1)) + x;
  }
};

inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace anydb
