#pragma once

#include <cstdint>

namespace mtbias {

// SplitMix64. Fixed here (rather than std::mt19937) so that generated weight
// sets are reproducible bit-for-bit across toolchains and languages.
struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform in [-s, s)
  double uniform_sym(double s) { return (2.0 * uniform() - 1.0) * s; }

  // uniform integer in [0, n); n must be positive
  uint64_t below(uint64_t n) { return next() % n; }
};

}  // namespace mtbias
