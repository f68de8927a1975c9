#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ptrn {

// Deterministic RNG used across the project. Distributions are implemented
// here instead of <random> so that streams are identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ull) {}

  // splitmix64
  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, n), n >= 1.
  uint64_t uniform_u64(uint64_t n) {
    const uint64_t limit = n * ((~uint64_t{0}) / n);
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform_u64(static_cast<uint64_t>(hi - lo + 1)));
  }

  double uniform_real() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

  double gaussian() {  // Box-Muller, no caching so streams stay simple
    double u1 = uniform_real();
    double u2 = uniform_real();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {  // Fisher-Yates
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_u64(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[uniform_u64(v.size())];
  }

 private:
  uint64_t state_;
};

// Derives an independent stream for a pipeline stage or round, so running a
// prefix of the pipeline consumes exactly the same random numbers.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  uint64_t z = seed ^ (tag * 0xff51afd7ed558ccdull + 0x2545f4914f6cdd1dull);
  z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ull;
  return z ^ (z >> 33);
}

}  // namespace ptrn
