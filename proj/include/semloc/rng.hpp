#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace semloc {

// Deterministic RNG wrapper. std::mt19937_64 has a standardized bit stream;
// the distributions below are hand-rolled so sequences do not depend on the
// standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(next() % static_cast<std::uint64_t>(n));
  }

  double normal(double mean, double stddev) {
    // Marsaglia polar method, no cached spare.
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return mean + stddev * u * std::sqrt(-2.0 * std::log(s) / s);
  }

  // Splitmix64 step; used to derive independent substream seeds.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    return mix(seed ^ mix(salt));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace semloc
