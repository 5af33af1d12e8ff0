#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pcc {

// Deterministic random source. std::mt19937_64 gives a portable bit
// stream, but the standard distributions do not: their algorithms are
// implementation defined. Every draw below is therefore spelled out so
// that a seed produces the same sequence on any platform or compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1): top 53 bits of the draw scaled by 2^-53.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n) by rejection, so the result is exactly uniform.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller. The second value of each pair is
  // discarded; caching it would make the stream depend on call parity.
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream derived from the construction seed, not
  // from engine state, so derivation is insensitive to how many draws
  // happened in between. Mixing (splitmix64 finalizer) decorrelates
  // children of nearby (seed, index) pairs.
  Rng child(std::uint64_t index) const {
    std::uint64_t x = seed_ + 0x9E3779B97F4A7C15ULL * (index + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    x = x ^ (x >> 31);
    return Rng(x);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace pcc
