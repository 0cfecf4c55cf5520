#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

namespace caf {

// Deterministic splitmix64 generator. Used instead of <random> engines so
// that every stream is reproducible bit-for-bit across builds and platforms.
// Independent streams are derived from (seed, tag...) so work can be
// re-ordered or parallelized without changing results.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static Rng stream(uint64_t seed, std::initializer_list<uint64_t> tags) {
    uint64_t s = mix(seed ^ 0x243F6A8885A308D3ULL);
    for (uint64_t t : tags) s = mix(s ^ (t + 0x9E3779B97F4A7C15ULL));
    return Rng(s);
  }

  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    return mix_z(z);
  }

  // [0, 1)
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n)
  uint64_t below(uint64_t n) {
    const uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next();
    } while (x >= lim);
    return x % n;
  }

  // integer in [lo, hi] inclusive
  int64_t range(int64_t lo, int64_t hi) {
    return lo + int64_t(below(uint64_t(hi - lo + 1)));
  }

  // Box-Muller without spare caching, keeps the stream position predictable.
  double normal() {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    double u1 = double((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = double(next() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  double truncated_normal(double stddev, double clip = 2.0) {
    for (;;) {
      double z = normal();
      if (std::abs(z) <= clip) return z * stddev;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  static uint64_t mix_z(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static uint64_t mix(uint64_t z) { return mix_z(z + 0x9E3779B97F4A7C15ULL); }

  uint64_t state_;
};

// FNV-1a, used to derive per-tensor RNG stream tags from parameter names.
inline uint64_t fnv1a(const char* s) {
  uint64_t h = 1469598103934665603ULL;
  for (; *s; ++s) h = (h ^ uint8_t(*s)) * 1099511628211ULL;
  return h;
}
inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.c_str()); }

}  // namespace caf
