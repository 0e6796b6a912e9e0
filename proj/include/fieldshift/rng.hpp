#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "fieldshift/errors.hpp"

namespace fieldshift {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mix two 64-bit values into one; used to derive per-stream seeds.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

/// xoshiro256** generator. The standard library engines are portable but
/// the standard distributions are not, so both the engine and the
/// distributions here are pinned down to make every seeded run
/// bit-reproducible across platforms.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0,1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be positive.
  uint64_t bounded(uint64_t n) {
    if (n == 0) throw ParameterError("Rng::bounded: n must be positive");
    return static_cast<uint64_t>(
        (static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller; consumes exactly two raw draws.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Derive an independent stream without disturbing this one.
  Rng derive(uint64_t stream) const {
    return Rng(mix_seed(state_[0] ^ state_[3], stream));
  }

  std::string serialize() const {
    std::ostringstream os;
    os << state_[0] << ' ' << state_[1] << ' ' << state_[2] << ' ' << state_[3];
    return os.str();
  }

  static Rng deserialize(const std::string& text) {
    Rng rng;
    std::istringstream is(text);
    for (auto& word : rng.state_)
      if (!(is >> word)) throw FormatError("Rng::deserialize: bad state record");
    return rng;
  }

  friend bool operator==(const Rng& a, const Rng& b) {
    for (int i = 0; i < 4; ++i)
      if (a.state_[i] != b.state_[i]) return false;
    return true;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t state_[4] = {};
};

}  // namespace fieldshift
