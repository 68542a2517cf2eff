#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ciphernmt {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable seed derivation for substreams (bootstrap resamples, per-key
// shuffles, per-sentence perturbation positions). Part of the determinism
// contract: the same master seed always yields the same derived streams,
// independent of platform and of call order elsewhere.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  splitmix64(s);
  return splitmix64(s);
}

inline uint64_t hash_str(std::string_view s, uint64_t seed = 0xcbf29ce484222325ULL) {
  uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// xoshiro256** with explicit integer/float mappings. std:: distributions are
// implementation-defined, which would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0, 1) with 53 bits of precision
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // unbiased integer in [0, n) by rejection
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % n;
  }

  // Box-Muller; one draw per call, spare cached
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  Rng fork(uint64_t stream) const {
    uint64_t s = s_[0] ^ rotl(s_[3], 13);
    return Rng(derive_seed(s, stream));
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ciphernmt
