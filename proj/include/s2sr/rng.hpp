#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace s2sr {

// Seeded draws on top of std::mt19937 (whose output sequence is fixed by the
// standard). The std <random> distributions are implementation-defined, so
// everything that must reproduce byte-identically goes through these helpers.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(static_cast<uint32_t>(seed ^ (seed >> 32))) {}

  uint32_t next_u32() { return gen_(); }

  // Uniform in [0,1) with 24 bits of resolution.
  float uniform01() { return static_cast<float>(next_u32() >> 8) * (1.0f / 16777216.0f); }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased uniform integer in [0, n), n >= 1.
  uint32_t below(uint32_t n) {
    const uint32_t limit = UINT32_MAX - UINT32_MAX % n;
    uint32_t x;
    do {
      x = next_u32();
    } while (x >= limit);
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = below(static_cast<uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937 gen_;
};

}  // namespace s2sr
