#pragma once

#include <cstdint>
#include <initializer_list>

#include "qmed/stats.hpp"

namespace qmed {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Counter-keyed xoshiro256** stream. Streams derived from distinct key tuples
// are statistically independent, so replicate-level parallelism is
// reproducible at any worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { seed_state(seed); }

  // Derive an independent stream from (seed, k1, k2, ...).
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = seed;
    for (std::uint64_t k : keys) {
      h ^= k + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      detail::splitmix64(h);
      h = detail::splitmix64(h);
    }
    return Rng(h);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal by inverse transform; deterministic across platforms.
  double normal() { return norm_quantile(uniform()); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  void seed_state(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& s : s_) s = detail::splitmix64(sm);
  }
  std::uint64_t s_[4];
};

}  // namespace qmed
