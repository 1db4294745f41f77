#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace lrex {

// splitmix64: used both as a seed mixer and to expand a 64-bit key into
// xoshiro state. Constants from Vigna's reference implementation.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ stream seeded from a 64-bit key.  Streams for distinct keys
// are derived by mixing, never by sharing state, so any (site, ring) pair
// regenerates the same values in any run with the same master seed.
class Stream {
 public:
  explicit Stream(uint64_t key = 0) {
    uint64_t sm = key;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53 random bits.
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0,1], safe as a log argument.
  double next_open_double() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double next_exp() { return -std::log(next_open_double()); }

  // Index into a cumulative distribution; cdf.back() is expected to be ~1.
  int next_from_cdf(const std::vector<double>& cdf) {
    const double u = next_double();
    int lo = 0, hi = static_cast<int>(cdf.size()) - 1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (u < cdf[mid]) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

  uint64_t next_below(uint64_t n) { return next_u64() % n; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

// Derives independent stream keys from a master seed and a tuple of integers.
inline uint64_t derive_key(uint64_t master, uint64_t tag, uint64_t a = 0, uint64_t b = 0,
                           uint64_t c = 0) {
  uint64_t h = master;
  for (uint64_t v : {tag, a, b, c}) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    uint64_t sm = h;
    h = splitmix64(sm);
  }
  return h;
}

// Stream tags.  Keeping them in one place makes the derivation auditable.
namespace stream_tag {
constexpr uint64_t clock_ticks = 1;   // per-site Poisson clock increments
constexpr uint64_t chain_steps = 2;   // per (site, ring) walk steps
constexpr uint64_t replica = 3;       // per-replica experiment randomness
constexpr uint64_t scratch = 4;       // ad hoc sampling inside experiments
}  // namespace stream_tag

}  // namespace lrex
