#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace eclab {

// SplitMix64 step (Steele, Lea, Flood 2014); the workhorse behind stream
// derivation and generation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-derived random stream. Every consumer derives its own stream from
// (master seed, id list), so results never depend on thread schedule.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1), 53-bit resolution, bit-stable across platforms
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), rejection sampled to avoid modulo bias
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  // uniform integer in [lo, hi], inclusive
  int next_int(int lo, int hi) {
    return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi) - lo + 1));
  }

  // standard normal, Box-Muller; consumes exactly two uniforms per call
  double next_normal() {
    double u1 = next_double();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

// Domain separation tags so unrelated streams never collide on the same ids.
enum StreamTag : std::uint64_t {
  kTagRollout = 0x01,
  kTagTheorem = 0x02,
  kTagGradcheckInstance = 0x03,
  kTagSeedExpansion = 0x04,
  kTagDegeneracySample = 0x05,
};

inline RngStream derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = master;
  (void)splitmix64(h);
  for (std::uint64_t id : ids) {
    h ^= id + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    (void)splitmix64(h);
  }
  return RngStream(h);
}

}  // namespace eclab
