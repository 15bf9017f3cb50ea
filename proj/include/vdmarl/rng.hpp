#pragma once

#include <cstdint>
#include <random>

namespace vdmarl {

// splitmix64 step; used to derive independent seeds from one base seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d49bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream i of a run gets splitmix64(base ^ (i + 1)); the +1 keeps stream 0
// distinct from the base generator seeded with splitmix64(base).
inline uint64_t derive_stream_seed(uint64_t base, uint64_t index) {
  return splitmix64(base ^ (index + 1));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits; identical across platforms.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free modulo is fine at our ranges.
  int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<uint64_t>(n)); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace vdmarl
