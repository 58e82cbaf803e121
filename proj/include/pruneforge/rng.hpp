// Deterministic pseudo-randomness. SplitMix64: the same seed yields the same
// stream on every platform, which makes whole experiments replayable from a
// single integer.
#pragma once

#include <cstdint>

namespace pruneforge {

class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : state_(seed) {}

  // SplitMix64 step (Steele, Lea, Flood 2014). Constants are part of the
  // stream contract and must not change.
  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1), 53 mantissa bits.
  double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, n). Modulo bias is ~n/2^64, irrelevant at our n.
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

}  // namespace pruneforge
