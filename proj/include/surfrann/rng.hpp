#pragma once

#include <cstdint>

namespace surfrann {

// Counter-based generator: the m-th draw is a pure function of (key, m), so
// streams can be split without sharing state and results do not depend on
// thread scheduling. The mixing function is splitmix64.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ kGamma)) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Independent child stream; deterministic in (parent seed, index).
  CounterRng split(std::uint64_t index) const {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(index + kGamma));
    child.counter_ = 0;
    return child;
  }

  static std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix(mix(base ^ kGamma) ^ mix(stream + kGamma));
  }

private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

} // namespace surfrann
