#pragma once

#include <cmath>
#include <cstdint>

namespace gbetd {

/// Named substreams so runs that must share randomness (e.g. coupled trace
/// experiments sharing a state trajectory) can do so exactly.
enum class RngStreamId : std::uint64_t {
  kInit = 1,
  kTransition = 2,
  kRewardNoise = 3,
  kProbe = 4,
  kRollout = 5,
  kScratch = 6,
};

/// Counter-based generator: output k of stream (seed, id) is a pure function
/// of (seed, id, k). SplitMix64 finalizer over a Weyl sequence.
class RngStream {
 public:
  RngStream() : RngStream(0, RngStreamId::kScratch) {}
  RngStream(std::uint64_t seed, RngStreamId id)
      : RngStream(seed, static_cast<std::uint64_t>(id)) {}
  RngStream(std::uint64_t seed, std::uint64_t raw_id)
      : key_(mix(mix(seed + 0x9e3779b97f4a7c15ULL) ^ (raw_id * 0xbf58476d1ce4e5b9ULL))) {}

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal (Box-Muller, cosine branch; consumes two draws).
  double next_gaussian() {
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Index sampled from the discrete distribution given by probs[0..n).
  /// Assumes the weights sum to ~1; the last positive entry absorbs roundoff.
  int next_categorical(const double* probs, int n) {
    const double u = next_double();
    double acc = 0.0;
    int last_positive = 0;
    for (int i = 0; i < n; ++i) {
      if (probs[i] <= 0.0) continue;
      last_positive = i;
      acc += probs[i];
      if (u < acc) return i;
    }
    return last_positive;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gbetd
