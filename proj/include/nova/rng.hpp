#pragma once

// Deterministic splittable random source. Every consumer derives its own
// stream from (seed, stream id), so adding or reordering draws in one part
// of the code never shifts the values seen elsewhere. Outputs are produced
// by a SplitMix64-style finalizer applied to (key, counter), which makes the
// sequence reproducible across platforms and independent of libstdc++
// distribution internals.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace nova {

class SplitRng {
public:
  explicit SplitRng(std::uint64_t seed) : key_(mix(seed ^ 0x6A09E667F3BCC909ull)) {}

  // Child stream: decorrelated from this stream and from other ids.
  SplitRng split(std::uint64_t stream) const {
    SplitRng child(0);
    child.key_ = mix(key_ ^ mix(stream * 0xD1B54A32D192ED03ull + 0x9E3779B97F4A7C15ull));
    return child;
  }

  std::uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = mag * std::sin(ang);
    have_spare_ = true;
    return mag * std::cos(ang);
  }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace nova
