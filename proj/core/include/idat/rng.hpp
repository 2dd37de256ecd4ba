#pragma once

#include <cmath>
#include <cstdint>

namespace idat {

// Counter-based 64-bit generator. Output i of stream (seed, stream) is
// mix(key + i * GAMMA) where key is derived from the pair, so independent
// streams never interleave and any value can be reproduced from
// {seed, stream, index} alone. Identical sequences on every platform.
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream) : key_(derive_key(seed, stream)) {}

  uint64_t next_u64() { return mix(key_ + ++counter_ * kGamma); }

  // Uniform in [0, 1), 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  float next_float() { return static_cast<float>(next_double()); }

  float uniform(float lo, float hi) {
    return lo + (hi - lo) * static_cast<float>(next_double());
  }

  // Box-Muller; consumes two uniforms per pair and caches the partner.
  float normal(float mean = 0.0f, float stddev = 1.0f) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * static_cast<float>(spare_);
    }
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * static_cast<float>(r * std::cos(theta));
  }

  // Index in [0, n), rejection-sampled to avoid modulo bias.
  uint64_t next_below(uint64_t n) {
    const uint64_t limit = n * (~uint64_t{0} / n);
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static uint64_t derive_key(uint64_t seed, uint64_t stream) {
    return mix(mix(seed + kGamma) ^ mix(stream * kGamma + 0x7F4A7C15ull));
  }

  uint64_t key_;
  uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream ids used across the library. Teacher-side streams add
// kTeacherOffset so the two models of a run never share a sequence.
namespace stream {
inline constexpr uint64_t kBackboneInit = 1;
inline constexpr uint64_t kHeadInit = 2;
inline constexpr uint64_t kAdapterInit = 3;
inline constexpr uint64_t kTeacherOffset = 100;
inline constexpr uint64_t kPrototype = 1000;   // + class id
inline constexpr uint64_t kTrainNoise = 10000; // + class id
inline constexpr uint64_t kValNoise = 20000;   // + class id
inline constexpr uint64_t kTestNoise = 30000;  // + class id
inline constexpr uint64_t kBatchOrder = 40000; // + epoch
}  // namespace stream

}  // namespace idat
