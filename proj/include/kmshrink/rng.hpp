#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace kmshrink {

// Self-contained counter-free PRNG (splitmix64). Deterministic across
// platforms and independent of libstdc++ distribution internals, which keeps
// experiment payloads byte-identical for a fixed seed. derive() spawns an
// independent stream from the construction seed, so per-trial streams do not
// depend on the order in which trials run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(mix(seed ^ kGolden)) {}

  Rng derive(std::uint64_t stream) const {
    return Rng(mix(seed_ + kGolden * (stream + 1)));
  }

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; stateless (no cached spare variate).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t index(std::size_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64.
    return static_cast<std::size_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace kmshrink
