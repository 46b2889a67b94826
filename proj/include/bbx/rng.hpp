#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace bbx {

namespace detail {

// splitmix64 step (Steele, Lea, Flood 2014). Used for seeding and seed mixing.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

// Deterministic stream of pseudo-random draws. Same seed, same sequence,
// on every platform: the core generator is xoshiro256++ seeded via
// splitmix64, uniforms take the top 53 bits, normals come from Box-Muller
// over consecutive uniforms. No libc rand, no std::random distributions.
//
// Single-owner by contract: one stream per attack run, never shared.
class RngStream {
 public:
  static constexpr const char* kAlgorithm = "xoshiro256++ / 53-bit uniforms / Box-Muller";

  explicit RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = detail::splitmix64(sm);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound) via Lemire's multiply-shift reduction
  // (bias is below 2^-64 for the bounds used here; accepted for determinism).
  std::uint64_t uniform_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal draw. Box-Muller produces pairs; the second value is
  // cached, so draw parity is part of the stream state.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Fisher-Yates shuffle, back to front.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4] = {};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent child seed from a parent seed and a stream index.
// Documented mix: splitmix64 over (parent XOR golden-ratio-scaled index).
// The harness uses this so per-trial streams do not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  std::uint64_t s = parent ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  return detail::splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(parent, a), b);
}

}  // namespace bbx
