#pragma once

// Counter-addressed random streams. Each simulated path owns a generator
// whose state is a pure function of (master_seed, path_index), so results
// never depend on which worker thread ran the path.

#include <array>
#include <cstdint>

#include <boost/random/normal_distribution.hpp>

namespace aglqr {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// Stream key for one path: mix(master_seed ^ mix((path_index + 1) * gamma)).
/// Distinct path indices give unrelated keys for any master seed.
constexpr std::uint64_t stream_key(std::uint64_t master_seed,
                                   std::uint64_t path_index) noexcept {
  return splitmix64_mix(master_seed ^
                        splitmix64_mix((path_index + 1) * kGoldenGamma));
}

/// xoshiro256++ 1.0 (Blackman and Vigna). Satisfies
/// UniformRandomBitGenerator.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Xoshiro256pp(std::uint64_t key) noexcept {
    // Expand the key with the SplitMix64 sequence; never yields all zeros.
    std::uint64_t x = key;
    for (auto& word : state_) {
      x += kGoldenGamma;
      word = splitmix64_mix(x);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

/// Standard normal draws for one path (ziggurat sampler from Boost.Random,
/// whose output is fixed by the library rather than the platform).
class NormalStream {
 public:
  NormalStream(std::uint64_t master_seed, std::uint64_t path_index)
      : engine_(stream_key(master_seed, path_index)) {}

  double operator()() { return normal_(engine_); }

  Xoshiro256pp& engine() noexcept { return engine_; }

 private:
  Xoshiro256pp engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

/// Test hook: a noise source that always returns 0.
struct ZeroNoise {
  constexpr double operator()() const noexcept { return 0.0; }
};

}  // namespace aglqr
