#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>

namespace gwcouple {

/// Seedable stream of 64-bit words (SplitMix64) with helpers for unit-interval
/// and bounded integer draws. Substreams are derived by hashing a key path, so
/// any (seed, key...) pair names an independent, reproducible stream.
///
/// All draws are defined here rather than through <random> distributions so
/// that byte output does not depend on the standard library implementation.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe to pass to log().
  double uniform_pos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n > 0 (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Independent stream keyed by this stream's seed material and `key`.
  [[nodiscard]] Rng substream(std::uint64_t key) const { return Rng(mix(state_ ^ mix(key + 0x632be59bd9b4e019ULL))); }

  [[nodiscard]] Rng substream(std::span<const std::uint32_t> path) const {
    std::uint64_t h = mix(state_ + 0x8cb92ba72f3d8dd7ULL);
    h = mix(h ^ (path.size() + 1));
    for (std::uint32_t c : path) h = mix(h ^ (static_cast<std::uint64_t>(c) * 0xff51afd7ed558ccdULL + 1));
    return Rng(h);
  }

  static Rng keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = mix(seed ^ 0xd1b54a32d192ed03ULL);
    for (auto k : keys) h = mix(h ^ mix(k + 0x9e3779b97f4a7c15ULL));
    return Rng(h);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace gwcouple
