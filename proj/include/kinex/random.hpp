#pragma once

#include <cstdint>

namespace kinex {

// SplitMix64 output function. Only used to turn (seed, index, purpose) into
// well-separated engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// What a sub-stream is used for. Each purpose gets its own engine so that
/// turning a measurement on or off never perturbs the dynamics.
enum class StreamPurpose : std::uint64_t {
  dynamics = 0,
  lambda = 1,
  measurement = 2,
  initial = 3,
};

/// xoshiro256** (Blackman & Vigna) with portable conversions to doubles and
/// bounded integers (the std distributions are implementation-defined). The
/// 256-bit state is filled from a SplitMix64 sequence, as its authors advise.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) { fill(mix64(seed)); }

  /// Sub-stream `index` of `master_seed`: ensemble realizations are keyed by
  /// their index, never by the worker that happens to run them.
  RngStream(std::uint64_t master_seed, std::uint64_t index, StreamPurpose purpose) {
    fill(mix64(master_seed) ^ mix64(index * 4 + static_cast<std::uint64_t>(purpose)));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n), n > 0 (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t x = next();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next();
        m = static_cast<unsigned __int128>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool coin() { return (next() >> 63) != 0; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  void fill(std::uint64_t x) {
    for (auto& word : s_) {
      x += 0x9E3779B97F4A7C15ULL;
      word = mix64(x - 0x9E3779B97F4A7C15ULL);
    }
  }

  std::uint64_t s_[4];
};

}  // namespace kinex
