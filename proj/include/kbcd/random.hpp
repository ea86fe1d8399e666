#pragma once

// Counter-based random streams. Every stochastic choice in the library is a
// pure function of (seed, counter), so blocks and trials can be regenerated
// in any order with identical results.

#include <cstdint>
#include <vector>

namespace kbcd {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from (seed, index).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Standard normal via the inverse CDF of one uniform draw.
  double normal();

 private:
  std::uint64_t state_;
};

/// Uniform random permutation of {0, ..., n-1} (Fisher-Yates).
std::vector<std::size_t> random_permutation(std::size_t n, Stream& rng);

/// `count` distinct draws from {0, ..., n-1}, uniformly without replacement,
/// in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    Stream& rng);

}  // namespace kbcd
