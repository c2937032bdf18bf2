#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace hierind {

/// SplitMix64 finalizer. Used both as the generator output function and to
/// derive independent substreams.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// A (seed, stream id) pair. Identical pairs always produce identical random
/// sequences; `derive` forks a child stream keyed by an integer tag so that
/// parallel tasks get independent, schedule-free randomness.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  constexpr RngSeed derive(std::uint64_t tag) const noexcept {
    return {seed, mix64(stream ^ mix64(tag + 0x632be59bd9b4e019ULL))};
  }
  constexpr RngSeed derive(std::uint64_t a, std::uint64_t b) const noexcept {
    return derive(a).derive(b);
  }

  friend constexpr bool operator==(const RngSeed&, const RngSeed&) = default;
};

/// Counter-based generator: the n-th output is mix64(key + n * golden).
/// Platform independent, unlike the std distributions.
class Rng {
 public:
  explicit Rng(RngSeed s) noexcept
      : counter_(mix64(s.seed) ^ mix64(s.stream + 0x5851f42d4c957f2dULL)) {}

  std::uint64_t next_u64() noexcept {
    counter_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = counter_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the paired value is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) noexcept {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % bound);
  }

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

  /// `count` distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t count) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < count && i < n; ++i) {
      std::swap(pool[i], pool[i + uniform_index(n - i)]);
    }
    pool.resize(count < n ? count : n);
    return pool;
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    return sample_without_replacement(n, n);
  }

  /// Poisson(1) draw by inversion; used for bootstrap multiplicities.
  unsigned poisson_one() noexcept {
    double u = uniform();
    double p = 0.36787944117144233;  // e^-1
    double cdf = p;
    unsigned k = 0;
    while (u > cdf && k < 64) {
      ++k;
      p /= k;
      cdf += p;
    }
    return k;
  }

 private:
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hierind
