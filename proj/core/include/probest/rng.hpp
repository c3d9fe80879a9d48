#pragma once

#include <array>
#include <cstdint>
#include <iterator>
#include <limits>
#include <string_view>
#include <utility>

namespace probest {

/// xoshiro256** (Blackman & Vigna), state seeded through SplitMix64.
///
/// Every consumer of randomness takes its own stream, derived from a master
/// seed and a purpose tag with `Rng::stream`. Uniform, normal and bounded
/// integer draws are implemented here rather than through <random>
/// distributions, whose output is implementation-defined; this keeps
/// experiments bit-reproducible across standard libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  /// Independent stream for (master seed, purpose, index).
  static Rng stream(std::uint64_t master, std::string_view purpose,
                    std::uint64_t index = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type next() noexcept;
  result_type operator()() noexcept { return next(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal via the Marsaglia polar method.
  double normal() noexcept;
  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// True with probability p (p outside [0,1] saturates).
  bool bernoulli(double p) noexcept { return uniform() < p; }

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) noexcept {
    auto n = static_cast<std::uint64_t>(std::distance(first, last));
    for (std::uint64_t i = n; i > 1; --i) {
      std::uint64_t j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; exposed for seed derivation in callers.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace probest
