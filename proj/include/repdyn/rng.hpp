#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace repdyn {

// SplitMix64 stream. The state advances by the golden-ratio increment
// 0x9E3779B97F4A7C15 and every output is the state passed through the
// finalizer (xor-shift 30, * 0xBF58476D1CE4E5B9, xor-shift 27,
// * 0x94D049BB133111EB, xor-shift 31). Output i of seed s is therefore
// mix(s + (i + 1) * increment), so any draw can be reproduced from
// (seed, counter) alone in any language.
class Rng {
 public:
  static constexpr std::uint64_t kIncrement = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t next_u64();
  // (u64 >> 11) * 2^-53, in [0, 1).
  double uniform();
  // Box-Muller on ((u64 >> 11) + 1) * 2^-53 and a second uniform; one
  // normal per two draws, the sine branch is discarded.
  double normal();
  // Multiply-high reduction: floor(u64 * bound / 2^64).
  std::size_t below(std::size_t bound);

  std::uint64_t counter() const { return state_; }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a base seed and a path of tags.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

/// `count` distinct indices from [0, population), sorted ascending.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    std::uint64_t seed);

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed);

}  // namespace repdyn
