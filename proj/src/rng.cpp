#include "repdyn/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <algorithm>

#include "repdyn/error.hpp"

namespace repdyn {

std::uint64_t Rng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  state_ += kIncrement;
  return mix(state_);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t bound) {
  const auto wide = static_cast<unsigned __int128>(next_u64()) * bound;
  return static_cast<std::size_t>(wide >> 64);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = Rng::mix(seed + Rng::kIncrement);
  for (std::uint64_t t : tags) h = Rng::mix(h ^ Rng::mix(t + Rng::kIncrement));
  return h;
}

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng.below(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    std::uint64_t seed) {
  if (count > population)
    throw UsageError("sample of " + std::to_string(count) + " exceeds population of " +
                     std::to_string(population));
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  // partial Fisher-Yates from the front
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + rng.below(population - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace repdyn
