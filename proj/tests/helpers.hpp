#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "repdyn/embstore.hpp"

namespace testutil {

inline repdyn::EmbeddingMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, bool integer = false,
                                             repdyn::LayerRef layer = {}) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> normal;
  std::uniform_int_distribution<int> small(-3, 3);
  std::vector<float> v(n * d);
  for (float& x : v) x = integer ? static_cast<float>(small(gen)) : normal(gen);
  if (integer)  // keep cosine defined
    for (std::size_t i = 0; i < n; ++i) v[i * d] = static_cast<float>(1 + (i % 3));
  return repdyn::EmbeddingMatrix(n, d, std::move(v), std::move(layer));
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("repdyn_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
