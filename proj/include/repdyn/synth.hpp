#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "repdyn/embstore.hpp"
#include "repdyn/lowlevel.hpp"

namespace repdyn {

struct ClusterData {
  EmbeddingMatrix matrix;
  std::vector<std::size_t> labels;  // cluster index, assigned round-robin
};

/// Centres uniform on the sphere of radius `separation`, unit-variance points
/// around them.
ClusterData gen_gaussian_clusters(std::size_t n, std::size_t dim, std::size_t n_clusters, double separation,
                                  std::uint64_t seed);

/// Two 3-layer stacks reaching the same final representation by different
/// routes. Each point has a shape s and a colour c in {0..3} and a shared
/// 4-d nuisance vector u. Coordinates are [shape one-hot | colour one-hot | u]:
///   A1 = [4 s, 0 c, u + 0.3 j]   A2 = [4 s, 2 c, u + 0.3 j]
///   B1 = [0 s, 4 c, u + 0.3 j]   B2 = [2 s, 4 c, u + 0.3 j]
///   A3 = B3 = [4 s, 4 c, 0.5 u]
/// where j is fresh per-layer jitter.
struct TwoProcessStacks {
  std::array<EmbeddingMatrix, 3> a;
  std::array<EmbeddingMatrix, 3> b;
  std::vector<std::size_t> shape;
  std::vector<std::size_t> color;
};

TwoProcessStacks gen_two_process(std::size_t n, std::uint64_t seed);

/// base + sigma * N(0, 1), seeded.
EmbeddingMatrix gen_noisy_copy(const EmbeddingMatrix& base, double sigma, std::uint64_t seed);

/// Rows permuted by a seeded random permutation.
EmbeddingMatrix gen_shuffled_copy(const EmbeddingMatrix& base, std::uint64_t seed);

/// Standard normal matrix.
EmbeddingMatrix gen_gaussian(std::size_t n, std::size_t dim, std::uint64_t seed, LayerRef layer = {});

/// Layer stack where layer l = x + step * (e_1 + ... + e_l): a random walk of
/// the points, so neighbourhoods drift further apart with layer distance.
/// x is drawn from `seed`, the walk from `walk_seed`; stacks sharing `seed`
/// start from the same points.
std::vector<EmbeddingMatrix> gen_drift_stack(std::size_t n, std::size_t dim, std::size_t n_layers, double step,
                                             std::uint64_t seed, std::uint64_t walk_seed,
                                             const std::string& model_name);

enum class ImageKind { constant, step_edge, stripes, noise, solid_color };

ImageKind parse_image_kind(std::string_view name);

struct ImageParams {
  std::array<std::uint8_t, 3> color = {128, 128, 128};  // constant / solid_color
  std::size_t step_column = 0;                          // step_edge; 0 means width / 2
  std::size_t stripe_period = 4;                        // stripes
  std::size_t channels = 3;
};

/// step_edge is black left of the step column and white from it onward;
/// stripes alternate black/white vertical bands of half the period.
ImageRaster gen_synthetic_image(ImageKind kind, std::size_t width, std::size_t height, const ImageParams& params,
                                std::uint64_t seed);

}  // namespace repdyn
