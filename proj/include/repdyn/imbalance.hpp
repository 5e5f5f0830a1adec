#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repdyn/embstore.hpp"
#include "repdyn/knn.hpp"

namespace repdyn {

/// Delta(A->B) and Delta(B->A) for one pair of aligned spaces.
struct ImbalanceResult {
  double delta_ab = 0.0;
  double delta_ba = 0.0;
  std::size_t n_used = 0;
  Metric metric = Metric::euclidean;
  LayerRef layer_a;
  LayerRef layer_b;
  std::optional<std::uint64_t> subsample_seed;

  ImbalanceResult swapped() const;
};

/// One ordered comparison: the neighbor structure of `from` predicting `to`.
struct LayerPair {
  std::size_t from;
  std::size_t to;
};

/// Throws std::logic_error unless 2/n <= delta <= 2(n-1)/n. Every imbalance
/// value produced by this library passes through here.
void check_imbalance_range(double delta, std::size_t n);
/// Number of values that have passed check_imbalance_range in this process.
std::uint64_t imbalance_range_checks();

/// Information imbalance Delta(from -> to) for every requested pair over a set
/// of aligned matrices (row i is the same image in all of them):
///   Delta = 2/N * mean_i rank_to(i, nn_from(i)),
/// where nn_from(i) is the rank-1 neighbor of i in `from` (ties: lowest index).
/// One pass over queries computes each layer's distance rows once, however
/// many pairs reference it. Rank sums are integers, so the result is exact and
/// independent of the thread count.
std::vector<double> imbalance_pairs(std::span<const EmbeddingMatrix* const> layers,
                                    std::span<const LayerPair> pairs, Metric metric);

double information_imbalance(const EmbeddingMatrix& a, const EmbeddingMatrix& b, Metric metric);

ImbalanceResult imbalance_both(const EmbeddingMatrix& a, const EmbeddingMatrix& b, Metric metric);

enum class AnchorRule {
  three_point,  // second, middle (floor(L/2)), penultimate
  all_layers,
};

AnchorRule parse_anchor_rule(std::string_view name);

/// Anchor layer indices for a model with `layer_count` layers. Duplicates
/// (short models) are dropped, order is ascending.
std::vector<std::size_t> anchor_layers(std::size_t layer_count, AnchorRule rule);

struct ImbalanceGrid {
  std::vector<LayerRef> anchors;   // layers of model A
  std::vector<LayerRef> targets;   // every layer of model B
  std::vector<std::vector<ImbalanceResult>> values;  // [anchor][target]
  std::size_t n = 0;
  std::uint64_t seed = 0;
  Metric metric = Metric::euclidean;
  std::vector<std::size_t> sample;  // manifest image positions used
};

struct GridOptions {
  AnchorRule anchors = AnchorRule::three_point;
  /// Explicit layer_index values of model A; replaces `anchors` when non-empty.
  std::vector<std::size_t> anchor_override;
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  Metric metric = Metric::euclidean;
};

/// Grid of both-direction imbalances between the anchor layers of `model_a`
/// and every layer of `model_b`, on one shared subsample of n images drawn
/// once from the seed.
ImbalanceGrid layer_grid(const Manifest& manifest, const std::string& model_a,
                         const std::string& model_b, const GridOptions& options);

/// Population std of consecutive differences of an imbalance series.
double smoothness(std::span<const double> series);

struct SubsampleStat {
  std::size_t size = 0;
  double std = 0.0;
  double mean = 0.0;
  std::vector<double> values;  // Delta(A->B) per trial
};

/// For every size, `trials` independent seeded subsamples without
/// replacement; reports the population std of Delta(A->B) across trials.
std::vector<SubsampleStat> subsample_std(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                                         std::span<const std::size_t> sizes, std::size_t trials,
                                         Metric metric, std::uint64_t seed);

}  // namespace repdyn
