#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "repdyn/embstore.hpp"
#include "repdyn/knn.hpp"

namespace repdyn {

/// |a & b| / |a | b|. Throws when both sets are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

enum class Aggregation {
  query_neighbor,  // k values per neighborhood: query vs each neighbor
  all_pairs,       // every pair within {query} + neighbors
};

Aggregation parse_aggregation(std::string_view name);

struct NeighborhoodCoherence {
  double mean = 0.0;
  std::vector<double> values;
};

/// Jaccard scores of one query's neighborhood. `row_ids[i]` names row i of
/// `layer`; neighbors are searched over all rows.
NeighborhoodCoherence neighborhood_coherence(std::size_t query, const EmbeddingMatrix& layer,
                                             std::span<const std::string> row_ids, const LabelFile& labels,
                                             std::size_t k, Metric metric,
                                             Aggregation aggregation = Aggregation::query_neighbor);

struct CoherencePoint {
  LayerRef layer;
  double mean_jaccard = 0.0;
  double std_jaccard = 0.0;  // population std over the pooled pair values
  std::size_t n_queries = 0;
  std::size_t k = 0;
};

struct CoherenceOptions {
  std::size_t n_queries = 50;
  std::size_t k = kDefaultK;
  Metric metric = Metric::cosine;
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::query_neighbor;
};

/// One point per layer of `model`; the query sample is drawn once and reused
/// across layers.
std::vector<CoherencePoint> coherence_curve(const Manifest& manifest, const std::string& model,
                                            const LabelFile& labels, const CoherenceOptions& options);

/// Same, over already-loaded layers whose rows are named by `row_ids`.
std::vector<CoherencePoint> coherence_curve(std::span<const EmbeddingMatrix> layers,
                                            std::span<const std::string> row_ids, const LabelFile& labels,
                                            const CoherenceOptions& options);

}  // namespace repdyn
