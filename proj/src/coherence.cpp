#include "repdyn/coherence.hpp"

#include <algorithm>

#include "repdyn/error.hpp"
#include "repdyn/rng.hpp"
#include "repdyn/stats.hpp"

namespace repdyn {

namespace {

constexpr std::uint64_t kQuerySampleTag = 0x636f6865;  // "cohe"

const std::set<std::string>& labels_for(const LabelFile& labels, const std::string& id) {
  auto it = labels.find(id);
  if (it == labels.end()) throw DataError("no labels for image \"" + id + "\"");
  return it->second;
}

}  // namespace

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) throw UsageError("jaccard undefined for two empty sets");
  std::size_t shared = 0;
  for (const auto& s : a) shared += b.count(s);
  const std::size_t uni = a.size() + b.size() - shared;
  return static_cast<double>(shared) / static_cast<double>(uni);
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "query" || name == "query-neighbor" || name == "query_neighbor") return Aggregation::query_neighbor;
  if (name == "all-pairs" || name == "all_pairs") return Aggregation::all_pairs;
  throw UsageError("unknown aggregation \"" + std::string(name) + "\" (expected query or all-pairs)");
}

namespace {

NeighborhoodCoherence score(std::size_t query, std::span<const Neighbor> neighbors,
                            std::span<const std::string> row_ids, const LabelFile& labels,
                            Aggregation aggregation) {
  std::vector<const std::set<std::string>*> sets;
  sets.push_back(&labels_for(labels, row_ids[query]));
  for (const auto& nb : neighbors) sets.push_back(&labels_for(labels, row_ids[nb.index]));

  NeighborhoodCoherence out;
  if (aggregation == Aggregation::query_neighbor) {
    for (std::size_t i = 1; i < sets.size(); ++i) out.values.push_back(jaccard(*sets[0], *sets[i]));
  } else {
    for (std::size_t i = 0; i < sets.size(); ++i)
      for (std::size_t j = i + 1; j < sets.size(); ++j) out.values.push_back(jaccard(*sets[i], *sets[j]));
  }
  double sum = 0.0;
  for (double v : out.values) sum += v;
  out.mean = sum / static_cast<double>(out.values.size());
  return out;
}

}  // namespace

NeighborhoodCoherence neighborhood_coherence(std::size_t query, const EmbeddingMatrix& layer,
                                             std::span<const std::string> row_ids, const LabelFile& labels,
                                             std::size_t k, Metric metric, Aggregation aggregation) {
  if (row_ids.size() != layer.n_points()) throw UsageError("row ids do not match the layer's point count");
  if (query >= layer.n_points()) throw UsageError("query index out of range");
  check_neighborhood(k, layer.n_points());
  labels_for(labels, row_ids[query]);
  const RankArray ra = rank_array(layer, query, metric);
  return score(query, std::span<const Neighbor>(ra.ordered).first(k), row_ids, labels, aggregation);
}

std::vector<CoherencePoint> coherence_curve(std::span<const EmbeddingMatrix> layers,
                                            std::span<const std::string> row_ids, const LabelFile& labels,
                                            const CoherenceOptions& options) {
  if (layers.empty()) throw UsageError("no layers given");
  const std::size_t n = layers.front().n_points();
  if (row_ids.size() != n) throw UsageError("row ids do not match the layer's point count");
  if (options.n_queries < 1 || options.n_queries > n)
    throw UsageError("n_queries=" + std::to_string(options.n_queries) + " must be in [1, " + std::to_string(n) + "]");
  check_neighborhood(options.k, n);

  const auto queries = sample_without_replacement(n, options.n_queries, derive_seed(options.seed, {kQuerySampleTag}));
  for (std::size_t q : queries) labels_for(labels, row_ids[q]);

  std::vector<CoherencePoint> out;
  for (const auto& layer : layers) {
    if (layer.n_points() != n) throw UsageError("layers disagree on point count");
    DistanceEngine engine(layer, options.metric);
    std::vector<double> pooled;
    for (std::size_t q : queries) {
      const RankArray ra = rank_array(engine, q);
      auto nc = score(q, std::span<const Neighbor>(ra.ordered).first(options.k), row_ids, labels, options.aggregation);
      pooled.insert(pooled.end(), nc.values.begin(), nc.values.end());
    }
    CoherencePoint p;
    p.layer = layer.layer();
    p.mean_jaccard = mean(pooled);
    p.std_jaccard = population_std(pooled);
    p.n_queries = options.n_queries;
    p.k = options.k;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<CoherencePoint> coherence_curve(const Manifest& manifest, const std::string& model,
                                            const LabelFile& labels, const CoherenceOptions& options) {
  const auto mls = manifest.layers_of(model);
  if (mls.empty()) throw UsageError("unknown model \"" + model + "\"");
  // One layer in memory at a time; the query sample depends only on the seed.
  std::vector<CoherencePoint> out;
  for (const auto* ml : mls) {
    const EmbeddingMatrix layer = manifest.load(*ml);
    auto point = coherence_curve(std::span<const EmbeddingMatrix>(&layer, 1), manifest.image_ids, labels, options);
    out.push_back(std::move(point.front()));
  }
  return out;
}

}  // namespace repdyn
