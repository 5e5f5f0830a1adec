#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "repdyn/embstore.hpp"

namespace repdyn {

enum class Metric {
  euclidean,
  cosine,  // 1 - a.b / (|a||b|); zero-norm vectors are rejected
};

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

/// Sets the worker count for data-parallel loops (0 = runtime default).
/// Results never depend on this value.
void set_num_threads(int threads);
int num_threads();

/// Distance between two equal-length vectors. Accumulates in double with the
/// same lane order as DistanceEngine, so the two agree bit for bit.
double distance(std::span<const float> a, std::span<const float> b, Metric metric);

struct Neighbor {
  std::size_t index;
  double distance;
  bool operator==(const Neighbor&) const = default;
};

/// Every other point ordered by ascending distance, ties by ascending index.
struct RankArray {
  std::size_t query_index;
  std::vector<Neighbor> ordered;
};

/// Default neighborhood size.
inline constexpr std::size_t kDefaultK = 10;

/// Computes rows of the distance matrix of one embedding matrix. Keeps its own
/// double-precision copy of the rows.
class DistanceEngine {
 public:
  static constexpr std::size_t kQueryBlock = 16;

  DistanceEngine(const EmbeddingMatrix& matrix, Metric metric);

  std::size_t size() const { return n_; }
  Metric metric() const { return metric_; }

  /// Distances from `query` to every point; out[query] is set to +infinity so
  /// the query never ranks against itself.
  void row(std::size_t query, std::span<double> out) const;

  /// Rows for queries [first, first + count), count <= kQueryBlock, written
  /// consecutively (count * size() entries).
  void rows(std::size_t first, std::size_t count, std::span<double> out) const;

 private:
  Metric metric_;
  std::size_t n_;
  std::size_t dim_;
  std::vector<double> data_;
  std::vector<double> sq_norms_;
};

/// Index of the smallest finite entry, lowest index on ties.
std::size_t nearest_in_row(std::span<const double> row);

/// 1-based rank of `target` within a distance row whose query slot holds +inf.
std::size_t rank_in_row(std::span<const double> row, std::size_t target);

RankArray rank_array(const EmbeddingMatrix& matrix, std::size_t query, Metric metric);
RankArray rank_array(const DistanceEngine& engine, std::size_t query);

std::vector<std::size_t> k_nearest(const EmbeddingMatrix& matrix, std::size_t query, std::size_t k,
                                   Metric metric);

/// k nearest neighbors (with distances) of every point, computed in parallel.
std::vector<std::vector<Neighbor>> k_nearest_all(const EmbeddingMatrix& matrix, std::size_t k,
                                                 Metric metric);

std::size_t rank_of(const EmbeddingMatrix& matrix, std::size_t query, std::size_t target,
                    Metric metric);

/// Calls `visit` once per query with its full RankArray. Queries are processed
/// in parallel and `visit` may be invoked concurrently from several threads.
void for_each_rank_array(const EmbeddingMatrix& matrix, Metric metric,
                         const std::function<void(RankArray&&)>& visit);

void check_neighborhood(std::size_t k, std::size_t n_points);

}  // namespace repdyn
