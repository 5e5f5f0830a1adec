#include "repdyn/knn.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "repdyn/error.hpp"

namespace repdyn {

namespace {

using v8d = double __attribute__((vector_size(64)));

inline v8d load8(const double* p) {
  v8d v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// Fixed reduction order shared by every code path.
inline double lane_sum(v8d v) {
  return ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]));
}

// Lane j of a pair's accumulator sums the terms k = j (mod 8); the remainder
// goes to a scalar tail. The value of one pair is therefore identical whatever
// block or tile it is computed in.
template <std::size_t QB, bool Dot>
void block_kernel(const double* const* queries, const double* target, std::size_t dim, double* out) {
  v8d acc[QB];
  double tail[QB];
  for (std::size_t b = 0; b < QB; ++b) {
    acc[b] = v8d{};
    tail[b] = 0.0;
  }
  const std::size_t body = dim & ~std::size_t{7};
  for (std::size_t k = 0; k < body; k += 8) {
    const v8d t = load8(target + k);
    for (std::size_t b = 0; b < QB; ++b) {
      const v8d a = load8(queries[b] + k);
      if constexpr (Dot) {
        acc[b] += a * t;
      } else {
        const v8d d = a - t;
        acc[b] += d * d;
      }
    }
  }
  for (std::size_t k = body; k < dim; ++k) {
    const double t = target[k];
    for (std::size_t b = 0; b < QB; ++b) {
      const double a = queries[b][k];
      if constexpr (Dot) {
        tail[b] += a * t;
      } else {
        tail[b] += (a - t) * (a - t);
      }
    }
  }
  for (std::size_t b = 0; b < QB; ++b) out[b] = lane_sum(acc[b]) + tail[b];
}

inline double cosine_from(double dot, double sq_a, double sq_b) {
  // sqrt(fl(s*s)) == s, so identical and positively scaled vectors give exactly 0.
  const double d = 1.0 - dot / std::sqrt(sq_a * sq_b);
  return d < 0.0 ? 0.0 : d;
}

std::vector<double> widen(std::span<const float> v) { return {v.begin(), v.end()}; }

double self_dot(const double* p, std::size_t dim) {
  double out;
  block_kernel<1, true>(&p, p, dim, &out);
  return out;
}

constexpr std::size_t kSubBlock = 4;
constexpr std::size_t kTileBytes = 256 * 1024;

template <std::size_t QB>
void sub_block(const double* data, std::size_t dim, std::size_t n, Metric metric, std::span<const double> sq_norms,
               std::size_t first, std::size_t q0, std::size_t j0, std::size_t j1, double* out) {
  const double* queries[QB];
  for (std::size_t b = 0; b < QB; ++b) queries[b] = data + (first + q0 + b) * dim;
  double acc[QB];
  for (std::size_t j = j0; j < j1; ++j) {
    const double* t = data + j * dim;
    if (metric == Metric::euclidean) {
      block_kernel<QB, false>(queries, t, dim, acc);
      for (std::size_t b = 0; b < QB; ++b) out[(q0 + b) * n + j] = std::sqrt(acc[b]);
    } else {
      block_kernel<QB, true>(queries, t, dim, acc);
      for (std::size_t b = 0; b < QB; ++b) out[(q0 + b) * n + j] = cosine_from(acc[b], sq_norms[first + q0 + b], sq_norms[j]);
    }
  }
}

// Target rows are visited in tiles that stay cache resident across the
// query block.
void fill_rows(const double* data, std::size_t dim, std::size_t n, Metric metric, std::span<const double> sq_norms,
               std::size_t first, std::size_t count, double* out) {
  const std::size_t tile = std::max<std::size_t>(16, kTileBytes / (dim * sizeof(double)));
  for (std::size_t j0 = 0; j0 < n; j0 += tile) {
    const std::size_t j1 = std::min(n, j0 + tile);
    std::size_t q0 = 0;
    for (; q0 + kSubBlock <= count; q0 += kSubBlock)
      sub_block<kSubBlock>(data, dim, n, metric, sq_norms, first, q0, j0, j1, out);
    switch (count - q0) {
      case 1: sub_block<1>(data, dim, n, metric, sq_norms, first, q0, j0, j1, out); break;
      case 2: sub_block<2>(data, dim, n, metric, sq_norms, first, q0, j0, j1, out); break;
      case 3: sub_block<3>(data, dim, n, metric, sq_norms, first, q0, j0, j1, out); break;
      default: break;
    }
  }
  for (std::size_t b = 0; b < count; ++b) out[b * n + first + b] = std::numeric_limits<double>::infinity();
}

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

}  // namespace

std::string_view to_string(Metric metric) {
  return metric == Metric::euclidean ? "euclidean" : "cosine";
}

Metric parse_metric(std::string_view name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "cosine" || name == "cosine_distance") return Metric::cosine;
  throw UsageError("unknown metric \"" + std::string(name) + "\" (expected euclidean or cosine)");
}

void set_num_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int num_threads() { return omp_get_max_threads(); }

double distance(std::span<const float> a, std::span<const float> b, Metric metric) {
  if (a.size() != b.size())
    throw UsageError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  const std::vector<double> wa = widen(a), wb = widen(b);
  const double* pa = wa.data();
  double acc;
  if (metric == Metric::euclidean) {
    block_kernel<1, false>(&pa, wb.data(), a.size(), &acc);
    return std::sqrt(acc);
  }
  const double sa = self_dot(wa.data(), a.size());
  const double sb = self_dot(wb.data(), b.size());
  if (sa == 0.0 || sb == 0.0) throw UsageError("cosine distance undefined for a zero vector");
  block_kernel<1, true>(&pa, wb.data(), a.size(), &acc);
  return cosine_from(acc, sa, sb);
}

DistanceEngine::DistanceEngine(const EmbeddingMatrix& matrix, Metric metric)
    : metric_(metric), n_(matrix.n_points()), dim_(matrix.dim()), data_(matrix.values().begin(), matrix.values().end()) {
  if (metric_ == Metric::cosine) {
    sq_norms_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      sq_norms_[i] = self_dot(data_.data() + i * dim_, dim_);
      if (sq_norms_[i] == 0.0)
        throw UsageError("cosine distance undefined: row " + std::to_string(i) + " is a zero vector");
    }
  }
}

void DistanceEngine::row(std::size_t query, std::span<double> out) const {
  rows(query, 1, out);
}

void DistanceEngine::rows(std::size_t first, std::size_t count, std::span<double> out) const {
  if (count == 0 || count > kQueryBlock || first + count > n_)
    throw UsageError("query block out of range");
  if (out.size() < count * n_) throw UsageError("row buffer too small");
  fill_rows(data_.data(), dim_, n_, metric_, sq_norms_, first, count, out.data());
}

std::size_t nearest_in_row(std::span<const double> row) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] < best_d) {
      best_d = row[k];
      best = k;
    }
  }
  return best;
}

std::size_t rank_in_row(std::span<const double> row, std::size_t target) {
  const double dt = row[target];
  std::size_t less = 0;
  for (std::size_t k = 0; k < row.size(); ++k) less += row[k] < dt;
  std::size_t tied_before = 0;
  for (std::size_t k = 0; k < target; ++k) tied_before += row[k] == dt;
  return 1 + less + tied_before;
}

void check_neighborhood(std::size_t k, std::size_t n_points) {
  if (k < 1 || k >= n_points)
    throw UsageError("neighborhood size k=" + std::to_string(k) + " must be in [1, " +
                     std::to_string(n_points - 1) + "]");
}

RankArray rank_array(const DistanceEngine& engine, std::size_t query) {
  const std::size_t n = engine.size();
  if (query >= n) throw UsageError("query index " + std::to_string(query) + " out of range");
  std::vector<double> row(n);
  engine.row(query, row);
  RankArray out{query, {}};
  out.ordered.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    if (j != query) out.ordered.push_back({j, row[j]});
  std::sort(out.ordered.begin(), out.ordered.end(), neighbor_less);
  return out;
}

RankArray rank_array(const EmbeddingMatrix& matrix, std::size_t query, Metric metric) {
  return rank_array(DistanceEngine(matrix, metric), query);
}

namespace {

std::vector<Neighbor> top_k(std::span<const double> row, std::size_t query, std::size_t k) {
  std::vector<Neighbor> all;
  all.reserve(row.size() - 1);
  for (std::size_t j = 0; j < row.size(); ++j)
    if (j != query) all.push_back({j, row[j]});
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), neighbor_less);
  all.resize(k);
  return all;
}

}  // namespace

std::vector<std::size_t> k_nearest(const EmbeddingMatrix& matrix, std::size_t query, std::size_t k,
                                   Metric metric) {
  check_neighborhood(k, matrix.n_points());
  if (query >= matrix.n_points()) throw UsageError("query index out of range");
  DistanceEngine engine(matrix, metric);
  std::vector<double> row(matrix.n_points());
  engine.row(query, row);
  std::vector<std::size_t> out;
  for (const auto& nb : top_k(row, query, k)) out.push_back(nb.index);
  return out;
}

std::vector<std::vector<Neighbor>> k_nearest_all(const EmbeddingMatrix& matrix, std::size_t k,
                                                 Metric metric) {
  const std::size_t n = matrix.n_points();
  check_neighborhood(k, n);
  DistanceEngine engine(matrix, metric);
  std::vector<std::vector<Neighbor>> out(n);
  const std::size_t blocks = (n + DistanceEngine::kQueryBlock - 1) / DistanceEngine::kQueryBlock;
#pragma omp parallel
  {
    std::vector<double> buf(DistanceEngine::kQueryBlock * n);
#pragma omp for schedule(dynamic, 4)
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const std::size_t first = blk * DistanceEngine::kQueryBlock;
      const std::size_t count = std::min(DistanceEngine::kQueryBlock, n - first);
      engine.rows(first, count, buf);
      for (std::size_t b = 0; b < count; ++b)
        out[first + b] = top_k(std::span<const double>(buf).subspan(b * n, n), first + b, k);
    }
  }
  return out;
}

std::size_t rank_of(const EmbeddingMatrix& matrix, std::size_t query, std::size_t target,
                    Metric metric) {
  if (query >= matrix.n_points() || target >= matrix.n_points())
    throw UsageError("point index out of range");
  if (query == target) throw UsageError("rank_of requires query != target");
  DistanceEngine engine(matrix, metric);
  std::vector<double> row(matrix.n_points());
  engine.row(query, row);
  return rank_in_row(row, target);
}

void for_each_rank_array(const EmbeddingMatrix& matrix, Metric metric,
                         const std::function<void(RankArray&&)>& visit) {
  const std::size_t n = matrix.n_points();
  DistanceEngine engine(matrix, metric);
  const std::size_t blocks = (n + DistanceEngine::kQueryBlock - 1) / DistanceEngine::kQueryBlock;
#pragma omp parallel
  {
    std::vector<double> buf(DistanceEngine::kQueryBlock * n);
#pragma omp for schedule(dynamic, 4)
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const std::size_t first = blk * DistanceEngine::kQueryBlock;
      const std::size_t count = std::min(DistanceEngine::kQueryBlock, n - first);
      engine.rows(first, count, buf);
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t q = first + b;
        RankArray ra{q, {}};
        ra.ordered.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
          if (j != q) ra.ordered.push_back({j, buf[b * n + j]});
        std::sort(ra.ordered.begin(), ra.ordered.end(), neighbor_less);
        visit(std::move(ra));
      }
    }
  }
}

}  // namespace repdyn
