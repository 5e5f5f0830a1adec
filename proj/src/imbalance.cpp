#include "repdyn/imbalance.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <stdexcept>

#include "repdyn/error.hpp"
#include "repdyn/rng.hpp"
#include "repdyn/stats.hpp"

namespace repdyn {

namespace {

std::atomic<std::uint64_t> g_range_checks{0};

constexpr std::uint64_t kGridSampleTag = 0x67726964;  // "grid"

double delta_from_rank_sum(std::uint64_t rank_sum, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double delta = 2.0 * static_cast<double>(rank_sum) / (nn * nn);
  check_imbalance_range(delta, n);
  return delta;
}

}  // namespace

ImbalanceResult ImbalanceResult::swapped() const {
  ImbalanceResult r = *this;
  std::swap(r.delta_ab, r.delta_ba);
  std::swap(r.layer_a, r.layer_b);
  return r;
}

void check_imbalance_range(double delta, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double lo = 2.0 / nn;
  const double hi = 2.0 * (nn - 1.0) / nn;
  if (!(delta >= lo && delta <= hi))
    throw std::logic_error("information imbalance " + std::to_string(delta) + " outside [2/N, 2(N-1)/N] for N=" +
                           std::to_string(n));
  g_range_checks.fetch_add(1, std::memory_order_relaxed);
}

std::uint64_t imbalance_range_checks() { return g_range_checks.load(); }

std::vector<double> imbalance_pairs(std::span<const EmbeddingMatrix* const> layers,
                                    std::span<const LayerPair> pairs, Metric metric) {
  if (layers.empty()) throw UsageError("no layers given");
  const std::size_t n = layers.front()->n_points();
  for (const auto* l : layers) {
    if (l->n_points() != n)
      throw UsageError("point-count mismatch (" + std::to_string(l->n_points()) + " vs " + std::to_string(n) +
                       "): spaces are not aligned");
  }
  if (n < 2) throw UsageError("information imbalance needs N >= 2");
  for (const auto& p : pairs) {
    if (p.from >= layers.size() || p.to >= layers.size()) throw UsageError("layer pair index out of range");
  }

  std::vector<DistanceEngine> engines;
  engines.reserve(layers.size());
  for (const auto* l : layers) engines.emplace_back(*l, metric);

  constexpr std::size_t QB = DistanceEngine::kQueryBlock;
  const std::size_t n_layers = layers.size();
  const std::size_t blocks = (n + QB - 1) / QB;
  std::vector<std::uint64_t> rank_sums(pairs.size(), 0);

#pragma omp parallel
  {
    std::vector<double> rows(n_layers * QB * n);
    std::vector<std::size_t> nearest(n_layers * QB);
    std::vector<std::uint64_t> local(pairs.size(), 0);

#pragma omp for schedule(dynamic, 2)
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const std::size_t first = blk * QB;
      const std::size_t count = std::min(QB, n - first);
      for (std::size_t l = 0; l < n_layers; ++l) {
        std::span<double> block(rows.data() + l * QB * n, QB * n);
        engines[l].rows(first, count, block);
        for (std::size_t b = 0; b < count; ++b)
          nearest[l * QB + b] = nearest_in_row(block.subspan(b * n, n));
      }
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        for (std::size_t b = 0; b < count; ++b) {
          std::span<const double> row(rows.data() + (pairs[p].to * QB + b) * n, n);
          local[p] += rank_in_row(row, nearest[pairs[p].from * QB + b]);
        }
      }
    }
#pragma omp critical
    for (std::size_t p = 0; p < pairs.size(); ++p) rank_sums[p] += local[p];
  }

  std::vector<double> out(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) out[p] = delta_from_rank_sum(rank_sums[p], n);
  return out;
}

double information_imbalance(const EmbeddingMatrix& a, const EmbeddingMatrix& b, Metric metric) {
  const EmbeddingMatrix* layers[] = {&a, &b};
  const LayerPair pairs[] = {{0, 1}};
  return imbalance_pairs(layers, pairs, metric).front();
}

ImbalanceResult imbalance_both(const EmbeddingMatrix& a, const EmbeddingMatrix& b, Metric metric) {
  const EmbeddingMatrix* layers[] = {&a, &b};
  const LayerPair pairs[] = {{0, 1}, {1, 0}};
  const auto d = imbalance_pairs(layers, pairs, metric);
  ImbalanceResult r;
  r.delta_ab = d[0];
  r.delta_ba = d[1];
  r.n_used = a.n_points();
  r.metric = metric;
  r.layer_a = a.layer();
  r.layer_b = b.layer();
  return r;
}

AnchorRule parse_anchor_rule(std::string_view name) {
  if (name == "three" || name == "three-point" || name == "three_point") return AnchorRule::three_point;
  if (name == "all" || name == "all-layers" || name == "all_layers") return AnchorRule::all_layers;
  throw UsageError("unknown anchor rule \"" + std::string(name) + "\" (expected three or all)");
}

std::vector<std::size_t> anchor_layers(std::size_t layer_count, AnchorRule rule) {
  if (layer_count == 0) throw UsageError("model has no layers");
  std::vector<std::size_t> out;
  if (rule == AnchorRule::all_layers) {
    for (std::size_t i = 0; i < layer_count; ++i) out.push_back(i);
    return out;
  }
  const std::size_t last = layer_count - 1;
  out = {std::min<std::size_t>(1, last), layer_count / 2, layer_count >= 2 ? layer_count - 2 : 0};
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ImbalanceGrid layer_grid(const Manifest& manifest, const std::string& model_a, const std::string& model_b,
                         const GridOptions& options) {
  const auto layers_a = manifest.layers_of(model_a);
  const auto layers_b = manifest.layers_of(model_b);
  if (layers_a.empty()) throw UsageError("unknown model \"" + model_a + "\"");
  if (layers_b.empty()) throw UsageError("unknown model \"" + model_b + "\"");
  const std::size_t total = manifest.image_ids.size();
  if (options.n < 2 || options.n > total)
    throw UsageError("subsample size " + std::to_string(options.n) + " must be in [2, " + std::to_string(total) + "]");

  // Positions within model A's manifest layers.
  std::vector<std::size_t> anchor_idx;
  if (options.anchor_override.empty()) {
    anchor_idx = anchor_layers(layers_a.size(), options.anchors);
  } else {
    for (std::size_t want : options.anchor_override) {
      auto it = std::find_if(layers_a.begin(), layers_a.end(),
                             [&](const ManifestLayer* l) { return l->layer.layer_index == want; });
      if (it == layers_a.end())
        throw UsageError("model \"" + model_a + "\" has no layer " + std::to_string(want));
      anchor_idx.push_back(static_cast<std::size_t>(it - layers_a.begin()));
    }
  }

  ImbalanceGrid grid;
  grid.n = options.n;
  grid.seed = options.seed;
  grid.metric = options.metric;
  grid.sample = sample_without_replacement(total, options.n, derive_seed(options.seed, {kGridSampleTag}));

  // Load each distinct manifest layer once, restricted to the shared sample.
  std::vector<EmbeddingMatrix> loaded;
  std::map<const ManifestLayer*, std::size_t> slot;
  auto load = [&](const ManifestLayer* ml) {
    auto it = slot.find(ml);
    if (it != slot.end()) return it->second;
    loaded.push_back(manifest.load(*ml).select_rows(grid.sample));
    return slot[ml] = loaded.size() - 1;
  };
  loaded.reserve(anchor_idx.size() + layers_b.size());

  std::vector<std::size_t> anchor_slots, target_slots;
  for (std::size_t a : anchor_idx) {
    anchor_slots.push_back(load(layers_a[a]));
    grid.anchors.push_back(layers_a[a]->layer);
  }
  for (const auto* ml : layers_b) {
    target_slots.push_back(load(ml));
    grid.targets.push_back(ml->layer);
  }

  std::vector<LayerPair> pairs;
  for (std::size_t as : anchor_slots)
    for (std::size_t ts : target_slots) {
      pairs.push_back({as, ts});
      pairs.push_back({ts, as});
    }
  std::vector<const EmbeddingMatrix*> ptrs;
  for (const auto& m : loaded) ptrs.push_back(&m);
  const auto deltas = imbalance_pairs(ptrs, pairs, options.metric);

  std::size_t p = 0;
  grid.values.resize(anchor_slots.size());
  for (std::size_t i = 0; i < anchor_slots.size(); ++i) {
    for (std::size_t j = 0; j < target_slots.size(); ++j) {
      ImbalanceResult r;
      r.delta_ab = deltas[p++];
      r.delta_ba = deltas[p++];
      r.n_used = options.n;
      r.metric = options.metric;
      r.layer_a = grid.anchors[i];
      r.layer_b = grid.targets[j];
      r.subsample_seed = options.seed;
      grid.values[i].push_back(std::move(r));
    }
  }
  return grid;
}

double smoothness(std::span<const double> series) { return consecutive_difference_std(series); }

std::vector<SubsampleStat> subsample_std(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                                         std::span<const std::size_t> sizes, std::size_t trials, Metric metric,
                                         std::uint64_t seed) {
  if (a.n_points() != b.n_points()) throw UsageError("point-count mismatch: spaces are not aligned");
  if (trials < 2) throw UsageError("subsample_std needs at least 2 trials");
  if (sizes.empty()) throw UsageError("no subsample sizes given");
  for (std::size_t s : sizes) {
    if (s < 2 || s > a.n_points())
      throw UsageError("subsample size " + std::to_string(s) + " must be in [2, " + std::to_string(a.n_points()) +
                       "]");
  }
  std::vector<SubsampleStat> out;
  for (std::size_t s : sizes) {
    SubsampleStat stat;
    stat.size = s;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto rows = sample_without_replacement(a.n_points(), s, derive_seed(seed, {s, t}));
      stat.values.push_back(information_imbalance(a.select_rows(rows), b.select_rows(rows), metric));
    }
    stat.std = population_std(stat.values);
    stat.mean = mean(stat.values);
    out.push_back(std::move(stat));
  }
  return out;
}

}  // namespace repdyn
