#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repdyn/embstore.hpp"

namespace repdyn {

struct ProbeHyperparams {
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  double l2_penalty = 1e-4;
  std::uint64_t seed = 0;
  double heldout_fraction = 0.1;

  void validate() const;
};

/// Linear scorer over raw features: score = w.x + b.
struct ProbeModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::string class_id;

  double score(std::span<const float> x) const;
  bool operator==(const ProbeModel&) const = default;
};

/// Disjoint, sorted row sets covering [0, n).
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

/// Heldout size is round(n * fraction), clamped to [1, n - 1].
Split make_split(std::size_t n, double heldout_fraction, std::uint64_t seed);

/// Logistic-loss probe on the given rows: features z-scored with the rows'
/// statistics, zero initialisation, `epochs` full-batch gradient steps with
/// L2 penalty on the weights. The standardisation is folded back into the
/// returned weights.
ProbeModel fit_linear_probe(const EmbeddingMatrix& features, std::span<const std::uint8_t> labels,
                            std::span<const std::size_t> rows, const ProbeHyperparams& hp,
                            std::string class_id = {});

struct ProbeFit {
  ProbeModel model;
  Split split;
  double heldout_accuracy = 0.0;
};

/// Splits with hp.seed, trains on the training rows, scores the heldout rows.
ProbeFit train_probe(const EmbeddingMatrix& features, std::span<const std::uint8_t> labels,
                     const ProbeHyperparams& hp, std::string class_id = {});

/// Fraction of rows where (score >= 0) equals the label; a score of exactly
/// 0 predicts the positive class. Empty `rows` means all rows.
double probe_accuracy(const ProbeModel& model, const EmbeddingMatrix& features, std::span<const std::uint8_t> labels,
                      std::span<const std::size_t> rows = {});

struct Trajectory {
  std::string model;
  std::string class_id;
  std::vector<double> accuracies;   // heldout accuracy per layer
  std::optional<double> roughness;  // needs at least 3 layers
};

/// Population std of consecutive accuracy differences (>= 3 values).
double roughness(std::span<const double> accuracies);

/// One binary probe per layer on a single shared split drawn from hp.seed.
Trajectory class_trajectory(std::span<const EmbeddingMatrix> layers, std::span<const std::uint8_t> labels,
                            const ProbeHyperparams& hp, std::string class_id);
Trajectory class_trajectory(const Manifest& manifest, const std::string& model, std::span<const std::uint8_t> labels,
                            const ProbeHyperparams& hp, std::string class_id);

/// One-vs-rest probes per layer; prediction is the arg-max score with ties
/// going to the lower class index. `labels[i]` indexes into the class list.
std::vector<double> multiclass_trajectory(std::span<const EmbeddingMatrix> layers, std::span<const std::size_t> labels,
                                          std::size_t n_classes, const ProbeHyperparams& hp);
std::vector<double> multiclass_trajectory(const Manifest& manifest, const std::string& model,
                                          std::span<const std::size_t> labels, std::size_t n_classes,
                                          const ProbeHyperparams& hp);

struct RoughnessDistribution {
  static constexpr double kBinWidth = 0.02;
  static constexpr std::size_t kBins = 30;  // [0, 0.6]

  std::map<std::string, std::vector<double>> per_model;
  std::map<std::string, std::vector<std::size_t>> per_model_histogram;
  std::vector<std::size_t> histogram;
  std::size_t above_range = 0;
};

RoughnessDistribution roughness_distribution(std::span<const Trajectory> trajectories);

/// Bin of a roughness value, or kBins when it lies above 0.6.
std::size_t roughness_bin(double value);

}  // namespace repdyn
