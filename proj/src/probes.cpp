#include "repdyn/probes.hpp"

#include <algorithm>
#include <cmath>

#include "repdyn/error.hpp"
#include "repdyn/rng.hpp"
#include "repdyn/stats.hpp"

namespace repdyn {

namespace {

constexpr std::uint64_t kSplitTag = 0x73706c6974;  // "split"

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_labels(const EmbeddingMatrix& features, std::size_t n_labels) {
  if (n_labels != features.n_points())
    throw UsageError("got " + std::to_string(n_labels) + " labels for " + std::to_string(features.n_points()) +
                     " points");
}

std::size_t argmax_score(std::span<const ProbeModel> probes, std::span<const float> x) {
  std::size_t best = 0;
  double best_score = probes[0].score(x);
  for (std::size_t c = 1; c < probes.size(); ++c) {
    const double s = probes[c].score(x);
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  }
  return best;
}

}  // namespace

void ProbeHyperparams::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (!(l2_penalty >= 0.0)) throw UsageError("l2 penalty must be non-negative");
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) throw UsageError("heldout fraction must be in (0, 1)");
}

double ProbeModel::score(std::span<const float> x) const {
  if (x.size() != weights.size())
    throw UsageError("feature dimension " + std::to_string(x.size()) + " does not match probe dimension " +
                     std::to_string(weights.size()));
  double s = bias;
  for (std::size_t j = 0; j < x.size(); ++j) s += weights[j] * static_cast<double>(x[j]);
  return s;
}

Split make_split(std::size_t n, double heldout_fraction, std::uint64_t seed) {
  if (n < 2) throw UsageError("split needs at least 2 rows");
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) throw UsageError("heldout fraction must be in (0, 1)");
  auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * heldout_fraction));
  m = std::clamp<std::size_t>(m, 1, n - 1);
  const auto perm = random_permutation(n, derive_seed(seed, {kSplitTag}));
  Split s;
  s.heldout.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(m), perm.end());
  std::sort(s.heldout.begin(), s.heldout.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

ProbeModel fit_linear_probe(const EmbeddingMatrix& features, std::span<const std::uint8_t> labels,
                            std::span<const std::size_t> rows, const ProbeHyperparams& hp, std::string class_id) {
  hp.validate();
  check_labels(features, labels.size());
  if (rows.empty()) throw UsageError("no training rows");
  std::size_t positives = 0;
  for (std::size_t r : rows) positives += labels[r] != 0;
  if (positives == 0 || positives == rows.size())
    throw UsageError("single-class training data" + (class_id.empty() ? std::string{} : " for class \"" + class_id + "\""));

  const std::size_t n = rows.size();
  const std::size_t d = features.dim();

  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (std::size_t r : rows) {
    auto x = features.row(r);
    for (std::size_t j = 0; j < d; ++j) mu[j] += x[j];
  }
  for (double& m : mu) m /= static_cast<double>(n);
  for (std::size_t r : rows) {
    auto x = features.row(r);
    for (std::size_t j = 0; j < d; ++j) sd[j] += (x[j] - mu[j]) * (x[j] - mu[j]);
  }
  for (double& s : sd) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s == 0.0) s = 1.0;  // constant feature: centre only
  }

  std::vector<double> z(n * d);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = features.row(rows[i]);
    for (std::size_t j = 0; j < d; ++j) z[i * d + j] = (x[j] - mu[j]) / sd[j];
    y[i] = labels[rows[i]] != 0 ? 1.0 : 0.0;
  }

  std::vector<double> w(d, 0.0), grad(d);
  double b = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* zi = &z[i * d];
      double s = b;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * zi[j];
      const double err = sigmoid(s) - y[i];
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * zi[j];
      grad_b += err;
    }
    for (std::size_t j = 0; j < d; ++j) w[j] -= hp.learning_rate * (grad[j] * inv_n + hp.l2_penalty * w[j]);
    b -= hp.learning_rate * grad_b * inv_n;
  }

  ProbeModel model;
  model.class_id = std::move(class_id);
  model.weights.resize(d);
  model.bias = b;
  for (std::size_t j = 0; j < d; ++j) {
    model.weights[j] = w[j] / sd[j];
    model.bias -= model.weights[j] * mu[j];
  }
  for (double v : model.weights)
    if (!std::isfinite(v)) throw DataError("probe training diverged (non-finite weights)");
  if (!std::isfinite(model.bias)) throw DataError("probe training diverged (non-finite bias)");
  return model;
}

ProbeFit train_probe(const EmbeddingMatrix& features, std::span<const std::uint8_t> labels,
                     const ProbeHyperparams& hp, std::string class_id) {
  hp.validate();
  check_labels(features, labels.size());
  ProbeFit fit;
  fit.split = make_split(features.n_points(), hp.heldout_fraction, hp.seed);
  fit.model = fit_linear_probe(features, labels, fit.split.train, hp, std::move(class_id));
  fit.heldout_accuracy = probe_accuracy(fit.model, features, labels, fit.split.heldout);
  return fit;
}

double probe_accuracy(const ProbeModel& model, const EmbeddingMatrix& features, std::span<const std::uint8_t> labels,
                      std::span<const std::size_t> rows) {
  check_labels(features, labels.size());
  if (features.dim() != model.weights.size()) throw UsageError("probe dimension does not match features");
  std::size_t correct = 0, total = 0;
  auto visit = [&](std::size_t r) {
    const bool predicted = model.score(features.row(r)) >= 0.0;
    correct += predicted == (labels[r] != 0);
    ++total;
  };
  if (rows.empty()) {
    for (std::size_t r = 0; r < features.n_points(); ++r) visit(r);
  } else {
    for (std::size_t r : rows) visit(r);
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

double roughness(std::span<const double> accuracies) { return consecutive_difference_std(accuracies); }

Trajectory class_trajectory(std::span<const EmbeddingMatrix> layers, std::span<const std::uint8_t> labels,
                            const ProbeHyperparams& hp, std::string class_id) {
  if (layers.empty()) throw UsageError("no layers given");
  hp.validate();
  const std::size_t n = layers.front().n_points();
  for (const auto& l : layers)
    if (l.n_points() != n) throw UsageError("layers disagree on point count");
  const Split split = make_split(n, hp.heldout_fraction, hp.seed);

  Trajectory t;
  t.model = layers.front().layer().model_name;
  t.class_id = class_id;
  t.accuracies.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const ProbeModel m = fit_linear_probe(layers[l], labels, split.train, hp, class_id);
    t.accuracies[l] = probe_accuracy(m, layers[l], labels, split.heldout);
  }
  if (t.accuracies.size() >= 3) t.roughness = roughness(t.accuracies);
  return t;
}

Trajectory class_trajectory(const Manifest& manifest, const std::string& model, std::span<const std::uint8_t> labels,
                            const ProbeHyperparams& hp, std::string class_id) {
  const auto mls = manifest.layers_of(model);
  if (mls.empty()) throw UsageError("unknown model \"" + model + "\"");
  std::vector<EmbeddingMatrix> layers;
  for (const auto* ml : mls) layers.push_back(manifest.load(*ml));
  return class_trajectory(layers, labels, hp, std::move(class_id));
}

std::vector<double> multiclass_trajectory(std::span<const EmbeddingMatrix> layers, std::span<const std::size_t> labels,
                                          std::size_t n_classes, const ProbeHyperparams& hp) {
  if (layers.empty()) throw UsageError("no layers given");
  hp.validate();
  const std::size_t n = layers.front().n_points();
  if (labels.size() != n) throw UsageError("label count does not match point count");
  std::vector<std::size_t> present(n_classes, 0);
  for (std::size_t c : labels) {
    if (c >= n_classes) throw UsageError("class index out of range");
    ++present[c];
  }
  if (std::count_if(present.begin(), present.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw UsageError("multiclass probing needs at least 2 classes present");

  const Split split = make_split(n, hp.heldout_fraction, hp.seed);
  std::vector<double> out;
  std::vector<std::uint8_t> binary(n);
  for (const auto& layer : layers) {
    if (layer.n_points() != n) throw UsageError("layers disagree on point count");
    std::vector<ProbeModel> probes;
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t i = 0; i < n; ++i) binary[i] = labels[i] == c;
      probes.push_back(fit_linear_probe(layer, binary, split.train, hp, std::to_string(c)));
    }
    std::size_t correct = 0;
    for (std::size_t r : split.heldout) correct += argmax_score(probes, layer.row(r)) == labels[r];
    out.push_back(static_cast<double>(correct) / static_cast<double>(split.heldout.size()));
  }
  return out;
}

std::vector<double> multiclass_trajectory(const Manifest& manifest, const std::string& model,
                                          std::span<const std::size_t> labels, std::size_t n_classes,
                                          const ProbeHyperparams& hp) {
  const auto mls = manifest.layers_of(model);
  if (mls.empty()) throw UsageError("unknown model \"" + model + "\"");
  std::vector<EmbeddingMatrix> layers;
  for (const auto* ml : mls) layers.push_back(manifest.load(*ml));
  return multiclass_trajectory(layers, labels, n_classes, hp);
}

std::size_t roughness_bin(double value) {
  if (value < 0.0) throw UsageError("roughness must be non-negative");
  if (value > RoughnessDistribution::kBinWidth * RoughnessDistribution::kBins) return RoughnessDistribution::kBins;
  const auto bin = static_cast<std::size_t>(std::floor(value * 50.0));
  return std::min(bin, RoughnessDistribution::kBins - 1);
}

RoughnessDistribution roughness_distribution(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw UsageError("no trajectories given");
  RoughnessDistribution d;
  d.histogram.assign(RoughnessDistribution::kBins, 0);
  for (const auto& t : trajectories) {
    if (!t.roughness) throw UsageError("trajectory for class \"" + t.class_id + "\" has no roughness (< 3 layers)");
    const double r = *t.roughness;
    d.per_model[t.model].push_back(r);
    auto& hist = d.per_model_histogram[t.model];
    if (hist.empty()) hist.assign(RoughnessDistribution::kBins, 0);
    const std::size_t bin = roughness_bin(r);
    if (bin == RoughnessDistribution::kBins) {
      ++d.above_range;
      continue;
    }
    ++d.histogram[bin];
    ++hist[bin];
  }
  return d;
}

}  // namespace repdyn
