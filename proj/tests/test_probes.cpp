#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "repdyn/error.hpp"
#include "repdyn/probes.hpp"
#include "repdyn/rng.hpp"

using namespace repdyn;

namespace {

struct Data {
  EmbeddingMatrix x;
  std::vector<std::uint8_t> y;
};

Data separated(std::size_t n, std::size_t d, double shift, std::uint64_t seed, double positive_share = 0.5) {
  Rng rng(seed);
  std::vector<float> v(n * d);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < positive_share;
    for (std::size_t j = 0; j < d; ++j) v[i * d + j] = static_cast<float>(rng.normal() + (j == 0 ? (y[i] ? shift : -shift) : 0.0));
  }
  return {EmbeddingMatrix(n, d, std::move(v)), std::move(y)};
}

// Plain gradient descent on z-scored features, written independently.
std::pair<std::vector<double>, double> reference_fit(const Data& data, const std::vector<std::size_t>& rows,
                                                     const ProbeHyperparams& hp) {
  const std::size_t d = data.x.dim();
  const double n = double(rows.size());
  std::vector<double> mu(d, 0), sd(d, 0);
  for (auto r : rows)
    for (std::size_t j = 0; j < d; ++j) mu[j] += data.x.row(r)[j] / n;
  for (auto r : rows)
    for (std::size_t j = 0; j < d; ++j) sd[j] += std::pow(data.x.row(r)[j] - mu[j], 2) / n;
  for (auto& s : sd) s = std::sqrt(s);
  std::vector<double> w(d, 0);
  double b = 0;
  for (std::size_t e = 0; e < hp.epochs; ++e) {
    std::vector<double> g(d, 0);
    double gb = 0;
    for (auto r : rows) {
      double s = b;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * (data.x.row(r)[j] - mu[j]) / sd[j];
      const double err = 1 / (1 + std::exp(-s)) - data.y[r];
      for (std::size_t j = 0; j < d; ++j) g[j] += err * (data.x.row(r)[j] - mu[j]) / sd[j];
      gb += err;
    }
    for (std::size_t j = 0; j < d; ++j) w[j] -= hp.learning_rate * (g[j] / n + hp.l2_penalty * w[j]);
    b -= hp.learning_rate * gb / n;
  }
  for (std::size_t j = 0; j < d; ++j) {
    w[j] /= sd[j];
    b -= w[j] * mu[j];
  }
  return {w, b};
}

}  // namespace

TEST_CASE("split sizes and determinism") {
  const auto s = make_split(1000, 0.1, 3);
  CHECK(s.heldout.size() == 100);
  CHECK(s.train.size() == 900);
  CHECK(make_split(1000, 0.1, 3).heldout == s.heldout);
  CHECK(make_split(1000, 0.1, 4).heldout != s.heldout);
  CHECK(make_split(2, 0.01, 1).heldout.size() == 1);
  CHECK(make_split(2, 0.99, 1).train.size() == 1);
  CHECK(make_split(25, 0.1, 1).heldout.size() == 3);  // round(2.5) away from zero
  CHECK_THROWS_AS(make_split(10, 1.0, 1), UsageError);
}

TEST_CASE("fit agrees with an independent gradient descent") {
  const auto data = separated(200, 4, 1.0, 5);
  ProbeHyperparams hp;
  hp.epochs = 60;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 200; i += 2) rows.push_back(i);
  const auto model = fit_linear_probe(data.x, data.y, rows, hp);
  const auto [w, b] = reference_fit(data, rows, hp);
  for (std::size_t j = 0; j < 4; ++j) CHECK(model.weights[j] == doctest::Approx(w[j]).epsilon(1e-9));
  CHECK(model.bias == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("separable data and zero training") {
  const auto data = separated(400, 5, 4.0, 1);
  ProbeHyperparams hp;
  const auto fit = train_probe(data.x, data.y, hp);
  CHECK(fit.heldout_accuracy >= 0.99);
  CHECK(probe_accuracy(fit.model, data.x, data.y) >= 0.99);
  const auto again = train_probe(data.x, data.y, hp);
  CHECK(again.model == fit.model);

  hp.epochs = 0;
  const auto untrained = train_probe(data.x, data.y, hp);
  std::size_t pos = 0;
  for (auto r : untrained.split.heldout) pos += data.y[r];
  CHECK(untrained.heldout_accuracy == double(pos) / double(untrained.split.heldout.size()));
}

TEST_CASE("probe error cases") {
  const auto data = separated(50, 3, 1.0, 2);
  std::vector<std::uint8_t> ones(50, 1);
  CHECK_THROWS_AS(train_probe(data.x, ones, {}), UsageError);
  std::vector<std::uint8_t> short_labels(10, 1);
  CHECK_THROWS_AS(train_probe(data.x, short_labels, {}), UsageError);
  ProbeHyperparams bad;
  bad.learning_rate = 0;
  CHECK_THROWS_AS(train_probe(data.x, data.y, bad), UsageError);
  ProbeModel m;
  m.weights = {1, 2};
  CHECK_THROWS_AS(probe_accuracy(m, data.x, data.y), UsageError);
}

TEST_CASE("trajectories and roughness") {
  std::vector<EmbeddingMatrix> layers;
  std::vector<std::uint8_t> y;
  for (double shift : {0.0, 1.0, 3.0}) {
    auto d = separated(300, 3, shift, 8);
    layers.push_back(std::move(d.x));
    y = d.y;  // same seed: same labels every layer
  }
  const auto t = class_trajectory(layers, y, {}, "pos");
  REQUIRE(t.accuracies.size() == 3);
  CHECK(t.accuracies[2] > t.accuracies[0]);
  REQUIRE(t.roughness.has_value());
  CHECK(*t.roughness == roughness(t.accuracies));

  std::vector<std::size_t> multi(300);
  for (std::size_t i = 0; i < 300; ++i) multi[i] = y[i] + 2 * (i % 2);
  const auto acc = multiclass_trajectory(layers, multi, 4, {});
  CHECK(acc.size() == 3);
  CHECK(acc[2] > acc[0]);
  std::vector<std::size_t> single(300, 1);
  CHECK_THROWS_AS(multiclass_trajectory(layers, single, 3, {}), UsageError);
}

TEST_CASE("roughness histogram") {
  CHECK(roughness_bin(0.0) == 0);
  CHECK(roughness_bin(0.019) == 0);
  CHECK(roughness_bin(0.02) == 1);
  CHECK(roughness_bin(0.1) == 5);
  CHECK(roughness_bin(0.6) == 29);
  CHECK(roughness_bin(0.61) == RoughnessDistribution::kBins);
  CHECK_THROWS_AS(roughness_bin(-0.1), UsageError);

  std::vector<Trajectory> ts;
  for (double r : {0.01, 0.03, 0.035, 0.7}) {
    Trajectory t;
    t.model = r < 0.02 ? "m1" : "m2";
    t.roughness = r;
    ts.push_back(t);
  }
  const auto d = roughness_distribution(ts);
  CHECK(d.histogram[0] == 1);
  CHECK(d.histogram[1] == 2);
  CHECK(d.above_range == 1);
  CHECK(d.per_model.at("m2").size() == 3);
  CHECK(d.per_model_histogram.at("m1")[0] == 1);
  ts.push_back(Trajectory{});
  CHECK_THROWS_AS(roughness_distribution(ts), UsageError);
}
