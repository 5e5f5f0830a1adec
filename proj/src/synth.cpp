#include "repdyn/synth.hpp"

#include <algorithm>
#include <cmath>

#include "repdyn/error.hpp"
#include "repdyn/rng.hpp"

namespace repdyn {

namespace {

constexpr std::size_t kOneHot = 4;
constexpr std::size_t kTwoProcessDim = 3 * kOneHot;

void put_one_hot(std::vector<float>& out, std::size_t row, std::size_t offset, std::size_t hot, float scale) {
  out[row * kTwoProcessDim + offset + hot] = scale;
}

}  // namespace

ClusterData gen_gaussian_clusters(std::size_t n, std::size_t dim, std::size_t n_clusters, double separation,
                                  std::uint64_t seed) {
  if (n < 2 || dim < 1 || n_clusters < 1) throw UsageError("invalid cluster generator sizes");
  if (!(separation >= 0.0)) throw UsageError("separation must be non-negative");
  Rng rng(seed);
  std::vector<double> centres(n_clusters * dim, 0.0);
  for (std::size_t c = 0; c < n_clusters; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      centres[c * dim + j] = rng.normal();
      norm += centres[c * dim + j] * centres[c * dim + j];
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < dim; ++j) centres[c * dim + j] = norm > 0 ? separation * centres[c * dim + j] / norm : 0;
  }
  std::vector<float> values(n * dim);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % n_clusters;
    for (std::size_t j = 0; j < dim; ++j)
      values[i * dim + j] = static_cast<float>(centres[labels[i] * dim + j] + rng.normal());
  }
  return {EmbeddingMatrix(n, dim, std::move(values), {"clusters", 0, 1}), std::move(labels)};
}

TwoProcessStacks gen_two_process(std::size_t n, std::uint64_t seed) {
  if (n < 100) throw UsageError("two-process generator needs n >= 100");
  Rng rng(seed);
  std::vector<std::size_t> shape(n), color(n);
  std::vector<double> nuisance(n * kOneHot);
  for (std::size_t i = 0; i < n; ++i) {
    shape[i] = rng.below(4);
    color[i] = rng.below(4);
    for (std::size_t j = 0; j < kOneHot; ++j) nuisance[i * kOneHot + j] = rng.normal();
  }

  auto layer = [&](float shape_scale, float color_scale, double nuisance_scale, double jitter) {
    std::vector<float> v(n * kTwoProcessDim, 0.0f);
    for (std::size_t i = 0; i < n; ++i) {
      put_one_hot(v, i, 0, shape[i], shape_scale);
      put_one_hot(v, i, kOneHot, color[i], color_scale);
      for (std::size_t j = 0; j < kOneHot; ++j) {
        double x = nuisance_scale * nuisance[i * kOneHot + j];
        if (jitter > 0) x += jitter * rng.normal();
        v[i * kTwoProcessDim + 2 * kOneHot + j] = static_cast<float>(x);
      }
    }
    return v;
  };

  auto make = [&](std::vector<float> v, const char* model, std::size_t idx) {
    return EmbeddingMatrix(n, kTwoProcessDim, std::move(v), {model, idx, 3});
  };

  std::vector<float> a1 = layer(4, 0, 1.0, 0.3);
  std::vector<float> a2 = layer(4, 2, 1.0, 0.3);
  std::vector<float> b1 = layer(0, 4, 1.0, 0.3);
  std::vector<float> b2 = layer(2, 4, 1.0, 0.3);
  std::vector<float> last = layer(4, 4, 0.5, 0.0);

  return TwoProcessStacks{
      {make(std::move(a1), "A", 0), make(std::move(a2), "A", 1), make(last, "A", 2)},
      {make(std::move(b1), "B", 0), make(std::move(b2), "B", 1), make(last, "B", 2)},
      std::move(shape),
      std::move(color)};
}

EmbeddingMatrix gen_noisy_copy(const EmbeddingMatrix& base, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw UsageError("sigma must be non-negative");
  Rng rng(seed);
  std::vector<float> v(base.values().begin(), base.values().end());
  if (sigma > 0.0)
    for (float& x : v) x = static_cast<float>(x + sigma * rng.normal());
  return EmbeddingMatrix(base.n_points(), base.dim(), std::move(v), base.layer());
}

EmbeddingMatrix gen_shuffled_copy(const EmbeddingMatrix& base, std::uint64_t seed) {
  const auto perm = random_permutation(base.n_points(), seed);
  return base.select_rows(perm);
}

EmbeddingMatrix gen_gaussian(std::size_t n, std::size_t dim, std::uint64_t seed, LayerRef layer) {
  Rng rng(seed);
  std::vector<float> v(n * dim);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return EmbeddingMatrix(n, dim, std::move(v), std::move(layer));
}

std::vector<EmbeddingMatrix> gen_drift_stack(std::size_t n, std::size_t dim, std::size_t n_layers, double step,
                                             std::uint64_t seed, std::uint64_t walk_seed,
                                             const std::string& model_name) {
  if (n_layers < 1) throw UsageError("drift stack needs at least one layer");
  if (!(step >= 0.0)) throw UsageError("drift step must be non-negative");
  Rng base(seed);
  std::vector<double> current(n * dim);
  for (double& x : current) x = base.normal();
  Rng rng(walk_seed);
  std::vector<EmbeddingMatrix> out;
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (l > 0)
      for (double& x : current) x += step * rng.normal();
    std::vector<float> v(current.begin(), current.end());
    out.emplace_back(n, dim, std::move(v), LayerRef{model_name, l, n_layers});
  }
  return out;
}

ImageKind parse_image_kind(std::string_view name) {
  if (name == "constant") return ImageKind::constant;
  if (name == "step_edge") return ImageKind::step_edge;
  if (name == "stripes") return ImageKind::stripes;
  if (name == "noise") return ImageKind::noise;
  if (name == "solid_color") return ImageKind::solid_color;
  throw UsageError("unknown image kind \"" + std::string(name) + "\"");
}

ImageRaster gen_synthetic_image(ImageKind kind, std::size_t width, std::size_t height, const ImageParams& params,
                                std::uint64_t seed) {
  if (width < 3 || height < 3) throw UsageError("synthetic images must be at least 3x3");
  if (params.channels != 1 && params.channels != 3) throw UsageError("channels must be 1 or 3");
  ImageRaster img{width, height, params.channels, std::vector<std::uint8_t>(width * height * params.channels)};
  Rng rng(seed);
  const std::size_t step = params.step_column == 0 ? width / 2 : params.step_column;
  const std::size_t period = std::max<std::size_t>(2, params.stripe_period);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < params.channels; ++c) {
        std::uint8_t v = 0;
        switch (kind) {
          case ImageKind::constant: v = params.color[0]; break;
          case ImageKind::solid_color: v = params.color[params.channels == 3 ? c : 0]; break;
          case ImageKind::step_edge: v = x < step ? 0 : 255; break;
          case ImageKind::stripes: v = (x % period) < period / 2 ? 0 : 255; break;
          case ImageKind::noise: v = static_cast<std::uint8_t>(rng.below(256)); break;
        }
        img.samples[(y * width + x) * params.channels + c] = v;
      }
  return img;
}

}  // namespace repdyn
