#include "repdyn/lowlevel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>

#include "repdyn/error.hpp"
#include "repdyn/rng.hpp"

namespace repdyn {

namespace {

// Sobel responses of 8-bit data are bounded by 4 * 255 per axis.
const double kSobelMagnitudeScale = 1020.0 * std::numbers::sqrt2;

struct PnmCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::size_t number() {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw DataError("malformed PNM header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (std::size_t{1} << 32)) throw DataError("PNM dimension too large");
      ++pos;
    }
    return v;
  }
};

// 3x3 Sobel at interior pixel (x, y) of a width-w plane.
inline void sobel_at(const std::vector<double>& p, std::size_t w, std::size_t x, std::size_t y, double& gx,
                     double& gy) {
  auto v = [&](std::size_t xx, std::size_t yy) { return p[yy * w + xx]; };
  gx = (v(x + 1, y - 1) + 2.0 * v(x + 1, y) + v(x + 1, y + 1)) - (v(x - 1, y - 1) + 2.0 * v(x - 1, y) + v(x - 1, y + 1));
  gy = (v(x - 1, y + 1) + 2.0 * v(x, y + 1) + v(x + 1, y + 1)) - (v(x - 1, y - 1) + 2.0 * v(x, y - 1) + v(x + 1, y - 1));
}

std::vector<double> gaussian_blur(const std::vector<double>& src, std::size_t w, std::size_t h, double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double g = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = g;
    total += g;
  }
  for (double& g : kernel) g /= total;

  auto clamp = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  std::vector<double> tmp(src.size()), out(src.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * src[y * w + clamp(static_cast<std::ptrdiff_t>(x) + i, w)];
      tmp[y * w + x] = acc;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[clamp(static_cast<std::ptrdiff_t>(y) + i, h) * w + x];
      out[y * w + x] = acc;
    }
  return out;
}

}  // namespace

void ImageRaster::validate() const {
  if (channels != 1 && channels != 3) throw UsageError("image must have 1 or 3 channels");
  if (width < 3 || height < 3) throw UsageError("image must be at least 3x3");
  if (samples.size() != width * height * channels) throw UsageError("image sample count does not match its shape");
}

void CannyParams::validate() const {
  if (!(gaussian_sigma > 0.0)) throw UsageError("Canny sigma must be positive");
  if (!(low_threshold > 0.0 && low_threshold < high_threshold))
    throw UsageError("Canny thresholds must satisfy 0 < low < high");
}

ImageRaster decode_image_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw DataError("unsupported image format (expected binary PPM P6 or PGM P5)");
  PnmCursor cur{bytes, 2};
  ImageRaster img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  img.width = cur.number();
  img.height = cur.number();
  const std::size_t maxval = cur.number();
  if (maxval != 255) throw DataError("unsupported PNM maxval " + std::to_string(maxval) + " (expected 255)");
  if (cur.pos >= bytes.size() || !std::isspace(bytes[cur.pos])) throw DataError("malformed PNM header");
  ++cur.pos;
  const std::size_t need = img.width * img.height * img.channels;
  if (bytes.size() - cur.pos < need) throw DataError("truncated PNM payload");
  img.samples.assign(bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos + need));
  try {
    img.validate();
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  return img;
}

ImageRaster decode_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image_bytes(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void encode_image(const ImageRaster& image, const std::filesystem::path& path) {
  image.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.samples.data()), static_cast<std::streamsize>(image.samples.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<double> luminance(const ImageRaster& image) {
  image.validate();
  const std::size_t n = image.width * image.height;
  std::vector<double> out(n);
  if (image.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = image.samples[i];
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned r = image.samples[3 * i], g = image.samples[3 * i + 1], b = image.samples[3 * i + 2];
    out[i] = static_cast<double>(299 * r + 587 * g + 114 * b) / 1000.0;
  }
  return out;
}

std::vector<std::uint8_t> canny_edges(const ImageRaster& image, const CannyParams& params) {
  params.validate();
  const std::size_t w = image.width, h = image.height;
  const std::vector<double> blurred = gaussian_blur(luminance(image), w, h, params.gaussian_sigma);

  std::vector<double> mag(w * h, 0.0);
  std::vector<std::uint8_t> dir(w * h, 0);  // 0: 0deg, 1: 45deg, 2: 90deg, 3: 135deg
  for (std::size_t y = 1; y + 1 < h; ++y)
    for (std::size_t x = 1; x + 1 < w; ++x) {
      double gx, gy;
      sobel_at(blurred, w, x, y, gx, gy);
      mag[y * w + x] = std::sqrt(gx * gx + gy * gy) / kSobelMagnitudeScale;
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      std::uint8_t d = 0;
      if (angle >= 22.5 && angle < 67.5)
        d = 1;
      else if (angle >= 67.5 && angle < 112.5)
        d = 2;
      else if (angle >= 112.5 && angle < 157.5)
        d = 3;
      dir[y * w + x] = d;
    }

  // Non-maximum suppression along the quantized gradient direction (y grows downward).
  std::vector<double> thin(w * h, 0.0);
  for (std::size_t y = 1; y + 1 < h; ++y)
    for (std::size_t x = 1; x + 1 < w; ++x) {
      const double m = mag[y * w + x];
      if (m <= 0.0) continue;
      double n1 = 0, n2 = 0;
      switch (dir[y * w + x]) {
        case 0: n1 = mag[y * w + x - 1]; n2 = mag[y * w + x + 1]; break;
        case 1: n1 = mag[(y - 1) * w + x - 1]; n2 = mag[(y + 1) * w + x + 1]; break;
        case 2: n1 = mag[(y - 1) * w + x]; n2 = mag[(y + 1) * w + x]; break;
        default: n1 = mag[(y - 1) * w + x + 1]; n2 = mag[(y + 1) * w + x - 1]; break;
      }
      if (m >= n1 && m >= n2) thin[y * w + x] = m;
    }

  // Double threshold, then hysteresis over 8-connected weak pixels.
  std::vector<std::uint8_t> edges(w * h, 0);
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < w * h; ++i) {
    if (thin[i] >= params.high_threshold) {
      edges[i] = 1;
      frontier.push_back(i);
    }
  }
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop_front();
    const std::size_t x = i % w, y = i / w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const auto nx = static_cast<std::ptrdiff_t>(x) + dx, ny = static_cast<std::ptrdiff_t>(y) + dy;
        if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w) || ny >= static_cast<std::ptrdiff_t>(h)) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
        if (!edges[j] && thin[j] >= params.low_threshold) {
          edges[j] = 1;
          frontier.push_back(j);
        }
      }
  }
  return edges;
}

double edge_density(const ImageRaster& image, const CannyParams& params) {
  const auto edges = canny_edges(image, params);
  std::size_t count = 0;
  for (auto e : edges) count += e;
  return static_cast<double>(count) / static_cast<double>(image.width * image.height);
}

double color_warmth(const ImageRaster& image) {
  image.validate();
  if (image.channels != 3) throw UsageError("color warmth needs an RGB image");
  const std::size_t n = image.width * image.height;
  std::int64_t red = 0, blue = 0;
  for (std::size_t i = 0; i < n; ++i) {
    red += image.samples[3 * i];
    blue += image.samples[3 * i + 2];
  }
  return static_cast<double>(red - blue) / static_cast<double>(n);
}

double texture_complexity(const ImageRaster& image) {
  const std::vector<double> lum = luminance(image);
  const std::size_t w = image.width, h = image.height;
  std::vector<double> mags;
  mags.reserve((w - 2) * (h - 2));
  for (std::size_t y = 1; y + 1 < h; ++y)
    for (std::size_t x = 1; x + 1 < w; ++x) {
      double gx, gy;
      sobel_at(lum, w, x, y, gx, gy);
      mags.push_back(std::sqrt(gx * gx + gy * gy));
    }
  double sum = 0.0;
  for (double m : mags) sum += m;
  const double mu = sum / static_cast<double>(mags.size());
  double ss = 0.0;
  for (double m : mags) ss += (m - mu) * (m - mu);
  return std::sqrt(ss / static_cast<double>(mags.size()));
}

LowLevelProfile low_level_profile(const ImageRaster& image, const CannyParams& params) {
  LowLevelProfile p;
  p.edge_density = edge_density(image, params);
  p.warmth = image.channels == 3 ? color_warmth(image) : 0.0;
  p.texture = texture_complexity(image);
  return p;
}

std::string_view to_string(Property p) {
  switch (p) {
    case Property::edges: return "edges";
    case Property::warmth: return "warmth";
    default: return "texture";
  }
}

std::string_view to_string(Level l) {
  switch (l) {
    case Level::low: return "low";
    case Level::mid: return "mid";
    default: return "high";
  }
}

Property parse_property(std::string_view name) {
  if (name == "edges" || name == "edge_density") return Property::edges;
  if (name == "warmth" || name == "color_warmth") return Property::warmth;
  if (name == "texture" || name == "texture_complexity") return Property::texture;
  throw UsageError("unknown property \"" + std::string(name) + "\"");
}

std::array<CategoryAssignment, 3> discretize(const std::map<std::string, double>& values, Property property,
                                             std::size_t group_size) {
  if (group_size == 0) throw UsageError("group size must be positive");
  const std::size_t n = values.size();
  if (n < 3 * group_size)
    throw UsageError("discretizing " + std::string(to_string(property)) + " needs at least " +
                     std::to_string(3 * group_size) + " values, got " + std::to_string(n));
  std::vector<std::pair<double, std::string>> sorted;
  sorted.reserve(n);
  for (const auto& [id, v] : values) {
    if (!std::isfinite(v)) throw DataError("non-finite property value for " + id);
    sorted.emplace_back(v, id);
  }
  std::sort(sorted.begin(), sorted.end());

  auto take = [&](Level level, std::size_t start) {
    CategoryAssignment a{property, level, {}};
    for (std::size_t i = start; i < start + group_size; ++i) a.members.push_back(sorted[i].second);
    std::sort(a.members.begin(), a.members.end());
    return a;
  };
  return {take(Level::low, 0), take(Level::mid, (n - group_size) / 2), take(Level::high, n - group_size)};
}

std::uint16_t category_bit(Property p, Level l) {
  return static_cast<std::uint16_t>(1u << (3 * static_cast<unsigned>(p) + static_cast<unsigned>(l)));
}

CategoryMask property_filter(Property p) {
  return static_cast<CategoryMask>(category_bit(p, Level::low) | category_bit(p, Level::mid) |
                                   category_bit(p, Level::high));
}

std::vector<CategoryMask> category_masks(std::span<const std::string> ids,
                                         std::span<const CategoryAssignment> assignments) {
  std::map<std::string, CategoryMask> by_id;
  for (const auto& a : assignments)
    for (const auto& id : a.members) by_id[id] |= category_bit(a.property, a.level);
  std::vector<CategoryMask> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    out.push_back(it == by_id.end() ? CategoryMask{0} : it->second);
  }
  return out;
}

std::vector<std::string> categorized_ids(std::span<const CategoryAssignment> assignments) {
  std::set<std::string> ids;
  for (const auto& a : assignments) ids.insert(a.members.begin(), a.members.end());
  return {ids.begin(), ids.end()};
}

namespace {

double share_for_layer(const EmbeddingMatrix& layer, std::span<const CategoryMask> masks, std::size_t k,
                       Metric metric, CategoryMask filter) {
  const auto neighbors = k_nearest_all(layer, k, metric);
  std::uint64_t hits = 0, queries = 0;
  for (std::size_t q = 0; q < masks.size(); ++q) {
    const CategoryMask mq = masks[q] & filter;
    if (mq == 0) continue;
    ++queries;
    for (const auto& nb : neighbors[q]) hits += (masks[nb.index] & mq) != 0;
  }
  if (queries == 0) throw UsageError("no categorized queries for this filter");
  return static_cast<double>(hits) / static_cast<double>(queries * k);
}

}  // namespace

std::vector<double> category_share(std::span<const EmbeddingMatrix> layers, std::span<const CategoryMask> masks,
                                   std::size_t k, Metric metric, CategoryMask filter) {
  std::vector<double> out;
  for (const auto& layer : layers) {
    if (layer.n_points() != masks.size())
      throw UsageError("layer has " + std::to_string(layer.n_points()) + " rows but " + std::to_string(masks.size()) +
                       " categorized images");
    check_neighborhood(k, layer.n_points());
    out.push_back(share_for_layer(layer, masks, k, metric, filter));
  }
  return out;
}

std::vector<double> per_property_share(std::span<const EmbeddingMatrix> layers, std::span<const CategoryMask> masks,
                                       Property property, std::size_t k, Metric metric) {
  return category_share(layers, masks, k, metric, property_filter(property));
}

double analytic_baseline(std::span<const CategoryMask> masks, CategoryMask filter) {
  if (masks.size() < 2) throw UsageError("baseline needs at least 2 images");
  double total = 0.0;
  std::size_t queries = 0;
  for (std::size_t q = 0; q < masks.size(); ++q) {
    const CategoryMask mq = masks[q] & filter;
    if (mq == 0) continue;
    std::size_t mates = 0;
    for (std::size_t j = 0; j < masks.size(); ++j) mates += j != q && (masks[j] & mq) != 0;
    total += static_cast<double>(mates) / static_cast<double>(masks.size() - 1);
    ++queries;
  }
  if (queries == 0) throw UsageError("no categorized queries for this filter");
  return total / static_cast<double>(queries);
}

double random_baseline(std::span<const CategoryMask> masks, const BaselineOptions& options) {
  if (options.trials < 1) throw UsageError("random baseline needs at least one trial");
  if (options.dim < 1) throw UsageError("random baseline needs dim >= 1");
  const std::size_t n = masks.size();
  check_neighborhood(options.k, n);
  double total = 0.0;
  for (std::size_t t = 0; t < options.trials; ++t) {
    Rng rng(derive_seed(options.seed, {t}));
    std::vector<float> pts(n * options.dim);
    for (float& v : pts) v = static_cast<float>(rng.uniform());
    EmbeddingMatrix m(n, options.dim, std::move(pts));
    total += share_for_layer(m, masks, options.k, Metric::euclidean, options.filter);
  }
  return total / static_cast<double>(options.trials);
}

}  // namespace repdyn
