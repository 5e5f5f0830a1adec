#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "repdyn/embstore.hpp"
#include "repdyn/knn.hpp"

namespace repdyn {

/// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct ImageRaster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> samples;

  void validate() const;
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return samples[(y * width + x) * channels + c];
  }
};

struct LowLevelProfile {
  double edge_density = 0.0;
  double warmth = 0.0;
  double texture = 0.0;
};

/// Canny thresholds apply to gradient magnitudes divided by 1020*sqrt(2), the
/// Sobel magnitude bound for 8-bit input.
struct CannyParams {
  double gaussian_sigma = 1.4;
  double low_threshold = 0.1;
  double high_threshold = 0.3;

  void validate() const;
};

/// Binary PPM (P6) or PGM (P5) with maxval 255.
ImageRaster decode_image(const std::filesystem::path& path);
ImageRaster decode_image_bytes(std::span<const std::uint8_t> bytes);
void encode_image(const ImageRaster& image, const std::filesystem::path& path);

/// (299 R + 587 G + 114 B) / 1000 per pixel; gray images pass through unchanged.
std::vector<double> luminance(const ImageRaster& image);

/// Per-pixel edge mask from the full Canny pipeline (row-major, width*height).
std::vector<std::uint8_t> canny_edges(const ImageRaster& image, const CannyParams& params = {});

/// Fraction of pixels marked as edges by canny_edges.
double edge_density(const ImageRaster& image, const CannyParams& params = {});

/// mean(R) - mean(B); RGB only.
double color_warmth(const ImageRaster& image);

/// Population std of the 3x3 Sobel gradient magnitude over interior pixels.
double texture_complexity(const ImageRaster& image);

LowLevelProfile low_level_profile(const ImageRaster& image, const CannyParams& params = {});

enum class Property { edges, warmth, texture };
enum class Level { low, mid, high };

inline constexpr std::array<Property, 3> kProperties = {Property::edges, Property::warmth, Property::texture};
inline constexpr std::array<Level, 3> kLevels = {Level::low, Level::mid, Level::high};

std::string_view to_string(Property p);
std::string_view to_string(Level l);
Property parse_property(std::string_view name);

struct CategoryAssignment {
  Property property;
  Level level;
  std::vector<std::string> members;  // sorted image ids
};

/// Sorts ascending (ties by image id) and takes the first, median-centred
/// (start floor((n - g) / 2)) and last `group_size` ids. Returns {low, mid, high}.
std::array<CategoryAssignment, 3> discretize(const std::map<std::string, double>& values, Property property,
                                             std::size_t group_size);

/// Bitmask over the (property, level) categories an image belongs to.
/// Bit index = 3 * property + level.
using CategoryMask = std::uint16_t;

std::uint16_t category_bit(Property p, Level l);

/// Masks of each id in `ids` under `assignments`.
std::vector<CategoryMask> category_masks(std::span<const std::string> ids,
                                         std::span<const CategoryAssignment> assignments);

/// Sorted union of all category members.
std::vector<std::string> categorized_ids(std::span<const CategoryAssignment> assignments);

/// For each layer: sum over images of (# of k nearest neighbours sharing at
/// least one category bit in `filter` with the query) / (n * k). Rows of every
/// layer correspond to `masks`; neighbours come from the same rows only.
std::vector<double> category_share(std::span<const EmbeddingMatrix> layers, std::span<const CategoryMask> masks,
                                   std::size_t k, Metric metric, CategoryMask filter = 0x1FF);

/// category_share restricted to the three levels of one property.
std::vector<double> per_property_share(std::span<const EmbeddingMatrix> layers, std::span<const CategoryMask> masks,
                                       Property property, std::size_t k, Metric metric);

CategoryMask property_filter(Property p);

/// Expected share under random placement: mean over images of the fraction of
/// the other images that share a category with it.
double analytic_baseline(std::span<const CategoryMask> masks, CategoryMask filter = 0x1FF);

struct BaselineOptions {
  std::size_t trials = 20;
  std::size_t k = kDefaultK;
  std::size_t dim = 8;
  std::uint64_t seed = 0;
  CategoryMask filter = 0x1FF;
};

/// Monte Carlo: category_share with embeddings replaced by uniform random
/// points in [0,1)^dim, averaged over trials.
double random_baseline(std::span<const CategoryMask> masks, const BaselineOptions& options);

}  // namespace repdyn
