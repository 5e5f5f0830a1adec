#include <cmath>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "repdyn/error.hpp"
#include "repdyn/lowlevel.hpp"
#include "repdyn/rng.hpp"
#include "repdyn/synth.hpp"

using namespace repdyn;
namespace fs = std::filesystem;

namespace {

ImageRaster blobs(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  ImageRaster img{w, h, 3, std::vector<std::uint8_t>(w * h * 3, 30)};
  for (int b = 0; b < 5; ++b) {
    const double cx = rng.uniform() * w, cy = rng.uniform() * h, r = 3 + rng.uniform() * 8;
    const auto col = static_cast<std::uint8_t>(rng.below(256));
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) < r * r)
          for (std::size_t c = 0; c < 3; ++c) img.samples[(y * w + x) * 3 + c] = static_cast<std::uint8_t>(col + 40 * c);
  }
  return img;
}

}  // namespace

TEST_CASE("constant images have no edges and no texture") {
  for (std::size_t ch : {1, 3}) {
    ImageParams p;
    p.channels = ch;
    p.color = {200, 17, 90};
    const auto img = gen_synthetic_image(ImageKind::solid_color, 32, 20, p, 0);
    CHECK(edge_density(img) == 0.0);
    CHECK(texture_complexity(img) == 0.0);
  }
}

TEST_CASE("warmth of pure colours") {
  ImageParams p;
  p.color = {255, 0, 0};
  CHECK(color_warmth(gen_synthetic_image(ImageKind::solid_color, 9, 9, p, 0)) == 255.0);
  p.color = {0, 0, 255};
  CHECK(color_warmth(gen_synthetic_image(ImageKind::solid_color, 9, 9, p, 0)) == -255.0);
  p.color = {10, 250, 10};
  CHECK(color_warmth(gen_synthetic_image(ImageKind::solid_color, 9, 9, p, 0)) == 0.0);
  p.channels = 1;
  const auto grayimg = gen_synthetic_image(ImageKind::constant, 9, 9, p, 0);
  CHECK_THROWS_AS(color_warmth(grayimg), UsageError);
  CHECK(low_level_profile(grayimg).warmth == 0.0);
}

TEST_CASE("luminance is exact on gray pixels") {
  ImageRaster img{3, 3, 3, {}};
  for (int i = 0; i < 9; ++i)
    for (int c = 0; c < 3; ++c) img.samples.push_back(static_cast<std::uint8_t>(i * 28));
  const auto lum = luminance(img);
  for (int i = 0; i < 9; ++i) CHECK(lum[i] == i * 28);
  ImageRaster rgb{3, 3, 3, std::vector<std::uint8_t>(27, 0)};
  rgb.samples[0] = 255;
  CHECK(luminance(rgb)[0] == 76.245);
}

TEST_CASE("step edge produces edges only at the boundary") {
  const auto img = gen_synthetic_image(ImageKind::step_edge, 64, 64, {}, 0);
  const auto e = canny_edges(img);
  std::size_t count = 0;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      if (e[y * 64 + x]) {
        ++count;
        CHECK(x >= 31);
        CHECK(x <= 32);
      }
  CHECK(count >= 62);
}

TEST_CASE("canny matches the reference pipeline") {
  std::vector<ImageRaster> images;
  for (std::uint64_t s = 0; s < 6; ++s) images.push_back(blobs(40, 33, s));
  images.push_back(gen_synthetic_image(ImageKind::stripes, 30, 30, {}, 0));
  images.push_back(gen_synthetic_image(ImageKind::noise, 25, 31, {}, 4));
  ImageParams gray;
  gray.channels = 1;
  images.push_back(gen_synthetic_image(ImageKind::noise, 20, 20, gray, 5));
  for (const auto& img : images) {
    CHECK(canny_edges(img) == oracle::canny(img, 1.4, 0.1, 0.3));
    CannyParams p{2.0, 0.05, 0.2};
    CHECK(canny_edges(img, p) == oracle::canny(img, 2.0, 0.05, 0.2));
  }
}

TEST_CASE("texture matches the naive Sobel statistic") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto img = blobs(30, 30, 10 + s);
    CHECK(texture_complexity(img) == doctest::Approx(oracle::texture(img)).epsilon(1e-12));
  }
  const auto stripes = gen_synthetic_image(ImageKind::stripes, 5, 3, {}, 0);
  CHECK(texture_complexity(stripes) == doctest::Approx(oracle::texture(stripes)));
}

TEST_CASE("canny parameter validation") {
  const auto img = blobs(10, 10, 1);
  CHECK_THROWS_AS(canny_edges(img, CannyParams{0.0, 0.1, 0.3}), UsageError);
  CHECK_THROWS_AS(canny_edges(img, CannyParams{1.4, 0.3, 0.3}), UsageError);
}

TEST_CASE("binary PNM codec") {
  const auto dir = testutil::temp_dir("pnm");
  const auto img = blobs(17, 11, 3);
  encode_image(img, dir / "a.ppm");
  const auto back = decode_image(dir / "a.ppm");
  CHECK(back.width == 17);
  CHECK(back.height == 11);
  CHECK(back.samples == img.samples);

  const std::string pgm = "P5\n# a comment\n3 3\n# another\n255\n";
  std::string bytes = pgm + std::string(9, '\x07');
  const auto g = decode_image_bytes(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  CHECK(g.channels == 1);
  CHECK(g.samples[8] == 7);

  auto decode = [](const std::string& s) {
    return decode_image_bytes(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  };
  CHECK_THROWS_AS(decode(pgm + std::string(8, '\x07')), DataError);
  CHECK_THROWS_AS(decode("\x89PNG\r\n\x1a\n"), DataError);
  CHECK_THROWS_AS(decode("P3\n3 3\n255\n1 2 3"), DataError);
  CHECK_THROWS_AS(decode("P5\n3 3\n65535\n" + std::string(18, 'a')), DataError);
  CHECK_THROWS_AS(decode("P5\n2 2\n255\n" + std::string(4, 'a')), DataError);
  CHECK_THROWS_AS(decode_image(dir / "none.ppm"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("discretization") {
  const std::map<std::string, double> v{{"a", 1}, {"b", 1}, {"c", 0}, {"d", 5}, {"e", 3}, {"f", 2}, {"g", 9}};
  const auto cats = discretize(v, Property::texture, 2);
  CHECK(cats[0].level == Level::low);
  CHECK(cats[0].members == std::vector<std::string>{"a", "c"});
  CHECK(cats[1].members == std::vector<std::string>{"b", "f"});
  CHECK(cats[2].members == std::vector<std::string>{"d", "g"});
  CHECK_THROWS_AS(discretize(v, Property::texture, 3), UsageError);
  CHECK(parse_property("color_warmth") == Property::warmth);
  CHECK(to_string(Level::mid) == "mid");
}

TEST_CASE("category masks") {
  CHECK(category_bit(Property::edges, Level::low) == 1);
  CHECK(category_bit(Property::warmth, Level::mid) == 16);
  CHECK(category_bit(Property::texture, Level::high) == 256);
  CHECK(property_filter(Property::warmth) == 0x38);
  std::vector<CategoryAssignment> a{{Property::edges, Level::low, {"x", "y"}}, {Property::warmth, Level::high, {"y"}}};
  CHECK(categorized_ids(a) == std::vector<std::string>{"x", "y"});
  const std::vector<std::string> ids{"x", "y", "z"};
  CHECK(category_masks(ids, a) == std::vector<CategoryMask>{1, 1 | 32, 0});
}

TEST_CASE("analytic and random baselines") {
  std::vector<CategoryMask> disjoint;
  for (int c = 0; c < 9; ++c)
    for (int i = 0; i < 100; ++i) disjoint.push_back(static_cast<CategoryMask>(1u << c));
  CHECK(analytic_baseline(disjoint) == doctest::Approx(99.0 / 899.0).epsilon(1e-12));

  std::vector<CategoryMask> small;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 50; ++i) small.push_back(static_cast<CategoryMask>(1u << c));
  BaselineOptions bo;
  bo.trials = 10;
  bo.seed = 2;
  const double mc = random_baseline(small, bo);
  CHECK(mc == doctest::Approx(49.0 / 149.0).epsilon(0.05));
  CHECK(random_baseline(small, bo) == mc);
}

TEST_CASE("category share on clustered embeddings") {
  std::vector<CategoryMask> masks;
  std::vector<float> v;
  Rng rng(1);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 30; ++i) {
      masks.push_back(static_cast<CategoryMask>(1u << (3 * c)));
      for (int j = 0; j < 3; ++j) v.push_back(static_cast<float>((j == c ? 10.0 : 0.0) + 0.1 * rng.normal()));
    }
  const EmbeddingMatrix m(90, 3, std::move(v));
  const auto share = category_share(std::span(&m, 1), masks, 10, Metric::euclidean);
  CHECK(share.front() == 1.0);
  CHECK(per_property_share(std::span(&m, 1), masks, Property::warmth, 10, Metric::euclidean).front() == 1.0);
  const std::vector<CategoryMask> none(90, 0);
  CHECK_THROWS_AS(category_share(std::span(&m, 1), none, 10, Metric::euclidean), UsageError);
}
