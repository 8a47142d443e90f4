// Copyright 2026 The DUNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <cmath>

#include "doctest.h"
#include "dunet/errors.hpp"
#include "dunet/preprocess.hpp"
#include "support.hpp"

using namespace dunet;
using dunet::testing::naive_clahe;
using dunet::testing::random_gray;
using dunet::testing::random_int;

namespace {

Image8 rgb_pixel(int r, int g, int b) {
  Image8 img{1, 1, 3, {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)}};
  return img;
}

GrayImage row(std::initializer_list<int> values) {
  GrayImage g(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (int v : values) g(0, i++) = static_cast<std::uint8_t>(v);
  return g;
}

GrayImage two_tone_16() {
  GrayImage g(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) g(y, x) = (x + 2 * y < 20) ? 60 : 180;
  }
  return g;
}

}  // namespace

TEST_CASE("single channel extraction") {
  CHECK(to_single_channel(rgb_pixel(0, 255, 0))(0, 0) == 255);
  CHECK(to_single_channel(rgb_pixel(30, 60, 90), ChannelMode::kLuminance)(0, 0) == 54);
  CounterRng rng(1);
  for (int i = 0; i < 50; ++i) {
    const int v = random_int(rng, 0, 255);
    CHECK(to_single_channel(rgb_pixel(v, v, v))(0, 0) == v);
    CHECK(to_single_channel(rgb_pixel(v, v, v), ChannelMode::kLuminance)(0, 0) == v);
  }
  Image8 gray{1, 1, 1, {7}};
  CHECK_THROWS_AS(to_single_channel(gray), DimensionError);
}

TEST_CASE("dataset normalization against hand-computed values") {
  const std::vector<GrayImage> ds = {row({10, 20, 40}), row({100})};
  const NormalizationStats s = normalization_stats(ds);
  CHECK(s.mean == doctest::Approx(42.5));
  CHECK(s.std == doctest::Approx(std::sqrt((32.5 * 32.5 + 22.5 * 22.5 + 2.5 * 2.5 + 57.5 * 57.5) / 4)));
  // z-score then rescale is affine: 255 * (v - 10) / 90
  const GrayImage a = normalize(ds[0], s), b = normalize(ds[1], s);
  CHECK(a(0, 0) == 0);
  CHECK(a(0, 1) == 28);
  CHECK(a(0, 2) == 85);
  CHECK(b(0, 0) == 255);
}

TEST_CASE("normalization spans the full range over the dataset") {
  CounterRng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<GrayImage> ds;
    for (int i = 0; i < 3; ++i) ds.push_back(random_gray(rng, random_int(rng, 2, 9), random_int(rng, 2, 9)));
    const auto s = normalization_stats(ds);
    int lo = 255, hi = 0;
    for (const auto& img : ds) {
      const GrayImage n = normalize(img, s);
      lo = std::min<int>(lo, n.minCoeff());
      hi = std::max<int>(hi, n.maxCoeff());
    }
    CHECK(lo == 0);
    CHECK(hi == 255);
  }
}

TEST_CASE("constant dataset has no normalization") {
  const std::vector<GrayImage> ds = {GrayImage::Constant(4, 4, 90), GrayImage::Constant(2, 3, 90)};
  CHECK_THROWS_AS(normalization_stats(ds), ConfigError);
  CHECK_THROWS_AS(normalization_stats(std::vector<GrayImage>{}), ConfigError);
}

TEST_CASE("clahe on the two-tone fixture equals the naive reference") {
  const GrayImage img = two_tone_16();
  const GrayImage fast = clahe(img, {2.0, 2, 2});
  const GrayImage slow = naive_clahe(img, 2.0, 2, 2);
  CHECK((fast == slow).all());
  // Equalization must actually change the image.
  CHECK_FALSE((fast == img).all());
}

TEST_CASE("clahe equals the naive reference on random images") {
  CounterRng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = random_int(rng, 1, 30), w = random_int(rng, 1, 30);
    const int ty = random_int(rng, 1, 4), tx = random_int(rng, 1, 4);
    const double clip = rng.uniform(0.2, 6.0);
    const GrayImage img = random_gray(rng, h, w);
    INFO("h=" << h << " w=" << w << " tiles=" << ty << "x" << tx << " clip=" << clip);
    CHECK((clahe(img, {clip, ty, tx}) == naive_clahe(img, clip, ty, tx)).all());
  }
}

TEST_CASE("clahe on a constant image is constant") {
  for (int v : {0, 77, 255}) {
    const GrayImage out = clahe(GrayImage::Constant(20, 24, static_cast<std::uint8_t>(v)), {2.0, 3, 4});
    CHECK((out == out(0, 0)).all());
  }
}

TEST_CASE("clahe tile mapping is monotone and output is bounded") {
  CounterRng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const GrayImage tile = random_gray(rng, random_int(rng, 1, 20), random_int(rng, 1, 20));
    const TileLut lut = clahe_tile_lut(tile, rng.uniform(0.1, 8.0));
    for (int v = 1; v < 256; ++v) CHECK(lut[v - 1] <= lut[v]);
    CHECK(lut[255] == 255);
  }
  CHECK_THROWS_AS(clahe(two_tone_16(), {0.0, 2, 2}), ConfigError);
  CHECK_THROWS_AS(clahe(two_tone_16(), {2.0, 0, 2}), ConfigError);
}

TEST_CASE("gamma correction") {
  const GrayImage img = row({0, 64, 128, 255});
  CHECK(gamma_correct(img, 0.5)(0, 1) == 128);
  CHECK((gamma_correct(img, 1.0) == img).all());
  CounterRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const double g = rng.uniform(0.1, 5.0);
    const GrayImage ramp = [] {
      GrayImage r(1, 256);
      for (int v = 0; v < 256; ++v) r(0, v) = static_cast<std::uint8_t>(v);
      return r;
    }();
    const GrayImage out = gamma_correct(ramp, g);
    CHECK(out(0, 0) == 0);
    CHECK(out(0, 255) == 255);
    for (int v = 1; v < 256; ++v) CHECK(out(0, v - 1) <= out(0, v));
  }
  CHECK_THROWS_AS(gamma_correct(img, 0.0), ConfigError);
  CHECK_THROWS_AS(gamma_correct(img, -1.0), ConfigError);
}

TEST_CASE("full chain is deterministic and keeps the image size") {
  CounterRng rng(6);
  Image8 rgb{33, 41, 3, {}};
  rgb.pixels.resize(33 * 41 * 3);
  for (auto& p : rgb.pixels) p = static_cast<std::uint8_t>(random_int(rng, 0, 255));
  const GrayImage g = to_single_channel(rgb);
  const auto stats = normalization_stats(std::span<const GrayImage>(&g, 1));
  const PreprocessOptions opts;
  const auto a = preprocess(rgb, stats, opts), b = preprocess(rgb, stats, opts);
  CHECK((a.corrected == b.corrected).all());
  CHECK(a.corrected.rows() == 33);
  CHECK(a.corrected.cols() == 41);
  CHECK((a.single_channel == g).all());
  CHECK((a.corrected == gamma_correct(a.equalized, opts.gamma)).all());
}
