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

#include <fstream>
#include <set>

#include "doctest.h"
#include "dunet/data.hpp"
#include "dunet/errors.hpp"
#include "support.hpp"

using namespace dunet;
using dunet::testing::random_gray;
using dunet::testing::scratch_dir;
namespace fs = std::filesystem;

namespace {

void tiny_png(const fs::path& path, int seed, int channels = 3) {
  fs::create_directories(path.parent_path());
  CounterRng rng(static_cast<std::uint64_t>(seed));
  const GrayImage g = random_gray(rng, 4, 5);
  write_image(path, channels == 3 ? make_rgb(g, g, g) : to_image(g));
}

std::size_t count_split(const DatasetManifest& m, Split s) { return m.select(s).size(); }

}  // namespace

TEST_CASE("manifest text parses paths, splits and directives") {
  const std::string text =
      "# comment\n"
      "@name\tfundus\n"
      "@quota\t300\t70\n"
      "a.png\ta_gt.png\ttrain\n"
      "\n"
      "/abs/b.png\tb_gt.png\ttest\n";
  const auto m = parse_manifest(text, "/data");
  CHECK(m.name == "fundus");
  CHECK(m.train_patches == 300);
  CHECK(m.val_patches == 70);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].image == fs::path("/data/a.png"));
  CHECK(m.entries[0].split == Split::kTrain);
  CHECK(m.entries[1].image == fs::path("/abs/b.png"));
  CHECK(m.entries[1].ground_truth == fs::path("/data/b_gt.png"));
  CHECK(m.entries[1].split == Split::kTest);
  const auto again = parse_manifest(format_manifest(m), "/elsewhere");
  CHECK(again.entries.size() == 2);
  CHECK(again.entries[0].image == m.entries[0].image);
  CHECK(again.train_patches == 300);

  CHECK_THROWS_AS(parse_manifest("a.png\tb.png\tvalidation\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_manifest("a.png b.png train\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_split("dev"), ConfigError);
}

TEST_CASE("validation names a missing file") {
  const auto dir = scratch_dir("data_missing");
  tiny_png(dir / "a.png", 1);
  const auto m = parse_manifest("a.png\tnope.png\ttrain\n", dir);
  try {
    validate_manifest(m);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("nope.png") != std::string::npos);
  }
}

TEST_CASE("validation rejects overlapping splits and size mismatches") {
  const auto dir = scratch_dir("data_overlap");
  tiny_png(dir / "a.png", 1);
  tiny_png(dir / "b.png", 2, 1);
  CHECK_THROWS_AS(validate_manifest(parse_manifest("a.png\tb.png\ttrain\na.png\tb.png\ttest\n", dir)), ConfigError);
  CounterRng rng(3);
  write_gray(dir / "big.png", random_gray(rng, 6, 6));
  CHECK_THROWS_AS(validate_manifest(parse_manifest("a.png\tbig.png\ttrain\n", dir)), DimensionError);
  CHECK_NOTHROW(validate_manifest(parse_manifest("a.png\tb.png\ttrain\n", dir)));
}

TEST_CASE("drive preset splits 20/20") {
  const auto root = scratch_dir("data_drive");
  for (int i = 1; i <= 40; ++i) {
    const std::string id = (i < 10 ? "0" : "") + std::to_string(i);
    const bool train = i >= 21;
    const fs::path d = root / (train ? "training" : "test");
    tiny_png(d / "images" / (id + (train ? "_training.png" : "_test.png")), i);
    tiny_png(d / "1st_manual" / (id + "_manual1.png"), 100 + i, 1);
  }
  const auto m = load_manifest("drive:" + root.string());
  CHECK(count_split(m, Split::kTrain) == 20);
  CHECK(count_split(m, Split::kTest) == 20);
  CHECK(m.train_patches == 8000);
  CHECK(m.val_patches == 2000);
  CHECK(m.select(Split::kTrain).front().image.filename() == "21_training.png");
  CHECK(m.select(Split::kTest).front().ground_truth.filename() == "01_manual1.png");
}

TEST_CASE("stare and chase presets split by sorted order") {
  for (const auto& [name, total, train] : {std::tuple{"stare", 20, 10}, std::tuple{"chase", 28, 14}}) {
    const auto root = scratch_dir(std::string("data_") + name);
    for (int i = 0; i < total; ++i) {
      const std::string stem = "im" + std::string(i < 10 ? "0" : "") + std::to_string(i);
      tiny_png(root / "images" / (stem + ".png"), i);
      tiny_png(root / "labels" / (stem + "_gt.png"), 50 + i, 1);
    }
    const auto m = load_manifest(std::string(name) + ":" + root.string());
    CHECK(count_split(m, Split::kTrain) == static_cast<std::size_t>(train));
    CHECK(count_split(m, Split::kTest) == static_cast<std::size_t>(total - train));
    CHECK(m.entries[0].image.filename() == "im00.png");
    CHECK(m.entries[0].ground_truth.filename() == "im00_gt.png");
  }
  CHECK_THROWS_AS(preset_manifest("hrf", "/tmp"), ConfigError);
}

TEST_CASE("synthetic sample without branches has an empty mask") {
  SyntheticSpec spec;
  spec.branches = 0;
  const auto s = generate_synthetic(spec);
  CHECK((s.ground_truth == 0).all());
  CHECK(s.image.height == 96);
  CHECK(s.image.channels == 3);
}

TEST_CASE("synthetic samples are binary, non-empty and deterministic") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    const auto a = generate_synthetic(spec), b = generate_synthetic(spec);
    CHECK((a.ground_truth == b.ground_truth).all());
    CHECK(a.image.pixels == b.image.pixels);
    CHECK((a.ground_truth == 255).count() > 0);
    CHECK(((a.ground_truth == 0) || (a.ground_truth == 255)).all());
    // Vessels are darker than the surroundings in green.
    double fg = 0, bg = 0;
    long nf = 0, nb = 0;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        if (a.ground_truth(y, x)) {
          fg += a.image.at(y, x, 1);
          ++nf;
        } else {
          bg += a.image.at(y, x, 1);
          ++nb;
        }
      }
    }
    CHECK(fg / nf + 30 < bg / nb);
  }
  SyntheticSpec bad;
  bad.width_min = 4;
  bad.width_max = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("synthetic dataset on disk validates") {
  const auto dir = scratch_dir("data_synth");
  SyntheticSpec spec;
  spec.height = spec.width = 32;
  const auto m = write_synthetic_dataset(dir, 5, 3, spec);
  CHECK(count_split(m, Split::kTrain) == 3);
  CHECK(count_split(m, Split::kTest) == 2);
  const auto loaded = load_manifest((dir / "manifest.tsv").string());
  CHECK(loaded.entries.size() == 5);
  CHECK(loaded.train_patches == m.train_patches);
  const GrayImage gt = read_gray(loaded.entries[4].ground_truth);
  spec.seed += 4;
  CHECK((gt == generate_synthetic(spec).ground_truth).all());
}

TEST_CASE("netpbm and png round-trips are bit exact") {
  const auto dir = scratch_dir("data_io");
  CounterRng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const GrayImage r = random_gray(rng, 7 + trial, 3 + trial), g = random_gray(rng, 7 + trial, 3 + trial),
                    b = random_gray(rng, 7 + trial, 3 + trial);
    const Image8 rgb = make_rgb(r, g, b);
    for (const char* ext : {".ppm", ".png"}) {
      const fs::path p = dir / (std::string("rgb") + ext);
      write_image(p, rgb);
      const Image8 back = read_image(p);
      CHECK(back.channels == 3);
      CHECK(back.pixels == rgb.pixels);
    }
    for (const char* ext : {".pgm", ".png"}) {
      const fs::path p = dir / (std::string("gray") + ext);
      write_gray(p, g);
      CHECK((read_gray(p) == g).all());
    }
  }
  CHECK_THROWS_AS(write_image(dir / "x.pgm", make_rgb(GrayImage::Zero(2, 2), GrayImage::Zero(2, 2),
                                                        GrayImage::Zero(2, 2))),
                  DimensionError);
  CHECK_THROWS_AS(write_image(dir / "x.bmp", to_image(GrayImage::Zero(2, 2))), IoError);
  std::ofstream(dir / "junk.png") << "not an image";
  CHECK_THROWS_AS(read_image(dir / "junk.png"), IoError);
}

TEST_CASE("ground truth binarizes above mid-gray") {
  GrayImage g(1, 5);
  g << 0, 1, 127, 128, 255;
  const Mask m = binarize(g);
  CHECK(m(0, 0) == 0);
  CHECK(m(0, 1) == 0);
  CHECK(m(0, 2) == 0);
  CHECK(m(0, 3) == 1);
  CHECK(m(0, 4) == 1);
}
