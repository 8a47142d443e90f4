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

#include "dunet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dunet/errors.hpp"
#include "dunet/rng.hpp"

namespace dunet {

namespace fs = std::filesystem;

std::string split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (expected train or test)");
}

std::vector<ManifestEntry> DatasetManifest::select(Split split) const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

int parse_count(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size() || v < 0) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a non-negative integer, got '" + text + "'");
  }
}

}  // namespace

DatasetManifest parse_manifest(const std::string& text, const fs::path& base_dir) {
  DatasetManifest m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = "manifest line " + std::to_string(lineno);
    const auto f = split_tabs(line);
    if (f[0] == "@name" && f.size() == 2) {
      m.name = f[1];
    } else if (f[0] == "@quota" && f.size() == 3) {
      m.train_patches = parse_count(f[1], where);
      m.val_patches = parse_count(f[2], where);
    } else if (f.size() == 3 && f[0][0] != '@') {
      ManifestEntry e;
      e.image = fs::path(f[0]).is_absolute() ? fs::path(f[0]) : base_dir / f[0];
      e.ground_truth = fs::path(f[1]).is_absolute() ? fs::path(f[1]) : base_dir / f[1];
      try {
        e.split = parse_split(f[2]);
      } catch (const ConfigError& err) {
        throw ConfigError(where + ": " + err.what());
      }
      m.entries.push_back(std::move(e));
    } else {
      throw ConfigError(where + ": expected image<TAB>ground_truth<TAB>split");
    }
  }
  return m;
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::ostringstream out;
  if (!manifest.name.empty()) out << "@name\t" << manifest.name << '\n';
  out << "@quota\t" << manifest.train_patches << '\t' << manifest.val_patches << '\n';
  for (const ManifestEntry& e : manifest.entries) {
    out << e.image.generic_string() << '\t' << e.ground_truth.generic_string() << '\t' << split_name(e.split)
        << '\n';
  }
  return out.str();
}

void validate_manifest(const DatasetManifest& manifest) {
  std::set<fs::path> train, test;
  for (const ManifestEntry& e : manifest.entries) {
    for (const fs::path& p : {e.image, e.ground_truth}) {
      if (!fs::is_regular_file(p)) throw IoError("missing file " + p.string());
    }
    const Image8 img = read_image(e.image);
    const Image8 gt = read_image(e.ground_truth);
    if (img.height != gt.height || img.width != gt.width) {
      throw DimensionError("ground truth " + e.ground_truth.string() + " does not match the size of " +
                           e.image.string());
    }
    const fs::path key = fs::weakly_canonical(e.image);
    (e.split == Split::kTrain ? train : test).insert(key);
  }
  for (const fs::path& p : train) {
    if (test.count(p) != 0) throw ConfigError("image " + p.string() + " appears in both train and test splits");
  }
}

DatasetManifest load_manifest(const std::string& source) {
  DatasetManifest m;
  const std::size_t colon = source.find(':');
  const std::string head = colon == std::string::npos ? "" : source.substr(0, colon);
  if (head == "drive" || head == "stare" || head == "chase") {
    m = preset_manifest(head, source.substr(colon + 1));
  } else {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + source);
    std::ostringstream text;
    text << in.rdbuf();
    m = parse_manifest(text.str(), fs::path(source).parent_path());
    if (m.name.empty()) m.name = fs::path(source).stem().string();
  }
  validate_manifest(m);
  return m;
}

namespace {

std::vector<fs::path> sorted_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("missing directory " + dir.string());
  std::vector<fs::path> out;
  for (const auto& item : fs::directory_iterator(dir)) {
    const std::string ext = item.path().extension().string();
    if (item.is_regular_file() && (ext == ".png" || ext == ".ppm" || ext == ".pgm")) out.push_back(item.path());
  }
  std::sort(out.begin(), out.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return out;
}

std::string two_digits(int i) { return (i < 10 ? "0" : "") + std::to_string(i); }

}  // namespace

DatasetManifest preset_manifest(const std::string& preset, const fs::path& root) {
  DatasetManifest m;
  m.name = preset;
  if (preset == "drive") {
    for (int i = 1; i <= 40; ++i) {
      const bool train = i >= 21;
      const fs::path dir = root / (train ? "training" : "test");
      ManifestEntry e;
      e.image = dir / "images" / (two_digits(i) + (train ? "_training.png" : "_test.png"));
      e.ground_truth = dir / "1st_manual" / (two_digits(i) + "_manual1.png");
      e.split = train ? Split::kTrain : Split::kTest;
      m.entries.push_back(std::move(e));
    }
    std::stable_partition(m.entries.begin(), m.entries.end(),
                          [](const ManifestEntry& e) { return e.split == Split::kTrain; });
    m.train_patches = 8000;
    m.val_patches = 2000;
    return m;
  }
  std::size_t n_train = 0;
  if (preset == "stare") {
    n_train = 10;
    m.train_patches = 16000;
    m.val_patches = 4000;
  } else if (preset == "chase") {
    n_train = 14;
    m.train_patches = 12000;
    m.val_patches = 3000;
  } else {
    throw ConfigError("unknown dataset preset '" + preset + "' (expected drive, stare or chase)");
  }
  const auto images = sorted_images(root / "images");
  const auto labels = sorted_images(root / "labels");
  if (images.size() != labels.size()) {
    throw ConfigError(preset + ": " + std::to_string(images.size()) + " images but " +
                      std::to_string(labels.size()) + " labels");
  }
  if (images.size() <= n_train) {
    throw ConfigError(preset + ": need more than " + std::to_string(n_train) + " images, found " +
                      std::to_string(images.size()));
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    m.entries.push_back({images[i], labels[i], i < n_train ? Split::kTrain : Split::kTest});
  }
  return m;
}

void SyntheticSpec::validate() const {
  if (height < 1 || width < 1) throw ConfigError("synthetic canvas must be at least 1x1");
  if (branches < 0) throw ConfigError("synthetic branch count must be non-negative");
  if (width_min < 1.0 || width_max < width_min) throw ConfigError("synthetic widths need 1 <= min <= max");
  if (curvature < 0) throw ConfigError("synthetic curvature must be non-negative");
  auto in_range = [](int v) { return v >= 0 && v <= 255; };
  if (!in_range(background_min) || !in_range(background_max) || !in_range(foreground_min) ||
      !in_range(foreground_max) || background_min > background_max || foreground_min > foreground_max) {
    throw ConfigError("synthetic intensity ranges must be ordered and lie in [0, 255]");
  }
  if (noise < 0) throw ConfigError("synthetic noise must be non-negative");
}

SyntheticSample generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int h = spec.height, w = spec.width;
  CounterRng rng(spec.seed, 0x5EED);
  Plane<float> level = Plane<float>::Constant(h, w, -1.0f);  // vessel intensity, -1 where background

  for (int b = 0; b < spec.branches; ++b) {
    const double y0 = rng.uniform(0, h), x0 = rng.uniform(0, w);
    const double y2 = rng.uniform(0, h), x2 = rng.uniform(0, w);
    const double dy = y2 - y0, dx = x2 - x0;
    const double chord = std::hypot(dy, dx);
    const double bend = spec.curvature * chord * rng.uniform(-1, 1);
    const double ny = chord > 0 ? -dx / chord : 0, nx = chord > 0 ? dy / chord : 0;
    const double y1 = 0.5 * (y0 + y2) + ny * bend, x1 = 0.5 * (x0 + x2) + nx * bend;
    const double radius = 0.5 * rng.uniform(spec.width_min, spec.width_max);
    const auto shade = static_cast<float>(rng.uniform(spec.foreground_min, spec.foreground_max));

    const int steps = std::max(2, static_cast<int>(std::ceil(4.0 * (chord + std::abs(bend)))));
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps, u = 1 - t;
      const double py = u * u * y0 + 2 * u * t * y1 + t * t * y2;
      const double px = u * u * x0 + 2 * u * t * x1 + t * t * x2;
      const int r0 = static_cast<int>(std::floor(py - radius)), r1 = static_cast<int>(std::floor(py + radius));
      const int c0 = static_cast<int>(std::floor(px - radius)), c1 = static_cast<int>(std::floor(px + radius));
      for (int r = std::max(r0, 0); r <= std::min(r1, h - 1); ++r) {
        for (int c = std::max(c0, 0); c <= std::min(c1, w - 1); ++c) {
          const bool home = r == static_cast<int>(std::floor(py)) && c == static_cast<int>(std::floor(px));
          if (home || std::hypot(r + 0.5 - py, c + 0.5 - px) <= radius) {
            float& v = level(r, c);
            v = v < 0 ? shade : std::min(v, shade);
          }
        }
      }
    }
  }

  GrayImage red(h, w), green(h, w), blue(h, w), gt(h, w);
  const double cy = 0.5 * h, cx = 0.5 * w, far = std::hypot(cy, cx);
  auto to8 = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      // Brighter centre, darker rim, like fundus illumination.
      const double fall = far > 0 ? std::hypot(r + 0.5 - cy, c + 0.5 - cx) / far : 0;
      const double bg = spec.background_max - (spec.background_max - spec.background_min) * fall;
      const bool vessel = level(r, c) >= 0;
      const double g = (vessel ? level(r, c) : bg) + spec.noise * rng.normal();
      green(r, c) = to8(g);
      red(r, c) = to8(0.4 * (vessel ? level(r, c) : bg) + 130 + spec.noise * rng.normal());
      blue(r, c) = to8(0.25 * g + 15);
      gt(r, c) = vessel ? 255 : 0;
    }
  }
  return {make_rgb(red, green, blue), gt};
}

DatasetManifest write_synthetic_dataset(const fs::path& dir, int count, int train_count, const SyntheticSpec& spec) {
  if (count < 0 || train_count < 0 || train_count > count) {
    throw ConfigError("synthetic dataset needs 0 <= train_count <= count");
  }
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  DatasetManifest m;
  m.name = "synthetic";
  m.train_patches = 400;
  m.val_patches = 100;
  DatasetManifest relative = m;
  for (int i = 0; i < count; ++i) {
    SyntheticSpec s = spec;
    s.seed = spec.seed + static_cast<std::uint64_t>(i);
    const SyntheticSample sample = generate_synthetic(s);
    const std::string file = "synth_" + two_digits(i) + ".png";
    write_image(dir / "images" / file, sample.image);
    write_gray(dir / "labels" / file, sample.ground_truth);
    const Split split = i < train_count ? Split::kTrain : Split::kTest;
    m.entries.push_back({dir / "images" / file, dir / "labels" / file, split});
    relative.entries.push_back({fs::path("images") / file, fs::path("labels") / file, split});
  }
  std::ofstream out(dir / "manifest.tsv", std::ios::trunc);
  out << format_manifest(relative);
  if (!out) throw IoError("cannot write " + (dir / "manifest.tsv").string());
  return m;
}

}  // namespace dunet
