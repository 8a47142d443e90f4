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

#ifndef DUNET_DATA_HPP_
#define DUNET_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dunet/image.hpp"

namespace dunet {

enum class Split { kTrain, kTest };

std::string split_name(Split split);
Split parse_split(const std::string& name);

struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path ground_truth;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::string name;
  std::vector<ManifestEntry> entries;
  // Patches sampled from every training image.
  int train_patches = 8000;
  int val_patches = 2000;

  std::vector<ManifestEntry> select(Split split) const;
};

// Text form, one entry per line:
//   image<TAB>ground_truth<TAB>train|test
// plus optional "@name<TAB>value" and "@quota<TAB>train<TAB>val" lines.
// Blank lines and lines starting with '#' are skipped. Relative paths are
// resolved against `base_dir`.
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
std::string format_manifest(const DatasetManifest& manifest);

// Every file exists and decodes, image and ground truth agree in size, and no
// image appears in both splits.
void validate_manifest(const DatasetManifest& manifest);

// Reads a manifest file, or a preset written as "drive:<root>",
// "stare:<root>" or "chase:<root>". The result is validated.
DatasetManifest load_manifest(const std::string& source);

// Builds a manifest from a converted dataset directory:
//   drive  training/images/NN_training.png, training/1st_manual/NN_manual1.png,
//          test/images/NN_test.png, test/1st_manual/NN_manual1.png
//   stare, chase  images/ and labels/, paired in lexicographic order; the
//          first 10 (stare) or 14 (chase) go to training.
DatasetManifest preset_manifest(const std::string& preset, const std::filesystem::path& root);

struct SyntheticSpec {
  int height = 96;
  int width = 96;
  int branches = 6;
  double width_min = 1.0;  // vessel width in pixels
  double width_max = 3.0;
  double curvature = 0.35;  // control-point offset as a fraction of chord length
  int background_min = 150;
  int background_max = 200;
  int foreground_min = 70;
  int foreground_max = 120;
  double noise = 8.0;  // Gaussian sigma in gray levels
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSample {
  Image8 image;        // RGB, vessel contrast strongest in green
  GrayImage ground_truth;  // 0 or 255
};

SyntheticSample generate_synthetic(const SyntheticSpec& spec);

// Writes images/, labels/ and manifest.tsv under `dir`; sample i uses seed
// spec.seed + i and the first `train_count` samples form the training split.
DatasetManifest write_synthetic_dataset(const std::filesystem::path& dir, int count, int train_count,
                                        const SyntheticSpec& spec);

}  // namespace dunet

#endif  // DUNET_DATA_HPP_
