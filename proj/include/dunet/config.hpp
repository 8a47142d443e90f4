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

#ifndef DUNET_CONFIG_HPP_
#define DUNET_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dunet/model.hpp"
#include "dunet/optim.hpp"
#include "dunet/preprocess.hpp"

namespace dunet {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;  // train.seed is ignored; `seed` below is the one knob
  PreprocessOptions preprocess;
  int stride = 24;         // inference tiling stride
  double threshold = 0.5;  // probability threshold for masks and metrics
  int train_patches = -1;  // per image; -1 keeps the manifest quota
  int val_patches = -1;
  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;

  void validate() const;
};

// Keys in the order they are written.
std::vector<std::string> config_keys();

// "key = value" lines; '#' starts a comment line. Unknown keys, repeated keys
// and malformed values are errors. Missing keys keep their defaults.
RunConfig parse_config(const std::string& text, RunConfig base = {});
std::string format_config(const RunConfig& config);

RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void save_config(const std::filesystem::path& path, const RunConfig& config);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& what);

}  // namespace dunet

#endif  // DUNET_CONFIG_HPP_
