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

#ifndef DUNET_PREPROCESS_HPP_
#define DUNET_PREPROCESS_HPP_

#include <array>
#include <span>

#include "dunet/image.hpp"

namespace dunet {

enum class ChannelMode { kGreen, kLuminance };

GrayImage to_single_channel(const Image8& rgb, ChannelMode mode = ChannelMode::kGreen);

// Dataset-wide statistics for z-score normalization followed by an affine
// rescale of the dataset's z range onto [0, 255].
struct NormalizationStats {
  double mean = 0;
  double std = 1;
  double z_min = 0;
  double z_max = 0;
};

// Throws ConfigError for an empty dataset or zero variance.
NormalizationStats normalization_stats(std::span<const GrayImage> images);
GrayImage normalize(const GrayImage& img, const NormalizationStats& stats);

struct ClaheOptions {
  double clip_limit = 2.0;
  int tiles_y = 8;
  int tiles_x = 8;
};

// Per-tile equalization (see clahe.cpp for the exact mapping). Exposed so
// tests can inspect the tile mappings.
using TileLut = std::array<std::uint8_t, 256>;
TileLut clahe_tile_lut(const Plane<std::uint8_t>& tile, double clip_limit);

GrayImage clahe(const GrayImage& img, const ClaheOptions& options = {});

// out = round(255 * (in / 255)^gamma).
GrayImage gamma_correct(const GrayImage& img, double gamma);

struct PreprocessOptions {
  ChannelMode channel_mode = ChannelMode::kGreen;
  ClaheOptions clahe;
  double gamma = 1.2;
};

// Every intermediate of the chain single channel -> normalize -> CLAHE -> gamma.
struct PreprocessStages {
  GrayImage single_channel;
  GrayImage normalized;
  GrayImage equalized;
  GrayImage corrected;
};

PreprocessStages preprocess(const Image8& rgb, const NormalizationStats& stats, const PreprocessOptions& options);

}  // namespace dunet

#endif  // DUNET_PREPROCESS_HPP_
