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

#ifndef DUNET_PATCHES_HPP_
#define DUNET_PATCHES_HPP_

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "dunet/image.hpp"
#include "dunet/tensor.hpp"

namespace dunet {

struct Patch {
  RealImage image;  // size x size, values in [0, 1]
  Mask label;       // size x size, values in {0, 1}
  int source_id = 0;
  Index origin_row = 0;
  Index origin_col = 0;
};

struct PatchSet {
  int size = 0;
  std::vector<Patch> patches;

  std::size_t count() const { return patches.size(); }
  void append(const PatchSet& other);
};

// n patches whose top-left corners are drawn uniformly from every valid
// position. `gt` is binarized with binarize().
PatchSet sample_patches(const RealImage& image, const GrayImage& gt, int n, int size, std::uint64_t seed,
                        int source_id = 0);

// Tile grid over an image zero-padded at the bottom and right so that tiles
// of `size` at `stride` cover it exactly.
struct TileLayout {
  Index height = 0;
  Index width = 0;
  Index padded_height = 0;
  Index padded_width = 0;
  int size = 0;
  int stride = 0;
  std::vector<std::pair<Index, Index>> origins;  // row-major
};

TileLayout tile_layout(Index height, Index width, int size, int stride);
std::pair<TileLayout, std::vector<RealImage>> tile(const RealImage& image, int size, int stride);

// Averages overlapping tile predictions and crops to the source size.
RealImage recompose(const TileLayout& layout, const std::vector<RealImage>& predictions);

// Cache file: u32 count | u32 size | count x (f32 image[size^2] | u8 label[size^2]),
// little-endian. Source ids and origins are not stored.
void save_patch_cache(const std::filesystem::path& path, const PatchSet& set);
PatchSet load_patch_cache(const std::filesystem::path& path);

}  // namespace dunet

#endif  // DUNET_PATCHES_HPP_
