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

#include "dunet/patches.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <string>

#include "dunet/errors.hpp"
#include "dunet/rng.hpp"

namespace dunet {

void PatchSet::append(const PatchSet& other) {
  if (other.patches.empty()) return;
  if (size != 0 && other.size != size) throw DimensionError("cannot merge patch sets of different sizes");
  size = other.size;
  patches.insert(patches.end(), other.patches.begin(), other.patches.end());
}

PatchSet sample_patches(const RealImage& image, const GrayImage& gt, int n, int size, std::uint64_t seed,
                        int source_id) {
  if (gt.rows() != image.rows() || gt.cols() != image.cols()) {
    throw DimensionError("sample_patches: ground truth and image differ in size");
  }
  if (size < 1 || size > image.rows() || size > image.cols()) {
    throw ConfigError("patch size " + std::to_string(size) + " does not fit a " + std::to_string(image.rows()) +
                      "x" + std::to_string(image.cols()) + " image");
  }
  if (n < 0) throw ConfigError("patch count must be non-negative");
  PatchSet set;
  set.size = size;
  set.patches.reserve(static_cast<std::size_t>(n));
  const Mask labels = binarize(gt);
  CounterRng rng(seed, static_cast<std::uint64_t>(source_id));
  const auto rows = static_cast<std::uint64_t>(image.rows() - size + 1);
  const auto cols = static_cast<std::uint64_t>(image.cols() - size + 1);
  for (int i = 0; i < n; ++i) {
    const auto r = static_cast<Index>(rng.below(rows));
    const auto c = static_cast<Index>(rng.below(cols));
    set.patches.push_back(
        Patch{image.block(r, c, size, size), labels.block(r, c, size, size), source_id, r, c});
  }
  return set;
}

namespace {

Index tiles_along(Index extent, int size, int stride) {
  if (extent <= size) return 1;
  return (extent - size + stride - 1) / stride + 1;
}

}  // namespace

TileLayout tile_layout(Index height, Index width, int size, int stride) {
  if (stride <= 0) throw ConfigError("tile stride must be positive");
  if (size < 1) throw ConfigError("tile size must be positive");
  if (stride > size) throw ConfigError("tile stride must not exceed the tile size");
  TileLayout layout;
  layout.height = height;
  layout.width = width;
  layout.size = size;
  layout.stride = stride;
  const Index ny = tiles_along(height, size, stride), nx = tiles_along(width, size, stride);
  layout.padded_height = (ny - 1) * stride + size;
  layout.padded_width = (nx - 1) * stride + size;
  for (Index i = 0; i < ny; ++i) {
    for (Index j = 0; j < nx; ++j) layout.origins.emplace_back(i * stride, j * stride);
  }
  return layout;
}

std::pair<TileLayout, std::vector<RealImage>> tile(const RealImage& image, int size, int stride) {
  TileLayout layout = tile_layout(image.rows(), image.cols(), size, stride);
  RealImage padded = RealImage::Zero(layout.padded_height, layout.padded_width);
  padded.topLeftCorner(image.rows(), image.cols()) = image;
  std::vector<RealImage> tiles;
  tiles.reserve(layout.origins.size());
  for (const auto& [r, c] : layout.origins) tiles.emplace_back(padded.block(r, c, size, size));
  return {std::move(layout), std::move(tiles)};
}

RealImage recompose(const TileLayout& layout, const std::vector<RealImage>& predictions) {
  if (predictions.size() != layout.origins.size()) {
    throw DimensionError("recompose: expected " + std::to_string(layout.origins.size()) + " tiles, got " +
                         std::to_string(predictions.size()));
  }
  // Accumulating float tiles in double keeps the average of identical values exact.
  Plane<double> acc = Plane<double>::Zero(layout.padded_height, layout.padded_width);
  Plane<double> weight = Plane<double>::Zero(layout.padded_height, layout.padded_width);
  for (std::size_t t = 0; t < predictions.size(); ++t) {
    const RealImage& p = predictions[t];
    if (p.rows() != layout.size || p.cols() != layout.size) throw DimensionError("recompose: tile has wrong size");
    const auto [r, c] = layout.origins[t];
    acc.block(r, c, layout.size, layout.size) += p.cast<double>();
    weight.block(r, c, layout.size, layout.size) += 1.0;
  }
  return (acc / weight).topLeftCorner(layout.height, layout.width).cast<float>();
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("patch cache truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_patch_cache(const std::filesystem::path& path, const PatchSet& set) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write patch cache " + path.string());
  put_u32(out, static_cast<std::uint32_t>(set.patches.size()));
  put_u32(out, static_cast<std::uint32_t>(set.size));
  for (const Patch& p : set.patches) {
    for (Index i = 0; i < p.image.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(p.image.data()[i]));
    out.write(reinterpret_cast<const char*>(p.label.data()), static_cast<std::streamsize>(p.label.size()));
  }
  if (!out) throw IoError("short write to " + path.string());
}

PatchSet load_patch_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open patch cache " + path.string());
  PatchSet set;
  const std::uint32_t count = get_u32(in);
  set.size = static_cast<int>(get_u32(in));
  set.patches.resize(count);
  for (Patch& p : set.patches) {
    p.image.resize(set.size, set.size);
    p.label.resize(set.size, set.size);
    for (Index i = 0; i < p.image.size(); ++i) p.image.data()[i] = std::bit_cast<float>(get_u32(in));
    if (!in.read(reinterpret_cast<char*>(p.label.data()), static_cast<std::streamsize>(p.label.size()))) {
      throw IoError("patch cache truncated: " + path.string());
    }
  }
  return set;
}

}  // namespace dunet
