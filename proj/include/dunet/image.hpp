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

#ifndef DUNET_IMAGE_HPP_
#define DUNET_IMAGE_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dunet {

template <typename T>
using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GrayImage = Plane<std::uint8_t>;
using RealImage = Plane<float>;
using Mask = Plane<std::uint8_t>;  // 0 or 1

// 8-bit image with interleaved channels (1 = gray, 3 = RGB).
struct Image8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

Image8 make_rgb(const GrayImage& r, const GrayImage& g, const GrayImage& b);
Image8 to_image(const GrayImage& gray);
// Requires a single-channel image.
GrayImage to_gray_plane(const Image8& image);

// PNG (via libpng), binary PGM (P5) and binary PPM (P6) with maxval 255.
// The format is chosen by file extension on write and by signature on read.
Image8 read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image8& image);

// Reads any supported image as one 8-bit plane; color images contribute
// their green channel.
GrayImage read_gray(const std::filesystem::path& path);
void write_gray(const std::filesystem::path& path, const GrayImage& image);

// Ground truth: pixel > 127 is foreground.
Mask binarize(const GrayImage& gt);

inline RealImage to_unit(const GrayImage& img) { return img.cast<float>() / 255.0f; }

}  // namespace dunet

#endif  // DUNET_IMAGE_HPP_
