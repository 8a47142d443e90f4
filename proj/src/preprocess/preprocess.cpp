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

#include "dunet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dunet/errors.hpp"

namespace dunet {

namespace {

std::uint8_t saturate(double v) { return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255)); }

}  // namespace

GrayImage to_single_channel(const Image8& rgb, ChannelMode mode) {
  if (rgb.channels != 3) {
    throw DimensionError("to_single_channel expects 3 channels, got " + std::to_string(rgb.channels));
  }
  GrayImage out(rgb.height, rgb.width);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      if (mode == ChannelMode::kGreen) {
        out(y, x) = rgb.at(y, x, 1);
      } else {
        out(y, x) = saturate(0.299 * rgb.at(y, x, 0) + 0.587 * rgb.at(y, x, 1) + 0.114 * rgb.at(y, x, 2));
      }
    }
  }
  return out;
}

NormalizationStats normalization_stats(std::span<const GrayImage> images) {
  double total = 0, count = 0;
  int lo = 255, hi = 0;
  for (const GrayImage& img : images) {
    total += img.cast<double>().sum();
    count += static_cast<double>(img.size());
    if (img.size() > 0) {
      lo = std::min<int>(lo, img.minCoeff());
      hi = std::max<int>(hi, img.maxCoeff());
    }
  }
  if (count == 0) throw ConfigError("normalization needs at least one non-empty image");
  NormalizationStats s;
  s.mean = total / count;
  double sq = 0;
  for (const GrayImage& img : images) sq += (img.cast<double>() - s.mean).square().sum();
  s.std = std::sqrt(sq / count);
  if (!(s.std > 0)) throw ConfigError("normalization: dataset has zero intensity variance");
  s.z_min = (lo - s.mean) / s.std;
  s.z_max = (hi - s.mean) / s.std;
  return s;
}

GrayImage normalize(const GrayImage& img, const NormalizationStats& stats) {
  if (!(stats.std > 0) || !(stats.z_max > stats.z_min)) throw ConfigError("normalize: degenerate statistics");
  const double span = stats.z_max - stats.z_min;
  GrayImage out(img.rows(), img.cols());
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const double z = (img.data()[i] - stats.mean) / stats.std;
    out.data()[i] = saturate(255.0 * (z - stats.z_min) / span);
  }
  return out;
}

// Histogram clipped at max(1, floor(clip_limit * area / 256)); the clipped
// mass is spread evenly over all bins with the remainder going to every
// (256 / remainder)-th bin from zero. The mapping is round(255 * cdf / area).
TileLut clahe_tile_lut(const Plane<std::uint8_t>& tile, double clip_limit) {
  const long area = static_cast<long>(tile.size());
  std::array<long, 256> hist{};
  for (Eigen::Index i = 0; i < tile.size(); ++i) ++hist[tile.data()[i]];

  const long clip = std::max<long>(1, static_cast<long>(clip_limit * static_cast<double>(area) / 256.0));
  long excess = 0;
  for (long& h : hist) {
    if (h > clip) {
      excess += h - clip;
      h = clip;
    }
  }
  const long batch = excess / 256;
  long residual = excess - batch * 256;
  for (long& h : hist) h += batch;
  if (residual > 0) {
    const long step = std::max<long>(256 / residual, 1);
    for (long i = 0; i < 256 && residual > 0; i += step, --residual) ++hist[static_cast<std::size_t>(i)];
  }

  TileLut lut{};
  long cdf = 0;
  for (int v = 0; v < 256; ++v) {
    cdf += hist[static_cast<std::size_t>(v)];
    lut[static_cast<std::size_t>(v)] = saturate(static_cast<double>(cdf) * 255.0 / static_cast<double>(area));
  }
  return lut;
}

GrayImage clahe(const GrayImage& img, const ClaheOptions& options) {
  if (!(options.clip_limit > 0)) throw ConfigError("clahe: clip limit must be positive");
  if (options.tiles_y < 1 || options.tiles_x < 1) throw ConfigError("clahe: tile counts must be positive");
  if (img.size() == 0) return img;
  const Eigen::Index rows = img.rows(), cols = img.cols();
  const int ty = options.tiles_y, tx = options.tiles_x;
  const Eigen::Index th = (rows + ty - 1) / ty, tw = (cols + tx - 1) / tx;

  // Edge-replicated padding up to a whole number of tiles.
  GrayImage padded(th * ty, tw * tx);
  for (Eigen::Index y = 0; y < padded.rows(); ++y) {
    for (Eigen::Index x = 0; x < padded.cols(); ++x) padded(y, x) = img(std::min(y, rows - 1), std::min(x, cols - 1));
  }

  std::vector<TileLut> luts(static_cast<std::size_t>(ty * tx));
  for (int i = 0; i < ty; ++i) {
    for (int j = 0; j < tx; ++j) {
      Plane<std::uint8_t> tile = padded.block(i * th, j * tw, th, tw);
      luts[static_cast<std::size_t>(i * tx + j)] = clahe_tile_lut(tile, options.clip_limit);
    }
  }

  GrayImage out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(th) - 0.5;
    const double y_floor = std::floor(fy);
    const double ay = fy - y_floor;
    const int y1 = std::clamp(static_cast<int>(y_floor), 0, ty - 1);
    const int y2 = std::clamp(static_cast<int>(y_floor) + 1, 0, ty - 1);
    for (Eigen::Index x = 0; x < cols; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(tw) - 0.5;
      const double x_floor = std::floor(fx);
      const double ax = fx - x_floor;
      const int x1 = std::clamp(static_cast<int>(x_floor), 0, tx - 1);
      const int x2 = std::clamp(static_cast<int>(x_floor) + 1, 0, tx - 1);
      const std::uint8_t v = img(y, x);
      const double top = luts[static_cast<std::size_t>(y1 * tx + x1)][v] * (1.0 - ax) +
                         luts[static_cast<std::size_t>(y1 * tx + x2)][v] * ax;
      const double bottom = luts[static_cast<std::size_t>(y2 * tx + x1)][v] * (1.0 - ax) +
                            luts[static_cast<std::size_t>(y2 * tx + x2)][v] * ax;
      out(y, x) = saturate(top * (1.0 - ay) + bottom * ay);
    }
  }
  return out;
}

GrayImage gamma_correct(const GrayImage& img, double gamma) {
  if (!(gamma > 0)) throw ConfigError("gamma must be positive");
  std::array<std::uint8_t, 256> lut{};
  for (int v = 0; v < 256; ++v) lut[static_cast<std::size_t>(v)] = saturate(255.0 * std::pow(v / 255.0, gamma));
  return img.unaryExpr([&lut](std::uint8_t v) { return lut[v]; });
}

PreprocessStages preprocess(const Image8& image, const NormalizationStats& stats,
                            const PreprocessOptions& options) {
  PreprocessStages s;
  s.single_channel = image.channels == 1 ? to_gray_plane(image) : to_single_channel(image, options.channel_mode);
  s.normalized = normalize(s.single_channel, stats);
  s.equalized = clahe(s.normalized, options.clahe);
  s.corrected = gamma_correct(s.equalized, options.gamma);
  return s;
}

}  // namespace dunet
