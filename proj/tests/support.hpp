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

// Random generators and slow reference implementations shared by the tests.

#ifndef DUNET_TESTS_SUPPORT_HPP_
#define DUNET_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dunet/deform.hpp"
#include "dunet/image.hpp"
#include "dunet/rng.hpp"
#include "dunet/tensor.hpp"

namespace dunet::testing {

template <typename S = float>
Tensor<S> random_tensor(CounterRng& rng, Shape shape, double lo = -1, double hi = 1) {
  Tensor<S> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.uniform(lo, hi));
  return t;
}

inline int random_int(CounterRng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

inline GrayImage random_gray(CounterRng& rng, Index rows, Index cols, int lo = 0, int hi = 255) {
  GrayImage img(rows, cols);
  for (Index i = 0; i < img.size(); ++i) img(i) = static_cast<std::uint8_t>(random_int(rng, lo, hi));
  return img;
}

inline Mask random_mask(CounterRng& rng, Index n, double p = 0.5) {
  Mask m(1, n);
  for (Index i = 0; i < n; ++i) m(i) = rng.uniform() < p ? 1 : 0;
  return m;
}

// Direct evaluation of sum_{mi in G} w(mi) x(m0 + mi) + b, zero outside.
template <typename S>
Tensor<double> naive_conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int stride, int pad) {
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const Index oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Tensor<double> y(Shape{n, cout, oh, ow});
  for (Index s = 0; s < n; ++s)
    for (Index o = 0; o < cout; ++o)
      for (Index r = 0; r < oh; ++r)
        for (Index c = 0; c < ow; ++c) {
          double acc = static_cast<double>(b[o]);
          for (Index i = 0; i < cin; ++i)
            for (Index u = 0; u < kh; ++u)
              for (Index v = 0; v < kw; ++v) {
                const Index yy = r * stride - pad + u, xx = c * stride - pad + v;
                if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
                acc += static_cast<double>(w(o, i, u, v)) * static_cast<double>(x(s, i, yy, xx));
              }
          y(s, o, r, c) = acc;
        }
  return y;
}

// Deformable convolution straight from its definition, sampling through
// bilinear_sample one tap at a time.
template <typename S>
Tensor<double> naive_deformable_conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& off,
                                       const Tensor<S>& b) {
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index cout = w.dim(0);
  const int k = static_cast<int>(w.dim(2)), r = (k - 1) / 2;
  Tensor<double> y(Shape{n, cout, h, wd});
  for (Index s = 0; s < n; ++s)
    for (Index o = 0; o < cout; ++o)
      for (Index py = 0; py < h; ++py)
        for (Index px = 0; px < wd; ++px) {
          double acc = static_cast<double>(b[o]);
          int t = 0;
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx, ++t) {
              const S sy = static_cast<S>(py + dy) + off(s, 2 * t, py, px);
              const S sx = static_cast<S>(px + dx) + off(s, 2 * t + 1, py, px);
              for (Index i = 0; i < cin; ++i) {
                acc += static_cast<double>(w(o, i, dy + r, dx + r)) *
                       static_cast<double>(bilinear_sample(x, sy, sx, s, i));
              }
            }
          y(s, o, py, px) = acc;
        }
  return y;
}

// CLAHE evaluated pixel by pixel: every output pixel rebuilds the clipped
// histograms of the tiles around it from the padded image. Slow on purpose.
inline GrayImage naive_clahe(const GrayImage& img, double clip_limit, int tiles_y, int tiles_x) {
  const long rows = img.rows(), cols = img.cols();
  const long th = (rows + tiles_y - 1) / tiles_y, tw = (cols + tiles_x - 1) / tiles_x;
  auto padded_at = [&](long y, long x) { return img(std::min(y, rows - 1), std::min(x, cols - 1)); };
  auto mapping = [&](int ti, int tj, int value) {
    std::array<long, 256> hist{};
    for (long y = ti * th; y < (ti + 1) * th; ++y)
      for (long x = tj * tw; x < (tj + 1) * tw; ++x) hist[padded_at(y, x)] += 1;
    const long area = th * tw;
    long limit = static_cast<long>(clip_limit * static_cast<double>(area) / 256.0);
    if (limit < 1) limit = 1;
    long clipped = 0;
    for (int v = 0; v < 256; ++v) {
      if (hist[v] > limit) {
        clipped += hist[v] - limit;
        hist[v] = limit;
      }
    }
    for (int v = 0; v < 256; ++v) hist[v] += clipped / 256;
    long left = clipped % 256;
    if (left > 0) {
      const long every = std::max(256 / left, 1L);
      for (int v = 0; v < 256 && left > 0; v += static_cast<int>(every)) {
        hist[v] += 1;
        --left;
      }
    }
    long cdf = 0;
    for (int v = 0; v <= value; ++v) cdf += hist[v];
    return std::clamp(std::round(static_cast<double>(cdf) * 255.0 / static_cast<double>(area)), 0.0, 255.0);
  };
  GrayImage out(rows, cols);
  for (long y = 0; y < rows; ++y)
    for (long x = 0; x < cols; ++x) {
      // Position relative to tile centres.
      const double gy = (y + 0.5) / static_cast<double>(th) - 0.5;
      const double gx = (x + 0.5) / static_cast<double>(tw) - 0.5;
      const int i0 = static_cast<int>(std::floor(gy)), j0 = static_cast<int>(std::floor(gx));
      const double wy = gy - i0, wx = gx - j0;
      auto clampi = [](int v, int n) { return std::min(std::max(v, 0), n - 1); };
      const int v = img(y, x);
      const double m00 = mapping(clampi(i0, tiles_y), clampi(j0, tiles_x), v);
      const double m01 = mapping(clampi(i0, tiles_y), clampi(j0 + 1, tiles_x), v);
      const double m10 = mapping(clampi(i0 + 1, tiles_y), clampi(j0, tiles_x), v);
      const double m11 = mapping(clampi(i0 + 1, tiles_y), clampi(j0 + 1, tiles_x), v);
      const double blended = (1 - wy) * ((1 - wx) * m00 + wx * m01) + wy * ((1 - wx) * m10 + wx * m11);
      out(y, x) = static_cast<std::uint8_t>(std::clamp(std::round(blended), 0.0, 255.0));
    }
  return out;
}

// Mann-Whitney form of the AUC: P(pos > neg) + P(pos == neg) / 2.
inline double pairwise_auc(const std::vector<float>& scores, const std::vector<std::uint8_t>& labels) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dunet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<std::uint8_t> file_bytes(const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  if (FILE* f = std::fopen(path.string().c_str(), "rb")) {
    std::uint8_t buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.insert(out.end(), buf, buf + n);
    std::fclose(f);
  }
  return out;
}

}  // namespace dunet::testing

#endif  // DUNET_TESTS_SUPPORT_HPP_
