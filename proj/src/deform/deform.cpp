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

#include "dunet/deform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dunet {

SamplingGrid::SamplingGrid(int k) : kernel_size(k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("sampling grid needs an odd kernel size, got " + std::to_string(k));
  const int r = (k - 1) / 2;
  taps.reserve(static_cast<std::size_t>(k * k));
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) taps.emplace_back(dy, dx);
  }
}

template <typename Scalar>
BilinearStencil<Scalar> bilinear_stencil(Index height, Index width, Scalar py, Scalar px) {
  const Scalar fy = std::floor(py), fx = std::floor(px);
  // Far-away positions are clamped before the integer cast; every neighbour
  // is outside the plane either way.
  const Index y0 = static_cast<Index>(std::clamp(fy, Scalar(-2), static_cast<Scalar>(height)));
  const Index x0 = static_cast<Index>(std::clamp(fx, Scalar(-2), static_cast<Scalar>(width)));
  const Scalar ly = py - fy, lx = px - fx;
  const Scalar hy = Scalar(1) - ly, hx = Scalar(1) - lx;
  BilinearStencil<Scalar> s;
  s.frac_y = ly;
  s.frac_x = lx;
  s.weight = {hy * hx, hy * lx, ly * hx, ly * lx};
  const Index ys[4] = {y0, y0, y0 + 1, y0 + 1};
  const Index xs[4] = {x0, x0 + 1, x0, x0 + 1};
  for (int j = 0; j < 4; ++j) {
    const bool inside = ys[j] >= 0 && ys[j] < height && xs[j] >= 0 && xs[j] < width;
    s.index[j] = inside ? ys[j] * width + xs[j] : Index(-1);
  }
  return s;
}

namespace {

template <typename Scalar>
Scalar gather(const Scalar* plane, Index i) {
  return i < 0 ? Scalar(0) : plane[i];
}

template <typename Scalar>
Scalar stencil_value(const BilinearStencil<Scalar>& s, const Scalar* plane) {
  return s.weight[0] * gather(plane, s.index[0]) + s.weight[1] * gather(plane, s.index[1]) +
         s.weight[2] * gather(plane, s.index[2]) + s.weight[3] * gather(plane, s.index[3]);
}

// d value / d py and d value / d px.
template <typename Scalar>
std::pair<Scalar, Scalar> stencil_slopes(const BilinearStencil<Scalar>& s, const Scalar* plane) {
  const Scalar v00 = gather(plane, s.index[0]), v01 = gather(plane, s.index[1]);
  const Scalar v10 = gather(plane, s.index[2]), v11 = gather(plane, s.index[3]);
  const Scalar ly = s.frac_y, lx = s.frac_x;
  return {(Scalar(1) - lx) * (v10 - v00) + lx * (v11 - v01), (Scalar(1) - ly) * (v01 - v00) + ly * (v11 - v10)};
}

}  // namespace

template <typename Scalar>
Scalar bilinear_sample(const Tensor<Scalar>& x, Scalar py, Scalar px, Index n, Index c) {
  require_rank(x.shape(), 4, "bilinear_sample input");
  const auto s = bilinear_stencil(x.dim(2), x.dim(3), py, px);
  return stencil_value(s, x.plane(n, c));
}

template <typename Scalar>
std::pair<Scalar, Scalar> bilinear_position_grad(const Tensor<Scalar>& x, Scalar py, Scalar px, Index n, Index c) {
  require_rank(x.shape(), 4, "bilinear_position_grad input");
  const auto s = bilinear_stencil(x.dim(2), x.dim(3), py, px);
  return stencil_slopes(s, x.plane(n, c));
}

namespace {

// Stencils for every (tap, output pixel) pair of one sample; shared by all
// input channels.
template <typename Scalar>
std::vector<BilinearStencil<Scalar>> sample_stencils(const SamplingGrid& grid, const Scalar* offsets, Index height,
                                                     Index width) {
  const Index plane = height * width;
  std::vector<BilinearStencil<Scalar>> out(static_cast<std::size_t>(grid.size() * plane));
  for (int t = 0; t < grid.size(); ++t) {
    const auto [dy, dx] = grid.taps[static_cast<std::size_t>(t)];
    const Scalar* off_y = offsets + (2 * t) * plane;
    const Scalar* off_x = offsets + (2 * t + 1) * plane;
    for (Index oy = 0; oy < height; ++oy) {
      for (Index ox = 0; ox < width; ++ox) {
        const Index p = oy * width + ox;
        const Scalar py = static_cast<Scalar>(oy + dy) + off_y[p];
        const Scalar px = static_cast<Scalar>(ox + dx) + off_x[p];
        out[static_cast<std::size_t>(t * plane + p)] = bilinear_stencil(height, width, py, px);
      }
    }
  }
  return out;
}

template <typename Scalar>
void deformable_im2col(const std::vector<BilinearStencil<Scalar>>& stencils, const Scalar* x, Index channels,
                       int taps, Index plane, Scalar* cols) {
  for (Index c = 0; c < channels; ++c) {
    const Scalar* xc = x + c * plane;
    for (int t = 0; t < taps; ++t) {
      Scalar* row = cols + (c * taps + t) * plane;
      const BilinearStencil<Scalar>* s = stencils.data() + t * plane;
      for (Index p = 0; p < plane; ++p) row[p] = stencil_value(s[p], xc);
    }
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> deformable_conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& offsets,
                              const Var<Scalar>& bias) {
  const Tensor<Scalar>& input = x.value();
  const Tensor<Scalar>& w = weight.value();
  const Tensor<Scalar>& off = offsets.value();
  const Tensor<Scalar>& b = bias.value();
  require_rank(input.shape(), 4, "deformable_conv2d input");
  require_rank(w.shape(), 4, "deformable_conv2d weight");
  require_rank(off.shape(), 4, "deformable_conv2d offsets");
  require_rank(b.shape(), 1, "deformable_conv2d bias");
  const Index batch = input.dim(0), channels = input.dim(1), height = input.dim(2), width = input.dim(3);
  const Index out_channels = w.dim(0);
  const int k = static_cast<int>(w.dim(2));
  if (w.dim(3) != k || w.dim(1) != channels) {
    throw DimensionError("deformable_conv2d: weight " + shape_string(w.shape()) + " incompatible with input " +
                         shape_string(input.shape()));
  }
  if (b.dim(0) != out_channels) throw DimensionError("deformable_conv2d: bias length does not match weight");
  const SamplingGrid grid(k);
  const int taps = grid.size();
  if (off.dim(1) != 2 * taps) {
    throw DimensionError("deformable_conv2d: offset field needs " + std::to_string(2 * taps) + " channels, got " +
                         std::to_string(off.dim(1)));
  }
  if (off.dim(0) != batch || off.dim(2) != height || off.dim(3) != width) {
    throw DimensionError("deformable_conv2d: offset field " + shape_string(off.shape()) +
                         " does not match input " + shape_string(input.shape()));
  }
  const Index plane = height * width;
  const Index rows = channels * taps;

  Tensor<Scalar> out(Shape{batch, out_channels, height, width});
  Eigen::Map<const RowMatrix<Scalar>> wmat(w.ptr(), out_channels, rows);
  RowMatrix<Scalar> cols(rows, plane);
  for (Index n = 0; n < batch; ++n) {
    const auto stencils = sample_stencils(grid, off.plane(n, 0), height, width);
    deformable_im2col(stencils, input.plane(n, 0), channels, taps, plane, cols.data());
    Eigen::Map<RowMatrix<Scalar>> y(out.plane(n, 0), out_channels, plane);
    y.noalias() = wmat * cols;
    y.colwise() += b.data().matrix();
  }

  auto backward = [&input, &w, &off, grid, batch, channels, height, width, out_channels, taps, plane, rows](
                      const Tensor<Scalar>& gy, std::span<Tensor<Scalar>* const> grads) {
    Tensor<Scalar>* gx = grads[0];
    Tensor<Scalar>* gw = grads[1];
    Tensor<Scalar>* goff = grads[2];
    Tensor<Scalar>* gb = grads[3];
    Eigen::Map<const RowMatrix<Scalar>> wmat(w.ptr(), out_channels, rows);
    RowMatrix<Scalar> cols(rows, plane);
    RowMatrix<Scalar> dcols;
    for (Index n = 0; n < batch; ++n) {
      Eigen::Map<const RowMatrix<Scalar>> g(gy.plane(n, 0), out_channels, plane);
      if (gb != nullptr) gb->data().matrix() += g.rowwise().sum();
      const auto stencils = sample_stencils(grid, off.plane(n, 0), height, width);
      if (gw != nullptr) {
        deformable_im2col(stencils, input.plane(n, 0), channels, taps, plane, cols.data());
        Eigen::Map<RowMatrix<Scalar>> dw(gw->ptr(), out_channels, rows);
        dw.noalias() += g * cols.transpose();
      }
      if (gx == nullptr && goff == nullptr) continue;
      dcols.noalias() = wmat.transpose() * g;
      for (Index c = 0; c < channels; ++c) {
        const Scalar* xc = input.plane(n, c);
        Scalar* gxc = gx != nullptr ? gx->plane(n, c) : nullptr;
        for (int t = 0; t < taps; ++t) {
          const Scalar* drow = dcols.data() + (c * taps + t) * plane;
          const BilinearStencil<Scalar>* s = stencils.data() + t * plane;
          Scalar* goy = goff != nullptr ? goff->plane(n, 2 * t) : nullptr;
          Scalar* gox = goff != nullptr ? goff->plane(n, 2 * t + 1) : nullptr;
          for (Index p = 0; p < plane; ++p) {
            const Scalar d = drow[p];
            if (gxc != nullptr) {
              for (int j = 0; j < 4; ++j) {
                if (s[p].index[j] >= 0) gxc[s[p].index[j]] += s[p].weight[j] * d;
              }
            }
            if (goy != nullptr) {
              const auto [sy, sx] = stencil_slopes(s[p], xc);
              goy[p] += d * sy;
              gox[p] += d * sx;
            }
          }
        }
      }
    }
  };
  return x.tape().record("deformable_conv2d", std::move(out), {x, weight, offsets, bias}, std::move(backward));
}

#define DUNET_INSTANTIATE_DEFORM(S)                                                                           \
  template BilinearStencil<S> bilinear_stencil(Index, Index, S, S);                                           \
  template S bilinear_sample(const Tensor<S>&, S, S, Index, Index);                                           \
  template std::pair<S, S> bilinear_position_grad(const Tensor<S>&, S, S, Index, Index);                      \
  template Var<S> deformable_conv2d(const Var<S>&, const Var<S>&, const Var<S>&, const Var<S>&);

DUNET_INSTANTIATE_DEFORM(float)
DUNET_INSTANTIATE_DEFORM(double)

#undef DUNET_INSTANTIATE_DEFORM

}  // namespace dunet
