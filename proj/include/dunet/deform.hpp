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

#ifndef DUNET_DEFORM_HPP_
#define DUNET_DEFORM_HPP_

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "dunet/layers.hpp"
#include "dunet/ops.hpp"
#include "dunet/tape.hpp"
#include "dunet/tensor.hpp"

namespace dunet {

// Integer displacements of a k x k kernel, row-major from (-r,-r) to (r,r).
struct SamplingGrid {
  explicit SamplingGrid(int kernel_size);

  int kernel_size;
  std::vector<std::pair<int, int>> taps;  // (dy, dx)

  int size() const { return static_cast<int>(taps.size()); }
};

// The four integer neighbours of a fractional position together with their
// interpolation weights. Neighbours outside the plane have index -1.
template <typename Scalar>
struct BilinearStencil {
  std::array<Index, 4> index;
  std::array<Scalar, 4> weight;
  Scalar frac_y;  // py - floor(py)
  Scalar frac_x;
};

template <typename Scalar>
BilinearStencil<Scalar> bilinear_stencil(Index height, Index width, Scalar py, Scalar px);

// Value of plane x[n, c] at (py, px); samples outside the image read as zero.
template <typename Scalar>
Scalar bilinear_sample(const Tensor<Scalar>& x, Scalar py, Scalar px, Index n, Index c);

// Partial derivatives of bilinear_sample with respect to the position. At
// integer coordinates these are right-limit slopes.
template <typename Scalar>
std::pair<Scalar, Scalar> bilinear_position_grad(const Tensor<Scalar>& x, Scalar py, Scalar px, Index n, Index c);

// Offset-augmented convolution with stride 1 and same padding.
//   x        [N, Cin, H, W]
//   weight   [Cout, Cin, k, k]
//   offsets  [N, 2k^2, H, W], interleaved (dy_0, dx_0, dy_1, dx_1, ...)
//   bias     [Cout]
// Differentiable with respect to all four inputs.
template <typename Scalar>
Var<Scalar> deformable_conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& offsets,
                              const Var<Scalar>& bias);

// Offset conv -> deformable conv -> batch norm -> ReLU.
template <typename Scalar>
struct DeformableBlock {
  Conv2dLayer<Scalar> offset;
  Parameter<Scalar>* weight = nullptr;
  Parameter<Scalar>* bias = nullptr;
  BatchNormLayer<Scalar> bn;

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x, Mode mode) const {
    Var<Scalar> field = offset(tape, x);
    Var<Scalar> y = deformable_conv2d(x, tape.parameter(*weight), field, tape.parameter(*bias));
    return relu(bn(tape, y, mode));
  }
};

// Registers "<name>.offset.*", "<name>.conv.*" and "<name>.bn.*". The offset
// convolution starts at zero so a fresh block computes conv -> BN -> ReLU.
template <typename Scalar>
DeformableBlock<Scalar> make_deformable_block(ParameterStore<Scalar>& store, const std::string& name,
                                              Index in_channels, Index out_channels, int kernel,
                                              int offset_kernel) {
  DeformableBlock<Scalar> block;
  block.offset = make_conv(store, name + ".offset", in_channels, 2 * kernel * kernel, offset_kernel, Init::kZero);
  Conv2dLayer<Scalar> conv = make_conv(store, name + ".conv", in_channels, out_channels, kernel);
  block.weight = conv.weight;
  block.bias = conv.bias;
  block.bn = make_batchnorm(store, name + ".bn", out_channels);
  return block;
}

}  // namespace dunet

#endif  // DUNET_DEFORM_HPP_
