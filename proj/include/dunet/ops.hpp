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

#ifndef DUNET_OPS_HPP_
#define DUNET_OPS_HPP_

#include "dunet/parameter.hpp"
#include "dunet/tape.hpp"
#include "dunet/tensor.hpp"

namespace dunet {

enum class Mode { kTrain, kInfer };

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.99;
};

// Cross-correlation of x [N,Cin,H,W] with w [Cout,Cin,kh,kw] plus bias b [Cout].
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b, int stride, int pad);

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x);

// Per-channel normalization over (N, H, W). Train mode uses batch statistics
// and folds them into `state` by exponential moving average; infer mode uses
// the running statistics and throws StateError if none were recorded.
template <typename Scalar>
Var<Scalar> batchnorm2d(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                        BatchNormState<Scalar>& state, Mode mode, const BatchNormOptions& options = {});

// Window maxima; the gradient goes to the first maximal element in row-major order.
template <typename Scalar>
Var<Scalar> maxpool2d(const Var<Scalar>& x, int kernel = 2, int stride = 2);

// Nearest-neighbour repeat of every pixel `factor` times along both axes.
template <typename Scalar>
Var<Scalar> upsample2d(const Var<Scalar>& x, int factor = 2);

template <typename Scalar>
Var<Scalar> concat_channels(const Var<Scalar>& a, const Var<Scalar>& b);

// Mean binary cross-entropy; predictions are clamped to [eps, 1 - eps].
template <typename Scalar>
Var<Scalar> bce_loss(const Var<Scalar>& pred, const Var<Scalar>& target, double eps = 1e-7);

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& x);

// sum(x * weights) for a fixed weight tensor of the same shape.
template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& x, const Tensor<Scalar>& weights);

namespace detail {

// Unfolds sample planes [C,H,W] into columns [C*kh*kw, Ho*Wo].
template <typename Scalar>
void im2col(const Scalar* x, Index channels, Index height, Index width, int kh, int kw, int stride, int pad,
            Index out_h, Index out_w, Scalar* cols);

// Adjoint of im2col: accumulates columns back into [C,H,W].
template <typename Scalar>
void col2im(const Scalar* cols, Index channels, Index height, Index width, int kh, int kw, int stride, int pad,
            Index out_h, Index out_w, Scalar* x);

}  // namespace detail

}  // namespace dunet

#endif  // DUNET_OPS_HPP_
