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

#include "dunet/ops.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace dunet {

namespace detail {

template <typename Scalar>
void im2col(const Scalar* x, Index channels, Index height, Index width, int kh, int kw, int stride, int pad,
            Index out_h, Index out_w, Scalar* cols) {
  const Index plane = out_h * out_w;
  for (Index c = 0; c < channels; ++c) {
    const Scalar* xc = x + c * height * width;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        Scalar* row = cols + ((c * kh + ki) * kw + kj) * plane;
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * stride - pad + ki;
          Scalar* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            for (Index ox = 0; ox < out_w; ++ox) dst[ox] = Scalar(0);
            continue;
          }
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * stride - pad + kj;
            dst[ox] = (ix >= 0 && ix < width) ? xc[iy * width + ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Scalar* cols, Index channels, Index height, Index width, int kh, int kw, int stride, int pad,
            Index out_h, Index out_w, Scalar* x) {
  const Index plane = out_h * out_w;
  for (Index c = 0; c < channels; ++c) {
    Scalar* xc = x + c * height * width;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const Scalar* row = cols + ((c * kh + ki) * kw + kj) * plane;
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= height) continue;
          const Scalar* src = row + oy * out_w;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < width) xc[iy * width + ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

namespace {

template <typename Scalar>
using TensorGrads = std::span<Tensor<Scalar>* const>;

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": shape " + shape_string(a) + " vs " + shape_string(b));
}

}  // namespace

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b, int stride, int pad) {
  const Tensor<Scalar>& input = x.value();
  const Tensor<Scalar>& weight = w.value();
  const Tensor<Scalar>& bias = b.value();
  require_rank(input.shape(), 4, "conv2d input");
  require_rank(weight.shape(), 4, "conv2d weight");
  require_rank(bias.shape(), 1, "conv2d bias");

  const Index batch = input.dim(0), channels = input.dim(1), height = input.dim(2), width = input.dim(3);
  const Index out_channels = weight.dim(0);
  const int kh = static_cast<int>(weight.dim(2)), kw = static_cast<int>(weight.dim(3));
  if (weight.dim(1) != channels) {
    throw DimensionError("conv2d: weight expects " + std::to_string(weight.dim(1)) + " input channels, got " +
                         std::to_string(channels));
  }
  if (bias.dim(0) != out_channels) throw DimensionError("conv2d: bias length does not match output channels");
  if (kh % 2 == 0 || kw % 2 == 0) throw ConfigError("conv2d: kernel sizes must be odd");
  if (stride < 1 || pad < 0) throw ConfigError("conv2d: stride must be >= 1 and pad >= 0");
  if (height + 2 * pad < kh || width + 2 * pad < kw) throw DimensionError("conv2d: kernel larger than padded input");
  if ((height + 2 * pad - kh) % stride != 0 || (width + 2 * pad - kw) % stride != 0) {
    throw ConfigError("conv2d: stride does not divide the padded extent exactly");
  }
  const Index out_h = (height + 2 * pad - kh) / stride + 1;
  const Index out_w = (width + 2 * pad - kw) / stride + 1;
  const Index rows = channels * kh * kw;
  const Index cols_n = out_h * out_w;

  Tensor<Scalar> out(Shape{batch, out_channels, out_h, out_w});
  Eigen::Map<const RowMatrix<Scalar>> wmat(weight.ptr(), out_channels, rows);
  RowMatrix<Scalar> cols(rows, cols_n);
  for (Index n = 0; n < batch; ++n) {
    detail::im2col(input.plane(n, 0), channels, height, width, kh, kw, stride, pad, out_h, out_w, cols.data());
    Eigen::Map<RowMatrix<Scalar>> y(out.plane(n, 0), out_channels, cols_n);
    y.noalias() = wmat * cols;
    y.colwise() += bias.data().matrix();
  }

  auto backward = [&input, &weight, batch, channels, height, width, out_channels, kh, kw, stride, pad, out_h, out_w,
                   rows, cols_n](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) {
    Tensor<Scalar>* gx = grads[0];
    Tensor<Scalar>* gw = grads[1];
    Tensor<Scalar>* gb = grads[2];
    Eigen::Map<const RowMatrix<Scalar>> wmat(weight.ptr(), out_channels, rows);
    RowMatrix<Scalar> cols(rows, cols_n);
    RowMatrix<Scalar> dcols;
    for (Index n = 0; n < batch; ++n) {
      Eigen::Map<const RowMatrix<Scalar>> g(gy.plane(n, 0), out_channels, cols_n);
      if (gw != nullptr) {
        detail::im2col(input.plane(n, 0), channels, height, width, kh, kw, stride, pad, out_h, out_w, cols.data());
        Eigen::Map<RowMatrix<Scalar>> dw(gw->ptr(), out_channels, rows);
        dw.noalias() += g * cols.transpose();
      }
      if (gx != nullptr) {
        dcols.noalias() = wmat.transpose() * g;
        detail::col2im(dcols.data(), channels, height, width, kh, kw, stride, pad, out_h, out_w, gx->plane(n, 0));
      }
      if (gb != nullptr) gb->data().matrix() += g.rowwise().sum();
    }
  };
  return x.tape().record("conv2d", std::move(out), {x, w, b}, std::move(backward));
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  const Tensor<Scalar>& input = x.value();
  Tensor<Scalar> out(input.shape(), input.data().max(Scalar(0)).eval());
  auto backward = [&input](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) {
    grads[0]->data() += (input.data() > Scalar(0)).select(gy.data(), Scalar(0));
  };
  return x.tape().record("relu", std::move(out), {x}, std::move(backward));
}

namespace {

template <typename Derived>
auto stable_logistic(const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return (z >= Scalar(0)).select(Scalar(1) / (Scalar(1) + (-z).exp()), z.exp() / (Scalar(1) + z.exp()));
}

}  // namespace

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  const Tensor<Scalar>& input = x.value();
  Tensor<Scalar> out(input.shape(), stable_logistic(input.data()).eval());
  auto backward = [&input](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) {
    const typename Tensor<Scalar>::Storage s = stable_logistic(input.data());
    grads[0]->data() += gy.data() * s * (Scalar(1) - s);
  };
  return x.tape().record("sigmoid", std::move(out), {x}, std::move(backward));
}

template <typename Scalar>
Var<Scalar> batchnorm2d(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                        BatchNormState<Scalar>& state, Mode mode, const BatchNormOptions& options) {
  const Tensor<Scalar>& input = x.value();
  require_rank(input.shape(), 4, "batchnorm2d input");
  const Index batch = input.dim(0), channels = input.dim(1), plane = input.dim(2) * input.dim(3);
  if (gamma.value().shape() != Shape{channels} || beta.value().shape() != Shape{channels} ||
      state.running_mean.shape() != Shape{channels}) {
    throw DimensionError("batchnorm2d: affine parameters do not match " + std::to_string(channels) + " channels");
  }
  const Index count = batch * plane;
  const Scalar eps = static_cast<Scalar>(options.eps);

  std::vector<Scalar> mean(channels), inv_std(channels);
  if (mode == Mode::kTrain) {
    if (count < 2) throw DimensionError("batchnorm2d: training needs at least two values per channel");
    const Scalar momentum = static_cast<Scalar>(options.momentum);
    for (Index c = 0; c < channels; ++c) {
      Scalar acc = 0;
      for (Index n = 0; n < batch; ++n) {
        acc += Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(input.plane(n, c), plane).sum();
      }
      const Scalar mu = acc / static_cast<Scalar>(count);
      Scalar sq = 0;
      for (Index n = 0; n < batch; ++n) {
        sq += (Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(input.plane(n, c), plane) - mu)
                  .square()
                  .sum();
      }
      const Scalar var = sq / static_cast<Scalar>(count);
      mean[c] = mu;
      inv_std[c] = Scalar(1) / std::sqrt(var + eps);
      state.running_mean[c] = momentum * state.running_mean[c] + (Scalar(1) - momentum) * mu;
      state.running_var[c] = momentum * state.running_var[c] + (Scalar(1) - momentum) * var;
    }
    state.initialized = true;
  } else {
    if (!state.initialized) throw StateError("batchnorm2d: inference requested before running statistics exist");
    for (Index c = 0; c < channels; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = Scalar(1) / std::sqrt(state.running_var[c] + eps);
    }
  }

  const Tensor<Scalar>& g = gamma.value();
  const Tensor<Scalar>& bt = beta.value();
  Tensor<Scalar> out(input.shape());
  for (Index n = 0; n < batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> xin(input.plane(n, c), plane);
      Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> y(out.plane(n, c), plane);
      y = (xin - mean[c]) * (inv_std[c] * g[c]) + bt[c];
    }
  }

  const bool train = mode == Mode::kTrain;
  auto backward = [&input, &g, mean = std::move(mean), inv_std = std::move(inv_std), batch, channels, plane, count,
                   train](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) {
    using MapC = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
    using MapM = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
    for (Index c = 0; c < channels; ++c) {
      Scalar sum_g = 0, sum_g_xhat = 0;
      for (Index n = 0; n < batch; ++n) {
        MapC gyc(gy.plane(n, c), plane);
        MapC xin(input.plane(n, c), plane);
        sum_g += gyc.sum();
        sum_g_xhat += (gyc * ((xin - mean[c]) * inv_std[c])).sum();
      }
      if (grads[1] != nullptr) (*grads[1])[c] += sum_g_xhat;
      if (grads[2] != nullptr) (*grads[2])[c] += sum_g;
      if (grads[0] == nullptr) continue;
      const Scalar scale = g[c] * inv_std[c];
      const Scalar m = static_cast<Scalar>(count);
      for (Index n = 0; n < batch; ++n) {
        MapC gyc(gy.plane(n, c), plane);
        MapM gx(grads[0]->plane(n, c), plane);
        if (train) {
          MapC xin(input.plane(n, c), plane);
          gx += scale / m * (m * gyc - sum_g - (xin - mean[c]) * inv_std[c] * sum_g_xhat);
        } else {
          gx += scale * gyc;
        }
      }
    }
  };
  return x.tape().record("batchnorm2d", std::move(out), {x, gamma, beta}, std::move(backward));
}

template <typename Scalar>
Var<Scalar> maxpool2d(const Var<Scalar>& x, int kernel, int stride) {
  const Tensor<Scalar>& input = x.value();
  require_rank(input.shape(), 4, "maxpool2d input");
  if (kernel < 1 || stride < 1) throw ConfigError("maxpool2d: kernel and stride must be positive");
  const Index batch = input.dim(0), channels = input.dim(1), height = input.dim(2), width = input.dim(3);
  if (height < kernel || width < kernel || (height - kernel) % stride != 0 || (width - kernel) % stride != 0 ||
      height % stride != 0 || width % stride != 0) {
    throw DimensionError("maxpool2d: spatial size " + shape_string(input.shape()) + " not divisible by stride " +
                         std::to_string(stride));
  }
  const Index out_h = (height - kernel) / stride + 1, out_w = (width - kernel) / stride + 1;
  Tensor<Scalar> out(Shape{batch, channels, out_h, out_w});
  auto argmax = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(out.size()));
  Index o = 0;
  for (Index n = 0; n < batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      const Scalar* xc = input.plane(n, c);
      const Index base = input.offset(n, c, 0, 0);
      for (Index oy = 0; oy < out_h; ++oy) {
        for (Index ox = 0; ox < out_w; ++ox, ++o) {
          Index best = (oy * stride) * width + ox * stride;
          for (int i = 0; i < kernel; ++i) {
            for (int j = 0; j < kernel; ++j) {
              const Index idx = (oy * stride + i) * width + ox * stride + j;
              if (xc[idx] > xc[best]) best = idx;
            }
          }
          out[o] = xc[best];
          (*argmax)[static_cast<std::size_t>(o)] = base + best;
        }
      }
    }
  }
  auto backward = [argmax](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) {
    for (Index o = 0; o < gy.size(); ++o) (*grads[0])[(*argmax)[static_cast<std::size_t>(o)]] += gy[o];
  };
  return x.tape().record("maxpool2d", std::move(out), {x}, std::move(backward));
}

template <typename Scalar>
Var<Scalar> upsample2d(const Var<Scalar>& x, int factor) {
  const Tensor<Scalar>& input = x.value();
  require_rank(input.shape(), 4, "upsample2d input");
  if (factor < 1) throw ConfigError("upsample2d: factor must be positive");
  const Index batch = input.dim(0), channels = input.dim(1), height = input.dim(2), width = input.dim(3);
  const Index out_h = height * factor, out_w = width * factor;
  Tensor<Scalar> out(Shape{batch, channels, out_h, out_w});
  for (Index n = 0; n < batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      const Scalar* src = input.plane(n, c);
      Scalar* dst = out.plane(n, c);
      for (Index y = 0; y < out_h; ++y) {
        for (Index xo = 0; xo < out_w; ++xo) dst[y * out_w + xo] = src[(y / factor) * width + xo / factor];
      }
    }
  }
  auto backward = [batch, channels, width, out_h, out_w, factor](const Tensor<Scalar>& gy,
                                                                   TensorGrads<Scalar> grads) {
    for (Index n = 0; n < batch; ++n) {
      for (Index c = 0; c < channels; ++c) {
        const Scalar* src = gy.plane(n, c);
        Scalar* dst = grads[0]->plane(n, c);
        for (Index y = 0; y < out_h; ++y) {
          for (Index xo = 0; xo < out_w; ++xo) dst[(y / factor) * width + xo / factor] += src[y * out_w + xo];
        }
      }
    }
  };
  return x.tape().record("upsample2d", std::move(out), {x}, std::move(backward));
}

template <typename Scalar>
Var<Scalar> concat_channels(const Var<Scalar>& a, const Var<Scalar>& b) {
  const Tensor<Scalar>& ta = a.value();
  const Tensor<Scalar>& tb = b.value();
  require_rank(ta.shape(), 4, "concat_channels lhs");
  require_rank(tb.shape(), 4, "concat_channels rhs");
  if (ta.dim(0) != tb.dim(0) || ta.dim(2) != tb.dim(2) || ta.dim(3) != tb.dim(3)) {
    throw DimensionError("concat_channels: " + shape_string(ta.shape()) + " vs " + shape_string(tb.shape()));
  }
  const Index batch = ta.dim(0), ca = ta.dim(1), cb = tb.dim(1);
  const Index block_a = ca * ta.dim(2) * ta.dim(3), block_b = cb * ta.dim(2) * ta.dim(3);
  Tensor<Scalar> out(Shape{batch, ca + cb, ta.dim(2), ta.dim(3)});
  for (Index n = 0; n < batch; ++n) {
    out.data().segment(n * (block_a + block_b), block_a) = ta.data().segment(n * block_a, block_a);
    out.data().segment(n * (block_a + block_b) + block_a, block_b) = tb.data().segment(n * block_b, block_b);
  }
  auto backward = [batch, block_a, block_b](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) {
    for (Index n = 0; n < batch; ++n) {
      if (grads[0] != nullptr) {
        grads[0]->data().segment(n * block_a, block_a) += gy.data().segment(n * (block_a + block_b), block_a);
      }
      if (grads[1] != nullptr) {
        grads[1]->data().segment(n * block_b, block_b) +=
            gy.data().segment(n * (block_a + block_b) + block_a, block_b);
      }
    }
  };
  return a.tape().record("concat_channels", std::move(out), {a, b}, std::move(backward));
}

template <typename Scalar>
Var<Scalar> bce_loss(const Var<Scalar>& pred, const Var<Scalar>& target, double eps) {
  const Tensor<Scalar>& p = pred.value();
  const Tensor<Scalar>& t = target.value();
  require_same_shape(p.shape(), t.shape(), "bce_loss");
  const Scalar lo = static_cast<Scalar>(eps), hi = Scalar(1) - static_cast<Scalar>(eps);
  const Scalar count = static_cast<Scalar>(p.size());
  const typename Tensor<Scalar>::Storage pc = p.data().max(lo).min(hi);
  const Scalar total = -(t.data() * pc.log() + (Scalar(1) - t.data()) * (Scalar(1) - pc).log()).sum();
  Tensor<Scalar> out(Shape{1}, {total / count});
  // Gradients are evaluated at the clamped prediction so saturated pixels keep
  // a learning signal.
  auto backward = [&t, pc, count](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) {
    const Scalar g = gy[0] / count;
    if (grads[0] != nullptr) grads[0]->data() += g * (pc - t.data()) / (pc * (Scalar(1) - pc));
    if (grads[1] != nullptr) grads[1]->data() += -g * (pc.log() - (Scalar(1) - pc).log());
  };
  return pred.tape().record("bce_loss", std::move(out), {pred, target}, std::move(backward));
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  Tensor<Scalar> out(Shape{1}, {x.value().data().sum()});
  auto backward = [](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) { grads[0]->data() += gy[0]; };
  return x.tape().record("sum", std::move(out), {x}, std::move(backward));
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& x) {
  const Tensor<Scalar>& input = x.value();
  Tensor<Scalar> out(input.shape(), input.data().square().eval());
  auto backward = [&input](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) {
    grads[0]->data() += Scalar(2) * input.data() * gy.data();
  };
  return x.tape().record("square", std::move(out), {x}, std::move(backward));
}

template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& x, const Tensor<Scalar>& weights) {
  require_same_shape(x.value().shape(), weights.shape(), "weighted_sum");
  Tensor<Scalar> out(Shape{1}, {(x.value().data() * weights.data()).sum()});
  auto backward = [weights](const Tensor<Scalar>& gy, TensorGrads<Scalar> grads) {
    grads[0]->data() += gy[0] * weights.data();
  };
  return x.tape().record("weighted_sum", std::move(out), {x}, std::move(backward));
}

#define DUNET_INSTANTIATE_OPS(S)                                                                                   \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, const Var<S>&, int, int);                                   \
  template Var<S> relu(const Var<S>&);                                                                             \
  template Var<S> sigmoid(const Var<S>&);                                                                          \
  template Var<S> batchnorm2d(const Var<S>&, const Var<S>&, const Var<S>&, BatchNormState<S>&, Mode,               \
                              const BatchNormOptions&);                                                            \
  template Var<S> maxpool2d(const Var<S>&, int, int);                                                              \
  template Var<S> upsample2d(const Var<S>&, int);                                                                  \
  template Var<S> concat_channels(const Var<S>&, const Var<S>&);                                                   \
  template Var<S> bce_loss(const Var<S>&, const Var<S>&, double);                                                  \
  template Var<S> sum(const Var<S>&);                                                                              \
  template Var<S> square(const Var<S>&);                                                                           \
  template Var<S> weighted_sum(const Var<S>&, const Tensor<S>&);                                                   \
  template void detail::im2col(const S*, Index, Index, Index, int, int, int, int, Index, Index, S*);               \
  template void detail::col2im(const S*, Index, Index, Index, int, int, int, int, Index, Index, S*);

DUNET_INSTANTIATE_OPS(float)
DUNET_INSTANTIATE_OPS(double)

#undef DUNET_INSTANTIATE_OPS

}  // namespace dunet
