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

#ifndef DUNET_PARAMETER_HPP_
#define DUNET_PARAMETER_HPP_

#include <string>
#include <utility>

#include "dunet/tensor.hpp"

namespace dunet {

// A named trainable tensor. `grad` accumulates across backward passes until
// zeroed; `adam_m` / `adam_v` are the optimizer's moment slots.
template <typename Scalar>
struct Parameter {
  Parameter(std::string name_, Tensor<Scalar> value_)
      : name(std::move(name_)),
        value(std::move(value_)),
        grad(Tensor<Scalar>::zeros_like(value)),
        adam_m(Tensor<Scalar>::zeros_like(value)),
        adam_v(Tensor<Scalar>::zeros_like(value)) {}

  void zero_grad() { grad.data().setZero(); }

  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  Tensor<Scalar> adam_m;
  Tensor<Scalar> adam_v;
};

// Running statistics of a batch normalization layer.
template <typename Scalar>
struct BatchNormState {
  explicit BatchNormState(Index channels)
      : running_mean(Shape{channels}, Scalar(0)), running_var(Shape{channels}, Scalar(1)) {}

  Tensor<Scalar> running_mean;
  Tensor<Scalar> running_var;
  bool initialized = false;
};

}  // namespace dunet

#endif  // DUNET_PARAMETER_HPP_
