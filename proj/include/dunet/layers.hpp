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

#ifndef DUNET_LAYERS_HPP_
#define DUNET_LAYERS_HPP_

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dunet/ops.hpp"
#include "dunet/parameter.hpp"
#include "dunet/rng.hpp"
#include "dunet/tape.hpp"

namespace dunet {

enum class Init { kHeUniform, kZero };

// Owns every parameter and batch-norm state of a network, keyed by name.
// Initial values are a function of (seed, name) alone, so two stores built
// with the same seed agree on every parameter they share by name.
template <typename Scalar>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter<Scalar>& add(const std::string& name, Shape shape, Init init, Index fan_in = 1) {
    if (index_.count(name) != 0) throw ConfigError("duplicate parameter name " + name);
    Tensor<Scalar> value(std::move(shape));
    if (init == Init::kHeUniform) {
      CounterRng rng(seed_, fnv1a64(name));
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (Index i = 0; i < value.size(); ++i) value[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
    }
    params_.push_back(std::make_unique<Parameter<Scalar>>(name, std::move(value)));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  Parameter<Scalar>& add_constant(const std::string& name, Shape shape, Scalar fill) {
    Parameter<Scalar>& p = add(name, std::move(shape), Init::kZero);
    p.value.data().setConstant(fill);
    return p;
  }

  BatchNormState<Scalar>& add_batchnorm_state(const std::string& name, Index channels) {
    for (const auto& [n, s] : states_) {
      if (n == name) throw ConfigError("duplicate batch-norm name " + name);
    }
    states_.emplace_back(name, std::make_unique<BatchNormState<Scalar>>(channels));
    return *states_.back().second;
  }

  std::vector<Parameter<Scalar>*> parameters() const {
    std::vector<Parameter<Scalar>*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  Parameter<Scalar>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  const std::vector<std::pair<std::string, std::unique_ptr<BatchNormState<Scalar>>>>& batchnorm_states() const {
    return states_;
  }

  Index parameter_count() const {
    Index total = 0;
    for (const auto& p : params_) total += p->value.size();
    return total;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::pair<std::string, std::unique_ptr<BatchNormState<Scalar>>>> states_;
};

template <typename Scalar>
struct Conv2dLayer {
  Parameter<Scalar>* weight = nullptr;
  Parameter<Scalar>* bias = nullptr;
  int stride = 1;
  int pad = 0;

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    return conv2d(x, tape.parameter(*weight), tape.parameter(*bias), stride, pad);
  }
};

template <typename Scalar>
struct BatchNormLayer {
  Parameter<Scalar>* gamma = nullptr;
  Parameter<Scalar>* beta = nullptr;
  BatchNormState<Scalar>* state = nullptr;
  BatchNormOptions options;

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x, Mode mode) const {
    return batchnorm2d(x, tape.parameter(*gamma), tape.parameter(*beta), *state, mode, options);
  }
};

// Same-padded convolution: "<name>.weight" [out,in,k,k] and "<name>.bias" [out].
template <typename Scalar>
Conv2dLayer<Scalar> make_conv(ParameterStore<Scalar>& store, const std::string& name, Index in_channels,
                              Index out_channels, int kernel, Init init = Init::kHeUniform) {
  Conv2dLayer<Scalar> layer;
  layer.weight = &store.add(name + ".weight", Shape{out_channels, in_channels, kernel, kernel}, init,
                            in_channels * kernel * kernel);
  layer.bias = &store.add(name + ".bias", Shape{out_channels}, Init::kZero);
  layer.pad = (kernel - 1) / 2;
  return layer;
}

template <typename Scalar>
BatchNormLayer<Scalar> make_batchnorm(ParameterStore<Scalar>& store, const std::string& name, Index channels) {
  BatchNormLayer<Scalar> layer;
  layer.gamma = &store.add_constant(name + ".gamma", Shape{channels}, Scalar(1));
  layer.beta = &store.add_constant(name + ".beta", Shape{channels}, Scalar(0));
  layer.state = &store.add_batchnorm_state(name, channels);
  return layer;
}

// conv -> batch norm -> ReLU.
template <typename Scalar>
struct ConvBlock {
  Conv2dLayer<Scalar> conv;
  BatchNormLayer<Scalar> bn;

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x, Mode mode) const {
    return relu(bn(tape, conv(tape, x), mode));
  }
};

template <typename Scalar>
ConvBlock<Scalar> make_conv_block(ParameterStore<Scalar>& store, const std::string& name, Index in_channels,
                                  Index out_channels, int kernel) {
  return ConvBlock<Scalar>{make_conv(store, name + ".conv", in_channels, out_channels, kernel),
                           make_batchnorm(store, name + ".bn", out_channels)};
}

}  // namespace dunet

#endif  // DUNET_LAYERS_HPP_
