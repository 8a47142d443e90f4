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

#include "dunet/model.hpp"

#include <set>
#include <string>

namespace dunet {

std::string arch_name(Arch arch) { return arch == Arch::kDunet ? "dunet" : "unet"; }

Arch parse_arch(const std::string& name) {
  if (name == "dunet") return Arch::kDunet;
  if (name == "unet") return Arch::kUnet;
  throw ConfigError("unknown architecture '" + name + "' (expected dunet or unet)");
}

void ModelConfig::validate() const {
  if (depth < 0 || depth > 8) throw ConfigError("depth must be in [0, 8]");
  if (base_filters < 1) throw ConfigError("base_filters must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel must be odd");
  if (offset_kernel < 1 || offset_kernel % 2 == 0) throw ConfigError("offset_kernel must be odd");
  if (convs_per_stage < 1) throw ConfigError("convs_per_stage must be >= 1");
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  if (input_size < 1 || input_size % (1 << depth) != 0) {
    throw ConfigError("input_size " + std::to_string(input_size) + " is not divisible by 2^depth = " +
                      std::to_string(1 << depth));
  }
}

template <typename Scalar>
Var<Scalar> ModelGraph<Scalar>::Stage::operator()(Tape<Scalar>& tape, Var<Scalar> x, Mode mode) const {
  if (deformable) return (*deformable)(tape, x, mode);
  for (const auto& block : plain) x = block(tape, x, mode);
  return x;
}

template <typename Scalar>
typename ModelGraph<Scalar>::Stage ModelGraph<Scalar>::make_stage(const std::string& name, Index in_channels,
                                                                  Index out_channels) {
  Stage stage;
  if (config_.arch == Arch::kDunet) {
    stage.deformable = make_deformable_block(store_, name + ".block0", in_channels, out_channels, config_.kernel,
                                             config_.offset_kernel);
  } else {
    for (int j = 0; j < config_.convs_per_stage; ++j) {
      stage.plain.push_back(make_conv_block(store_, name + ".block" + std::to_string(j),
                                            j == 0 ? in_channels : out_channels, out_channels, config_.kernel));
    }
  }
  return stage;
}

template <typename Scalar>
ModelGraph<Scalar> ModelGraph<Scalar>::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelGraph g(config, seed);
  Index in = config.in_channels;
  for (int i = 0; i < config.depth; ++i) {
    g.encoder_.push_back(g.make_stage("enc" + std::to_string(i), in, config.channels_at(i)));
    in = config.channels_at(i);
  }
  g.bottleneck_ = g.make_stage("bottleneck", in, config.channels_at(config.depth));
  g.decoder_.resize(static_cast<std::size_t>(config.depth));
  for (int i = config.depth - 1; i >= 0; --i) {
    const std::string name = "dec" + std::to_string(i);
    const Index c = config.channels_at(i);
    DecoderLevel& level = g.decoder_[static_cast<std::size_t>(i)];
    level.up = make_conv(g.store_, name + ".up", config.channels_at(i + 1), c, config.kernel);
    level.merge = make_conv(g.store_, name + ".merge", 2 * c, c, config.kernel);
    level.stage = g.make_stage(name, c, c);
  }
  g.head_ = make_conv(g.store_, "head", config.base_filters, 1, 1);
  return g;
}

template <typename Scalar>
Var<Scalar> ModelGraph<Scalar>::forward(Tape<Scalar>& tape, const Var<Scalar>& x, Mode mode) const {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != config_.in_channels || s[2] != config_.input_size || s[3] != config_.input_size) {
    throw DimensionError("model expects input [N," + std::to_string(config_.in_channels) + "," +
                         std::to_string(config_.input_size) + "," + std::to_string(config_.input_size) + "], got " +
                         shape_string(s));
  }
  std::vector<Var<Scalar>> skips;
  Var<Scalar> h = x;
  for (const Stage& stage : encoder_) {
    h = stage(tape, h, mode);
    skips.push_back(h);
    h = maxpool2d(h, 2, 2);
  }
  h = bottleneck_(tape, h, mode);
  for (int i = config_.depth - 1; i >= 0; --i) {
    const DecoderLevel& level = decoder_[static_cast<std::size_t>(i)];
    Var<Scalar> up = level.up(tape, upsample2d(h, 2));
    Var<Scalar> merged = level.merge(tape, concat_channels(skips[static_cast<std::size_t>(i)], up));
    h = level.stage(tape, merged, mode);
  }
  return sigmoid(head_(tape, h));
}

template <typename Scalar>
Tensor<Scalar> ModelGraph<Scalar>::predict(const Tensor<Scalar>& x) const {
  Tape<Scalar> tape;
  Var<Scalar> out = forward(tape, tape.constant(x), Mode::kInfer);
  return out.value();
}

template <typename Scalar>
Checkpoint ModelGraph<Scalar>::to_checkpoint() const {
  Checkpoint ckpt;
  for (const Parameter<Scalar>* p : store_.parameters()) ckpt.add(p->name, p->value);
  for (const auto& [name, state] : store_.batchnorm_states()) {
    if (!state->initialized) continue;
    ckpt.add(name + ".running_mean", state->running_mean);
    ckpt.add(name + ".running_var", state->running_var);
  }
  return ckpt;
}

template <typename Scalar>
void ModelGraph<Scalar>::load_checkpoint(const Checkpoint& ckpt) {
  std::set<std::string> known;
  for (const Parameter<Scalar>* p : store_.parameters()) {
    known.insert(p->name);
    known.insert(p->name + ".adam_m");
    known.insert(p->name + ".adam_v");
  }
  for (const auto& [name, state] : store_.batchnorm_states()) {
    known.insert(name + ".running_mean");
    known.insert(name + ".running_var");
  }
  known.insert("adam.step");
  for (const auto& r : ckpt.records) {
    if (known.count(r.name) == 0) {
      throw ConfigError("checkpoint does not match the " + arch_name(config_.arch) + " model: unexpected record " +
                        r.name);
    }
  }
  for (Parameter<Scalar>* p : store_.parameters()) {
    if (ckpt.find(p->name) == nullptr) {
      throw ConfigError("checkpoint does not match the " + arch_name(config_.arch) + " model: missing " + p->name);
    }
    ckpt.read_into(p->name, p->value);
  }
  for (const auto& [name, state] : store_.batchnorm_states()) {
    const std::string mean = name + ".running_mean", var = name + ".running_var";
    if (ckpt.find(mean) == nullptr || ckpt.find(var) == nullptr) {
      state->initialized = false;
      continue;
    }
    ckpt.read_into(mean, state->running_mean);
    ckpt.read_into(var, state->running_var);
    state->initialized = true;
  }
}

template class ModelGraph<float>;
template class ModelGraph<double>;

}  // namespace dunet
