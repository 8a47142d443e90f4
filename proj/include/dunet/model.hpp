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

#ifndef DUNET_MODEL_HPP_
#define DUNET_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dunet/checkpoint.hpp"
#include "dunet/deform.hpp"
#include "dunet/layers.hpp"
#include "dunet/tape.hpp"

namespace dunet {

enum class Arch { kDunet, kUnet };

std::string arch_name(Arch arch);
Arch parse_arch(const std::string& name);

struct ModelConfig {
  Arch arch = Arch::kDunet;
  int depth = 4;          // number of 2x poolings
  int base_filters = 32;  // channels at full resolution, doubled per level
  int kernel = 3;
  int input_size = 48;
  int offset_kernel = 3;    // dunet only
  int convs_per_stage = 2;  // unet only
  int in_channels = 1;

  void validate() const;
  int channels_at(int level) const { return base_filters << level; }
};

// U-shaped encoder/decoder.
//
//   encoder level i:   stage(c_i) -> skip_i -> maxpool
//   bottleneck:        stage(c_depth)
//   decoder level i:   upsample -> up conv (c_i) -> concat(skip_i, .) -> merge conv (c_i) -> stage(c_i)
//   head:              1x1 conv -> sigmoid
//
// with c_i = base_filters * 2^i. A dunet stage is one deformable block; a
// unet stage is `convs_per_stage` conv+BN+ReLU blocks. Both share every other
// layer and its parameter name, so a fresh dunet equals a single-block unet
// built from the same seed.
template <typename Scalar>
class ModelGraph {
 public:
  static ModelGraph build(const ModelConfig& config, std::uint64_t seed);

  ModelGraph(ModelGraph&&) noexcept = default;
  ModelGraph& operator=(ModelGraph&&) noexcept = default;

  // x: [N, in_channels, S, S] with S = config().input_size. Returns per-pixel
  // probabilities of the same spatial size.
  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& x, Mode mode) const;

  // Inference-mode forward pass on a private tape.
  Tensor<Scalar> predict(const Tensor<Scalar>& x) const;

  const ModelConfig& config() const { return config_; }
  ParameterStore<Scalar>& store() { return store_; }
  const ParameterStore<Scalar>& store() const { return store_; }
  std::vector<Parameter<Scalar>*> parameters() const { return store_.parameters(); }

  // Parameters plus initialized batch-norm running statistics.
  Checkpoint to_checkpoint() const;
  // Requires a record for every parameter; running statistics are optional.
  void load_checkpoint(const Checkpoint& ckpt);

 private:
  struct Stage {
    std::vector<ConvBlock<Scalar>> plain;
    std::optional<DeformableBlock<Scalar>> deformable;

    Var<Scalar> operator()(Tape<Scalar>& tape, Var<Scalar> x, Mode mode) const;
  };

  struct DecoderLevel {
    Conv2dLayer<Scalar> up;
    Conv2dLayer<Scalar> merge;
    Stage stage;
  };

  ModelGraph(const ModelConfig& config, std::uint64_t seed) : config_(config), store_(seed) {}

  Stage make_stage(const std::string& name, Index in_channels, Index out_channels);

  ModelConfig config_;
  ParameterStore<Scalar> store_;
  std::vector<Stage> encoder_;
  Stage bottleneck_;
  std::vector<DecoderLevel> decoder_;  // indexed by level, applied deepest first
  Conv2dLayer<Scalar> head_;
};

}  // namespace dunet

#endif  // DUNET_MODEL_HPP_
