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

#ifndef DUNET_TRAIN_HPP_
#define DUNET_TRAIN_HPP_

#include <atomic>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dunet/checkpoint.hpp"
#include "dunet/model.hpp"
#include "dunet/optim.hpp"
#include "dunet/patches.hpp"

namespace dunet {

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_acc = 0;
};

struct TrainResult {
  Checkpoint best;  // parameters + running stats at the lowest validation loss
  int best_epoch = 0;
  double best_val_loss = 0;
  std::vector<EpochRecord> history;
  bool early_stopped = false;
  bool interrupted = false;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Polled between batches; when set, training stops after persisting the
  // current state to `last_checkpoint` (if given).
  const std::atomic<bool>* cancel = nullptr;
  // Rewritten after every epoch with parameters, running stats and Adam state.
  std::filesystem::path last_checkpoint;
};

// Stacks patches [first, first + count) of `order` into [count, 1, S, S]
// images and matching {0, 1} targets.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> make_batch(const PatchSet& set, std::span<const std::size_t> order);

struct PatchEvaluation {
  double loss = 0;      // mean BCE over all pixels
  double accuracy = 0;  // at threshold 0.5
  std::vector<float> probabilities;
  std::vector<std::uint8_t> labels;
};

// Inference-mode pass over every patch.
template <typename Scalar>
PatchEvaluation evaluate_patches(const ModelGraph<Scalar>& model, const PatchSet& set, int batch_size,
                                 bool keep_scores = false);

// Mini-batch Adam on BCE with the plateau schedule and early stopping, both
// driven by validation loss. Batches are reshuffled every epoch with a
// generator keyed by (seed, epoch).
template <typename Scalar>
TrainResult train(ModelGraph<Scalar>& model, const PatchSet& train_set, const PatchSet& val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

// CSV with header epoch,lr,train_loss,val_loss,val_acc.
void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

}  // namespace dunet

#endif  // DUNET_TRAIN_HPP_
