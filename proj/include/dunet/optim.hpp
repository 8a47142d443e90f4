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

#ifndef DUNET_OPTIM_HPP_
#define DUNET_OPTIM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "dunet/checkpoint.hpp"
#include "dunet/parameter.hpp"

namespace dunet {

struct TrainConfig {
  int batch_size = 60;
  int epochs = 100;
  double lr0 = 1e-3;
  int plateau_patience = 4;  // epochs without improvement before the LR drops
  int stop_patience = 20;    // epochs without improvement before training stops
  double lr_factor = 0.1;
  double min_delta = 1e-4;  // smaller improvements count as "unchanged"
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
};

// One bias-corrected Adam update of every parameter from its accumulated
// gradient. Throws NumericError naming the first parameter whose gradient is
// not finite; no parameter is modified in that case.
template <typename Scalar>
void adam_step(std::span<Parameter<Scalar>* const> params, AdamState& state, double lr);

// Optimizer moments as checkpoint records ("<param>.adam_m", "<param>.adam_v",
// "adam.step").
template <typename Scalar>
void append_optimizer_state(Checkpoint& ckpt, std::span<Parameter<Scalar>* const> params, const AdamState& state);

template <typename Scalar>
void restore_optimizer_state(const Checkpoint& ckpt, std::span<Parameter<Scalar>* const> params, AdamState& state);

struct ScheduleDecision {
  double lr;
  bool stop;
  bool reduced;
};

// Plateau rule on a monitored loss: the LR is multiplied by `lr_factor` once
// `plateau_patience` epochs pass without an improvement larger than
// `min_delta` over the best value (the count restarts after every
// reduction); training stops after `stop_patience` such epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int plateau_patience, int stop_patience, double lr_factor, double min_delta);
  explicit PlateauScheduler(const TrainConfig& cfg)
      : PlateauScheduler(cfg.lr0, cfg.plateau_patience, cfg.stop_patience, cfg.lr_factor, cfg.min_delta) {}

  ScheduleDecision update(double loss);

  double lr() const { return lr_; }
  double best() const { return best_; }

 private:
  double lr_;
  int plateau_patience_;
  int stop_patience_;
  double factor_;
  double min_delta_;
  double best_;
  bool has_best_ = false;
  int since_best_ = 0;
  int since_change_ = 0;
};

// Replays `history` through a scheduler and reports the decision for the last
// epoch, applied to `current_lr`.
ScheduleDecision schedule_update(std::span<const double> history, double current_lr, const TrainConfig& cfg);

}  // namespace dunet

#endif  // DUNET_OPTIM_HPP_
