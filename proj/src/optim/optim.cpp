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

#include "dunet/optim.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dunet/errors.hpp"

namespace dunet {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr0 > 0)) throw ConfigError("lr0 must be positive");
  if (!(lr_factor > 0 && lr_factor < 1)) throw ConfigError("lr_factor must lie in (0, 1)");
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
  if (plateau_patience >= stop_patience) throw ConfigError("plateau_patience must be smaller than stop_patience");
  if (min_delta < 0) throw ConfigError("min_delta must be >= 0");
}

template <typename Scalar>
void adam_step(std::span<Parameter<Scalar>* const> params, AdamState& state, double lr) {
  for (const Parameter<Scalar>* p : params) {
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in parameter " + p->name);
  }
  ++state.step;
  const Scalar b1 = static_cast<Scalar>(state.beta1);
  const Scalar b2 = static_cast<Scalar>(state.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(state.beta1, static_cast<double>(state.step)));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(state.beta2, static_cast<double>(state.step)));
  const Scalar eps = static_cast<Scalar>(state.eps);
  const Scalar rate = static_cast<Scalar>(lr);
  for (Parameter<Scalar>* p : params) {
    auto& g = p->grad.data();
    auto& m = p->adam_m.data();
    auto& v = p->adam_v.data();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    p->value.data() -= rate * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

template <typename Scalar>
void append_optimizer_state(Checkpoint& ckpt, std::span<Parameter<Scalar>* const> params, const AdamState& state) {
  for (const Parameter<Scalar>* p : params) {
    ckpt.add(p->name + ".adam_m", p->adam_m);
    ckpt.add(p->name + ".adam_v", p->adam_v);
  }
  ckpt.add("adam.step", Shape{1}, {static_cast<float>(state.step)});
}

template <typename Scalar>
void restore_optimizer_state(const Checkpoint& ckpt, std::span<Parameter<Scalar>* const> params, AdamState& state) {
  const CheckpointRecord* step = ckpt.find("adam.step");
  if (step == nullptr) throw StateError("checkpoint carries no optimizer state");
  for (Parameter<Scalar>* p : params) {
    ckpt.read_into(p->name + ".adam_m", p->adam_m);
    ckpt.read_into(p->name + ".adam_v", p->adam_v);
  }
  state.step = static_cast<std::int64_t>(step->values.at(0));
}

PlateauScheduler::PlateauScheduler(double lr, int plateau_patience, int stop_patience, double lr_factor,
                                   double min_delta)
    : lr_(lr),
      plateau_patience_(plateau_patience),
      stop_patience_(stop_patience),
      factor_(lr_factor),
      min_delta_(min_delta),
      best_(std::numeric_limits<double>::infinity()) {}

ScheduleDecision PlateauScheduler::update(double loss) {
  if (!has_best_ || loss < best_ - min_delta_) {
    has_best_ = true;
    best_ = loss;
    since_best_ = 0;
    since_change_ = 0;
    return {lr_, false, false};
  }
  ++since_best_;
  ++since_change_;
  bool reduced = false;
  if (since_change_ >= plateau_patience_) {
    lr_ *= factor_;
    since_change_ = 0;
    reduced = true;
  }
  return {lr_, since_best_ >= stop_patience_, reduced};
}

ScheduleDecision schedule_update(std::span<const double> history, double current_lr, const TrainConfig& cfg) {
  if (history.empty()) throw ConfigError("schedule_update needs at least one epoch of history");
  PlateauScheduler sched(cfg.lr0, cfg.plateau_patience, cfg.stop_patience, cfg.lr_factor, cfg.min_delta);
  ScheduleDecision last{};
  for (double loss : history) last = sched.update(loss);
  return {last.reduced ? current_lr * cfg.lr_factor : current_lr, last.stop, last.reduced};
}

#define DUNET_INSTANTIATE_OPTIM(S)                                                                          \
  template void adam_step(std::span<Parameter<S>* const>, AdamState&, double);                              \
  template void append_optimizer_state(Checkpoint&, std::span<Parameter<S>* const>, const AdamState&);      \
  template void restore_optimizer_state(const Checkpoint&, std::span<Parameter<S>* const>, AdamState&);

DUNET_INSTANTIATE_OPTIM(float)
DUNET_INSTANTIATE_OPTIM(double)

#undef DUNET_INSTANTIATE_OPTIM

}  // namespace dunet
