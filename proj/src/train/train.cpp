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

#include "dunet/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "dunet/rng.hpp"

namespace dunet {

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> make_batch(const PatchSet& set, std::span<const std::size_t> order) {
  const Index n = static_cast<Index>(order.size());
  const Index s = set.size;
  Tensor<Scalar> images(Shape{n, 1, s, s});
  Tensor<Scalar> targets(Shape{n, 1, s, s});
  for (Index i = 0; i < n; ++i) {
    const Patch& p = set.patches.at(order[static_cast<std::size_t>(i)]);
    Eigen::Map<Plane<Scalar>>(images.plane(i, 0), s, s) = p.image.template cast<Scalar>();
    Eigen::Map<Plane<Scalar>>(targets.plane(i, 0), s, s) = p.label.template cast<Scalar>();
  }
  return {std::move(images), std::move(targets)};
}

template <typename Scalar>
PatchEvaluation evaluate_patches(const ModelGraph<Scalar>& model, const PatchSet& set, int batch_size,
                                 bool keep_scores) {
  PatchEvaluation ev;
  if (set.patches.empty()) return ev;
  std::vector<std::size_t> order(set.patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double eps = 1e-7;
  double loss = 0;
  std::size_t correct = 0, total = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(batch_size));
    auto [x, t] = make_batch<Scalar>(set, std::span<const std::size_t>(order).subspan(start, count));
    const Tensor<Scalar> p = model.predict(x);
    for (Index i = 0; i < p.size(); ++i) {
      const double prob = std::clamp(static_cast<double>(p[i]), eps, 1.0 - eps);
      const bool positive = t[i] > Scalar(0.5);
      loss -= positive ? std::log(prob) : std::log(1.0 - prob);
      correct += (static_cast<double>(p[i]) >= 0.5) == positive ? 1 : 0;
      if (keep_scores) {
        ev.probabilities.push_back(static_cast<float>(p[i]));
        ev.labels.push_back(positive ? 1 : 0);
      }
    }
    total += static_cast<std::size_t>(p.size());
  }
  ev.loss = loss / static_cast<double>(total);
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return ev;
}

namespace {

template <typename Scalar>
void persist(const ModelGraph<Scalar>& model, const AdamState& adam, const std::filesystem::path& path) {
  if (path.empty()) return;
  Checkpoint ckpt = model.to_checkpoint();
  const auto params = model.parameters();
  append_optimizer_state<Scalar>(ckpt, params, adam);
  save_checkpoint(ckpt, path);
}

}  // namespace

template <typename Scalar>
TrainResult train(ModelGraph<Scalar>& model, const PatchSet& train_set, const PatchSet& val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.patches.empty() || val_set.patches.empty()) {
    throw ConfigError("training needs non-empty training and validation patch sets");
  }
  for (const PatchSet* set : {&train_set, &val_set}) {
    if (set->size != model.config().input_size) {
      throw DimensionError("patch size " + std::to_string(set->size) + " differs from model input size " +
                           std::to_string(model.config().input_size));
    }
  }

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  AdamState adam;
  PlateauScheduler schedule(cfg);
  double lr = cfg.lr0;
  const auto params = model.parameters();
  model.store().zero_grad();

  std::vector<std::size_t> order(train_set.patches.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(cfg.seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      if (hooks.cancel != nullptr && hooks.cancel->load()) {
        result.interrupted = true;
        persist(model, adam, hooks.last_checkpoint);
        return result;
      }
      const std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      auto [x, t] = make_batch<Scalar>(train_set, std::span<const std::size_t>(order).subspan(start, count));
      Tape<Scalar> tape;
      Var<Scalar> pred = model.forward(tape, tape.constant(std::move(x)), Mode::kTrain);
      Var<Scalar> loss = bce_loss(pred, tape.constant(std::move(t)));
      tape.backward(loss);
      adam_step<Scalar>(params, adam, lr);
      model.store().zero_grad();
      loss_sum += static_cast<double>(loss.value()[0]) * static_cast<double>(count);
      seen += count;
    }

    const PatchEvaluation val = evaluate_patches(model, val_set, cfg.batch_size);
    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(seen), val.loss, val.accuracy};
    result.history.push_back(rec);
    if (val.loss < result.best_val_loss) {
      result.best_val_loss = val.loss;
      result.best_epoch = epoch;
      result.best = model.to_checkpoint();
    }
    const ScheduleDecision decision = schedule.update(val.loss);
    lr = decision.lr;
    persist(model, adam, hooks.last_checkpoint);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (decision.stop) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "epoch,lr,train_loss,val_loss,val_acc\n";
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_acc << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

#define DUNET_INSTANTIATE_TRAIN(S)                                                                             \
  template std::pair<Tensor<S>, Tensor<S>> make_batch(const PatchSet&, std::span<const std::size_t>);          \
  template PatchEvaluation evaluate_patches(const ModelGraph<S>&, const PatchSet&, int, bool);                 \
  template TrainResult train(ModelGraph<S>&, const PatchSet&, const PatchSet&, const TrainConfig&,             \
                             const TrainHooks&);

DUNET_INSTANTIATE_TRAIN(float)
DUNET_INSTANTIATE_TRAIN(double)

#undef DUNET_INSTANTIATE_TRAIN

}  // namespace dunet
