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

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "dunet/errors.hpp"
#include "dunet/optim.hpp"
#include "dunet/train.hpp"
#include "support.hpp"

using namespace dunet;

namespace {

Parameter<double> scalar_param(double value, double grad) {
  Parameter<double> p("p", Tensor<double>(Shape{1}, value));
  p.grad[0] = grad;
  return p;
}

// Separable toy problem: label = bright pixel.
PatchSet toy_patches(int n, int size, std::uint64_t seed) {
  CounterRng rng(seed);
  PatchSet set;
  set.size = size;
  for (int i = 0; i < n; ++i) {
    Patch p;
    p.image.resize(size, size);
    p.label.resize(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const bool on = ((x / 3 + y / 3 + i) % 3) == 0;
        p.label(y, x) = on ? 1 : 0;
        p.image(y, x) = static_cast<float>((on ? 0.7 : 0.3) + rng.uniform(-0.05, 0.05));
      }
    }
    set.patches.push_back(std::move(p));
  }
  return set;
}

ModelConfig toy_model() {
  ModelConfig c;
  c.arch = Arch::kDunet;
  c.depth = 1;
  c.base_filters = 4;
  c.input_size = 12;
  return c;
}

TrainConfig toy_train(int epochs) {
  TrainConfig t;
  t.batch_size = 4;
  t.epochs = epochs;
  t.lr0 = 1e-2;
  t.seed = 3;
  return t;
}

}  // namespace

TEST_CASE("adam first step moves by lr against the gradient sign") {
  auto p = scalar_param(1.0, 1.0);
  Parameter<double>* ps[] = {&p};
  AdamState st;
  adam_step<double>(ps, st, 0.1);
  CHECK(p.value[0] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(st.step == 1);
}

TEST_CASE("adam leaves parameters with zero gradient in place") {
  auto p = scalar_param(2.5, 0.0);
  Parameter<double>* ps[] = {&p};
  AdamState st;
  for (int i = 0; i < 5; ++i) adam_step<double>(ps, st, 0.1);
  CHECK(p.value[0] == 2.5);
}

TEST_CASE("adam with zero learning rate is a no-op on values") {
  CounterRng rng(2);
  Parameter<float> p("w", dunet::testing::random_tensor<float>(rng, Shape{3, 4}, -1, 1));
  p.grad = dunet::testing::random_tensor<float>(rng, Shape{3, 4}, -1, 1);
  const auto before = p.value;
  Parameter<float>* ps[] = {&p};
  AdamState st;
  adam_step<float>(ps, st, 0.0);
  CHECK((p.value.data() == before.data()).all());
}

TEST_CASE("adam matches a scalar reference over many steps") {
  CounterRng rng(7);
  auto p = scalar_param(0.3, 0.0);
  Parameter<double>* ps[] = {&p};
  AdamState st;
  double x = 0.3, m = 0, v = 0;
  for (int t = 1; t <= 50; ++t) {
    const double g = rng.uniform(-2, 2);
    p.grad[0] = g;
    adam_step<double>(ps, st, 0.01);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(p.value[0] == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("non-finite gradient names the parameter") {
  auto p = scalar_param(1.0, std::numeric_limits<double>::quiet_NaN());
  p.name = "dec0.merge.weight";
  Parameter<double>* ps[] = {&p};
  AdamState st;
  try {
    adam_step<double>(ps, st, 0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("dec0.merge.weight") != std::string::npos);
  }
  CHECK(p.value[0] == 1.0);
  CHECK(st.step == 0);
}

TEST_CASE("plateau schedule reduces after patience and stops later") {
  TrainConfig cfg;
  PlateauScheduler s(cfg);
  CHECK_FALSE(s.update(1.0).reduced);
  for (int i = 1; i <= 3; ++i) CHECK_FALSE(s.update(1.0).reduced);
  auto d = s.update(1.0);  // fourth epoch without improvement
  CHECK(d.reduced);
  CHECK(d.lr == doctest::Approx(1e-4));
  CHECK_FALSE(d.stop);
  int epochs_without = 4;
  while (!d.stop) {
    d = s.update(1.0);
    ++epochs_without;
    REQUIRE(epochs_without <= 20);
  }
  CHECK(epochs_without == 20);
  CHECK(s.lr() == doctest::Approx(1e-3 * std::pow(0.1, 5)));
}

TEST_CASE("improvements below min_delta do not reset patience") {
  TrainConfig cfg;
  PlateauScheduler s(cfg);
  s.update(1.0);
  for (int i = 1; i <= 3; ++i) s.update(1.0 - 3e-5 * i);
  CHECK(s.update(0.99991).reduced);
  // A real improvement resets both counters.
  CHECK_FALSE(s.update(0.5).reduced);
  for (int i = 0; i < 3; ++i) CHECK_FALSE(s.update(0.5).reduced);
  CHECK(s.update(0.5).reduced);
}

TEST_CASE("history form of the schedule") {
  TrainConfig cfg;
  const std::vector<double> flat = {1.0, 1.0, 1.0, 1.0, 1.0};
  const auto d = schedule_update(flat, 1e-3, cfg);
  CHECK(d.reduced);
  CHECK(d.lr == doctest::Approx(1e-4));
  const std::vector<double> falling = {1.0, 0.9, 0.8};
  CHECK(schedule_update(falling, 1e-3, cfg).lr == 1e-3);
  CHECK_THROWS_AS(schedule_update(std::vector<double>{}, 1e-3, cfg), ConfigError);
}

TEST_CASE("training configuration validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.plateau_patience = 20;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.lr_factor = 1.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("training history, best checkpoint and determinism") {
  const PatchSet tr = toy_patches(12, 12, 1), va = toy_patches(4, 12, 2);
  auto m1 = ModelGraph<float>::build(toy_model(), 5);
  auto m2 = ModelGraph<float>::build(toy_model(), 5);
  const auto r1 = train(m1, tr, va, toy_train(6));
  const auto r2 = train(m2, tr, va, toy_train(6));
  REQUIRE(!r1.history.empty());
  CHECK(r1.history.size() <= 6);
  double lowest = r1.history[0].val_loss;
  for (const auto& e : r1.history) lowest = std::min(lowest, e.val_loss);
  CHECK(r1.best_val_loss == lowest);
  CHECK(r1.history[static_cast<std::size_t>(r1.best_epoch - 1)].val_loss == lowest);
  CHECK(r1.history.back().train_loss < r1.history.front().train_loss);
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
  }
  CHECK(serialize_checkpoint(r1.best) == serialize_checkpoint(r2.best));

  // The best checkpoint reproduces the best validation loss.
  auto m3 = ModelGraph<float>::build(toy_model(), 99);
  m3.load_checkpoint(r1.best);
  CHECK(evaluate_patches(m3, va, 4).loss == doctest::Approx(r1.best_val_loss).epsilon(1e-9));
}

TEST_CASE("training rejects empty or mismatched patch sets") {
  auto m = ModelGraph<float>::build(toy_model(), 5);
  CHECK_THROWS_AS(train(m, PatchSet{12, {}}, toy_patches(2, 12, 1), toy_train(1)), ConfigError);
  CHECK_THROWS_AS(train(m, toy_patches(2, 16, 1), toy_patches(2, 16, 1), toy_train(1)), DimensionError);
}

TEST_CASE("cancellation persists the last state with optimizer moments") {
  const auto dir = dunet::testing::scratch_dir("optim_cancel");
  const PatchSet tr = toy_patches(8, 12, 1), va = toy_patches(4, 12, 2);
  auto m = ModelGraph<float>::build(toy_model(), 5);
  std::atomic<bool> cancel{false};
  TrainHooks hooks;
  hooks.cancel = &cancel;
  hooks.last_checkpoint = dir / "last.dunc";
  hooks.on_epoch = [&](const EpochRecord& e) {
    if (e.epoch == 2) cancel = true;
  };
  const auto r = train(m, tr, va, toy_train(10), hooks);
  CHECK(r.interrupted);
  CHECK(r.history.size() == 2);
  const Checkpoint last = load_checkpoint(dir / "last.dunc");
  REQUIRE(last.find("adam.step") != nullptr);
  CHECK(last.find("adam.step")->values[0] == 4.0f);  // 2 epochs x 2 batches

  // Restoring puts the same parameters and moments back.
  auto fresh = ModelGraph<float>::build(toy_model(), 77);
  fresh.load_checkpoint(last);
  AdamState st;
  const auto params = fresh.parameters();
  restore_optimizer_state<float>(last, params, st);
  CHECK(st.step == 4);
  for (auto* p : params) {
    auto* q = m.store().find(p->name);
    CHECK((q->value.data() == p->value.data()).all());
    CHECK((q->adam_m.data() == p->adam_m.data()).all());
    CHECK((q->adam_v.data() == p->adam_v.data()).all());
  }
  Checkpoint bare;
  CHECK_THROWS_AS(restore_optimizer_state<float>(bare, params, st), StateError);
}

TEST_CASE("history csv") {
  const auto dir = dunet::testing::scratch_dir("optim_csv");
  std::vector<EpochRecord> h = {{1, 1e-3, 0.5, 0.6, 0.7}, {2, 1e-4, 0.25, 0.3, 0.8}};
  write_history_csv(dir / "h.csv", h);
  std::ifstream in(dir / "h.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,lr,train_loss,val_loss,val_acc");
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 2);
}
