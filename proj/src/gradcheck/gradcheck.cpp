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

#include "dunet/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>

#include "dunet/deform.hpp"
#include "dunet/errors.hpp"
#include "dunet/model.hpp"
#include "dunet/ops.hpp"
#include "dunet/rng.hpp"
#include "dunet/tape.hpp"

namespace dunet {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

GradcheckResult run_gradcheck(const GradcheckSuite& suite) {
  GradcheckResult result;
  result.name = suite.name;
  result.tolerance = suite.tolerance;
  const auto start = std::chrono::steady_clock::now();
  suite.run([&](GradcheckProblem& p) {
    if (p.names.size() != p.wrt.size()) throw ConfigError(suite.name + ": one name per checked tensor required");
    const std::vector<Tensor<double>> grads = p.analytic();
    if (grads.size() != p.wrt.size()) throw StateError(suite.name + ": analytic gradient count mismatch");
    for (std::size_t t = 0; t < p.wrt.size(); ++t) {
      Tensor<double>& x = *p.wrt[t];
      if (grads[t].shape() != x.shape()) throw DimensionError(suite.name + ": gradient shape mismatch for " + p.names[t]);
      for (Index i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + suite.step;
        const double up = p.loss();
        x[i] = saved - suite.step;
        const double down = p.loss();
        x[i] = saved;
        const double numeric = (up - down) / (2 * suite.step);
        const double err = relative_error(grads[t][i], numeric);
        ++result.checked;
        if (err > result.max_rel_error || !std::isfinite(err)) {
          result.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
          result.worst = p.names[t] + "[" + std::to_string(i) + "]";
        }
      }
    }
  });
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

namespace {

using Op = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

Tensor<double> uniform(CounterRng& rng, Shape shape, double lo, double hi) {
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Uniform magnitude in [lo, hi] with a random sign; keeps values off zero.
Tensor<double> off_zero(CounterRng& rng, Shape shape, double lo, double hi) {
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = (rng.below(2) == 0 ? -1.0 : 1.0) * rng.uniform(lo, hi);
  return t;
}

// Distinct values spaced 0.01 apart in random order, so max-pool has no ties.
Tensor<double> distinct(CounterRng& rng, Shape shape) {
  Tensor<double> t(std::move(shape));
  std::vector<Index> perm(static_cast<std::size_t>(t.size()));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  for (Index i = 0; i < t.size(); ++i) t[i] = 0.01 * static_cast<double>(perm[static_cast<std::size_t>(i)]) - 0.3;
  return t;
}

// Reduces an op to a scalar with fixed random weights so every output element
// contributes a distinct amount.
GradcheckSuite op_suite(std::string name, std::vector<std::string> names, std::vector<Tensor<double>> inputs, Op op,
                        CounterRng& rng, bool scalar_output = false) {
  GradcheckSuite suite;
  suite.name = std::move(name);
  auto weights = std::make_shared<Tensor<double>>(Shape{1});
  if (!scalar_output) {
    Tape<double> probe;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(probe.constant(t));
    *weights = uniform(rng, op(probe, vars).shape(), -1, 1);
  }
  auto reduce = [op, weights, scalar_output](Tape<double>& tape, const std::vector<Var<double>>& vars) {
    Var<double> out = op(tape, vars);
    return scalar_output ? out : weighted_sum(out, *weights);
  };
  suite.run = [names, inputs, reduce](const std::function<void(GradcheckProblem&)>& check) {
    std::vector<Tensor<double>> values = inputs;
    GradcheckProblem p;
    p.names = names;
    for (auto& v : values) p.wrt.push_back(&v);
    p.loss = [&] {
      Tape<double> tape;
      std::vector<Var<double>> vars;
      for (const auto& v : values) vars.push_back(tape.constant(v));
      return reduce(tape, vars).value()[0];
    };
    p.analytic = [&] {
      Tape<double> tape;
      std::vector<Var<double>> vars;
      for (const auto& v : values) vars.push_back(tape.variable(v));
      tape.backward(reduce(tape, vars));
      std::vector<Tensor<double>> grads;
      for (const auto& v : vars) grads.push_back(tape.grad(v));
      return grads;
    };
    check(p);
  };
  return suite;
}

GradcheckSuite bilinear_suite(CounterRng& rng) {
  constexpr int kPoints = 24;
  Tensor<double> x = uniform(rng, Shape{1, 2, 4, 5}, -1, 1);
  // Integer part in [-1, 4] (partly outside the plane), fractional part away
  // from the cell boundaries.
  Tensor<double> pos(Shape{kPoints, 2});
  std::vector<double> coef(kPoints);
  std::vector<Index> chan(kPoints);
  for (int k = 0; k < kPoints; ++k) {
    pos[2 * k] = static_cast<double>(rng.below(6)) - 1.0 + rng.uniform(0.1, 0.9);
    pos[2 * k + 1] = static_cast<double>(rng.below(7)) - 1.0 + rng.uniform(0.1, 0.9);
    coef[static_cast<std::size_t>(k)] = rng.uniform(-1, 1);
    chan[static_cast<std::size_t>(k)] = static_cast<Index>(rng.below(2));
  }
  GradcheckSuite suite;
  suite.name = "bilinear_sample";
  suite.run = [x, pos, coef, chan](const std::function<void(GradcheckProblem&)>& check) {
    Tensor<double> xs = x, ps = pos;
    GradcheckProblem p;
    p.names = {"x", "position"};
    p.wrt = {&xs, &ps};
    p.loss = [&] {
      double total = 0;
      for (int k = 0; k < kPoints; ++k) {
        total += coef[static_cast<std::size_t>(k)] *
                 bilinear_sample(xs, ps[2 * k], ps[2 * k + 1], Index{0}, chan[static_cast<std::size_t>(k)]);
      }
      return total;
    };
    p.analytic = [&] {
      Tensor<double> gx = Tensor<double>::zeros_like(xs), gp = Tensor<double>::zeros_like(ps);
      const Index plane = xs.dim(2) * xs.dim(3);
      for (int k = 0; k < kPoints; ++k) {
        const double a = coef[static_cast<std::size_t>(k)];
        const Index c = chan[static_cast<std::size_t>(k)];
        const auto s = bilinear_stencil(xs.dim(2), xs.dim(3), ps[2 * k], ps[2 * k + 1]);
        for (int j = 0; j < 4; ++j) {
          if (s.index[static_cast<std::size_t>(j)] >= 0) {
            gx[c * plane + s.index[static_cast<std::size_t>(j)]] += a * s.weight[static_cast<std::size_t>(j)];
          }
        }
        const auto [dy, dx] = bilinear_position_grad(xs, ps[2 * k], ps[2 * k + 1], Index{0}, c);
        gp[2 * k] += a * dy;
        gp[2 * k + 1] += a * dx;
      }
      return std::vector<Tensor<double>>{gx, gp};
    };
    check(p);
  };
  return suite;
}

GradcheckSuite end_to_end_suite(std::uint64_t seed) {
  GradcheckSuite suite;
  suite.name = "dunet_end_to_end";
  suite.tolerance = 1e-3;
  // Thousands of ReLU, pooling and bilinear kinks; a small step makes
  // crossing one during a perturbation unlikely.
  suite.step = 1e-6;
  suite.run = [seed](const std::function<void(GradcheckProblem&)>& check) {
    ModelConfig cfg;
    cfg.arch = Arch::kDunet;
    cfg.depth = 2;
    cfg.base_filters = 2;
    cfg.input_size = 8;
    ModelGraph<double> model = ModelGraph<double>::build(cfg, seed);
    CounterRng rng(seed, 0xE2E);
    // Non-zero offsets so sampling positions are fractional.
    for (Parameter<double>* param : model.parameters()) {
      if (param->name.ends_with(".offset.weight")) {
        for (Index i = 0; i < param->value.size(); ++i) param->value[i] = rng.uniform(-0.3, 0.3);
      }
    }
    Tensor<double> x = uniform(rng, Shape{2, 1, 8, 8}, 0, 1);
    Tensor<double> target(Shape{2, 1, 8, 8});
    for (Index i = 0; i < target.size(); ++i) target[i] = static_cast<double>(rng.below(2));

    GradcheckProblem p;
    for (Parameter<double>* param : model.parameters()) {
      p.names.push_back(param->name);
      p.wrt.push_back(&param->value);
    }
    p.names.push_back("input");
    p.wrt.push_back(&x);
    p.loss = [&] {
      Tape<double> tape;
      Var<double> pred = model.forward(tape, tape.constant(x), Mode::kTrain);
      return bce_loss(pred, tape.constant(target)).value()[0];
    };
    p.analytic = [&] {
      model.store().zero_grad();
      Tape<double> tape;
      Var<double> xv = tape.variable(x);
      Var<double> pred = model.forward(tape, xv, Mode::kTrain);
      tape.backward(bce_loss(pred, tape.constant(target)));
      std::vector<Tensor<double>> grads;
      for (Parameter<double>* param : model.parameters()) grads.push_back(param->grad);
      grads.push_back(tape.grad(xv));
      return grads;
    };
    check(p);
  };
  return suite;
}

}  // namespace

std::vector<GradcheckSuite> default_gradcheck_suites(std::uint64_t seed) {
  std::vector<GradcheckSuite> suites;
  CounterRng rng(seed, 0x6C);

  suites.push_back(op_suite(
      "conv2d", {"x", "weight", "bias"},
      {uniform(rng, Shape{2, 3, 5, 5}, -1, 1), uniform(rng, Shape{4, 3, 3, 3}, -1, 1), uniform(rng, Shape{4}, -1, 1)},
      [](Tape<double>&, const std::vector<Var<double>>& v) { return conv2d(v[0], v[1], v[2], 1, 1); }, rng));
  suites.push_back(op_suite(
      "conv2d_stride2", {"x", "weight", "bias"},
      {uniform(rng, Shape{2, 2, 7, 7}, -1, 1), uniform(rng, Shape{3, 2, 3, 3}, -1, 1), uniform(rng, Shape{3}, -1, 1)},
      [](Tape<double>&, const std::vector<Var<double>>& v) { return conv2d(v[0], v[1], v[2], 2, 0); }, rng));

  auto bn_state = std::make_shared<BatchNormState<double>>(3);
  suites.push_back(op_suite(
      "batchnorm2d", {"x", "gamma", "beta"},
      {uniform(rng, Shape{3, 3, 4, 4}, -2, 2), uniform(rng, Shape{3}, 0.5, 1.5), uniform(rng, Shape{3}, -1, 1)},
      [bn_state](Tape<double>&, const std::vector<Var<double>>& v) {
        return batchnorm2d(v[0], v[1], v[2], *bn_state, Mode::kTrain);
      },
      rng));
  auto bn_infer = std::make_shared<BatchNormState<double>>(3);
  bn_infer->running_mean = uniform(rng, Shape{3}, -0.5, 0.5);
  bn_infer->running_var = uniform(rng, Shape{3}, 0.5, 2.0);
  bn_infer->initialized = true;
  suites.push_back(op_suite(
      "batchnorm2d_infer", {"x", "gamma", "beta"},
      {uniform(rng, Shape{2, 3, 3, 3}, -2, 2), uniform(rng, Shape{3}, 0.5, 1.5), uniform(rng, Shape{3}, -1, 1)},
      [bn_infer](Tape<double>&, const std::vector<Var<double>>& v) {
        return batchnorm2d(v[0], v[1], v[2], *bn_infer, Mode::kInfer);
      },
      rng));

  suites.push_back(op_suite("maxpool2d", {"x"}, {distinct(rng, Shape{2, 2, 4, 6})},
                            [](Tape<double>&, const std::vector<Var<double>>& v) { return maxpool2d(v[0]); }, rng));
  suites.push_back(op_suite("upsample2d", {"x"}, {uniform(rng, Shape{2, 2, 3, 3}, -1, 1)},
                            [](Tape<double>&, const std::vector<Var<double>>& v) { return upsample2d(v[0]); }, rng));
  suites.push_back(op_suite(
      "concat_channels", {"a", "b"}, {uniform(rng, Shape{2, 2, 3, 3}, -1, 1), uniform(rng, Shape{2, 3, 3, 3}, -1, 1)},
      [](Tape<double>&, const std::vector<Var<double>>& v) { return concat_channels(v[0], v[1]); }, rng));
  suites.push_back(op_suite("sigmoid", {"x"}, {uniform(rng, Shape{2, 1, 4, 4}, -6, 6)},
                            [](Tape<double>&, const std::vector<Var<double>>& v) { return sigmoid(v[0]); }, rng));
  suites.push_back(op_suite("relu", {"x"}, {off_zero(rng, Shape{2, 2, 4, 4}, 0.05, 2)},
                            [](Tape<double>&, const std::vector<Var<double>>& v) { return relu(v[0]); }, rng));

  Tensor<double> target(Shape{2, 1, 4, 4});
  for (Index i = 0; i < target.size(); ++i) target[i] = static_cast<double>(rng.below(2));
  // Predictions stay away from 0 and 1, where the central-difference error of
  // -log p grows like h^2 / p^2.
  suites.push_back(op_suite(
      "bce_loss", {"pred"}, {uniform(rng, Shape{2, 1, 4, 4}, 0.15, 0.85)},
      [target](Tape<double>& tape, const std::vector<Var<double>>& v) { return bce_loss(v[0], tape.constant(target)); },
      rng, true));

  suites.push_back(bilinear_suite(rng));

  // Offsets keep every sampling position at least 0.15 from a grid line.
  Tensor<double> offsets(Shape{2, 18, 5, 5});
  for (Index i = 0; i < offsets.size(); ++i) {
    offsets[i] = static_cast<double>(rng.below(5)) - 2.0 + rng.uniform(0.15, 0.85);
  }
  suites.push_back(op_suite(
      "deformable_conv2d", {"x", "weight", "offsets", "bias"},
      {uniform(rng, Shape{2, 2, 5, 5}, -1, 1), uniform(rng, Shape{3, 2, 3, 3}, -1, 1), offsets,
       uniform(rng, Shape{3}, -1, 1)},
      [](Tape<double>&, const std::vector<Var<double>>& v) { return deformable_conv2d(v[0], v[1], v[2], v[3]); },
      rng));

  suites.push_back(end_to_end_suite(seed));
  return suites;
}

}  // namespace dunet
