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

#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dunet/errors.hpp"
#include "dunet/metrics.hpp"
#include "support.hpp"

using namespace dunet;
using dunet::testing::pairwise_auc;
using dunet::testing::random_int;

namespace {

std::vector<std::uint8_t> random_labels(CounterRng& rng, std::size_t n, double p = 0.5) {
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = rng.uniform() < p ? 1 : 0;
  return v;
}

std::vector<float> random_scores(CounterRng& rng, std::size_t n, int levels = 0) {
  std::vector<float> v(n);
  for (auto& x : v) {
    x = levels > 0 ? static_cast<float>(random_int(rng, 0, levels - 1)) / static_cast<float>(levels)
                   : static_cast<float>(rng.uniform());
  }
  return v;
}

bool both_classes(const std::vector<std::uint8_t>& l) {
  return std::count(l.begin(), l.end(), 1) > 0 && std::count(l.begin(), l.end(), 0) > 0;
}

}  // namespace

TEST_CASE("confusion examples") {
  const std::vector<float> exact = {0, 1, 1, 0, 1};
  const std::vector<std::uint8_t> gt = {0, 1, 1, 0, 1};
  for (double t : {0.01, 0.5, 1.0}) {
    const auto c = confusion(exact, gt, t);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
  }
  const std::vector<float> ones(10, 1.0f);
  const std::vector<std::uint8_t> half = {1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
  CHECK(confusion(ones, half) == ConfusionCounts{5, 5, 0, 0});
  // Threshold is inclusive.
  CHECK(confusion(std::vector<float>{0.5f}, std::vector<std::uint8_t>{1}).tp == 1);
  CHECK_THROWS_AS(confusion(ones, gt), DimensionError);
  CHECK_THROWS_AS(confusion(exact, gt, 1.5), ConfigError);
}

TEST_CASE("confusion equals a per-pixel tally") {
  CounterRng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto prob = random_scores(rng, 20);
    const auto gt = random_labels(rng, 20);
    const double t = rng.uniform();
    ConfusionCounts ref;
    for (std::size_t i = 0; i < 20; ++i) {
      const bool p = prob[i] >= t, g = gt[i] != 0;
      if (p && g) ++ref.tp;
      if (p && !g) ++ref.fp;
      if (!p && !g) ++ref.tn;
      if (!p && g) ++ref.fn;
    }
    CHECK(confusion(prob, gt, t) == ref);
  }
}

TEST_CASE("rate examples") {
  const ConfusionCounts perfect{5, 0, 5, 0};
  CHECK(accuracy(perfect).value == 1.0);
  CHECK(precision(perfect).value == 1.0);
  CHECK(sensitivity(perfect).value == 1.0);
  CHECK(specificity(perfect).value == 1.0);
  const ConfusionCounts c{3, 1, 5, 1};
  CHECK(precision(c).value == doctest::Approx(0.75));
  CHECK(sensitivity(c).value == doctest::Approx(0.75));
  CHECK(specificity(c).value == doctest::Approx(5.0 / 6.0));
  CHECK(accuracy(c).value == doctest::Approx(0.8));
  const Ratio empty_ppv = precision(ConfusionCounts{0, 0, 4, 2});
  CHECK(empty_ppv.value == 0.0);
  CHECK_FALSE(empty_ppv.defined);
}

TEST_CASE("rates stay in the unit interval and accuracy is exact") {
  CounterRng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const ConfusionCounts c{static_cast<std::uint64_t>(random_int(rng, 0, 30)),
                            static_cast<std::uint64_t>(random_int(rng, 0, 30)),
                            static_cast<std::uint64_t>(random_int(rng, 0, 30)),
                            static_cast<std::uint64_t>(random_int(rng, 0, 30))};
    if (c.total() == 0) continue;
    CHECK(accuracy(c).value == static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()));
    for (const Ratio r : {accuracy(c), precision(c), sensitivity(c), specificity(c)}) {
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
    }
  }
}

TEST_CASE("f1 and jaccard") {
  CounterRng rng(3);
  for (int i = 0; i < 20; ++i) {
    const double p = rng.uniform(0.01, 1);
    CHECK(f1(p, p).value == doctest::Approx(p));
  }
  CHECK_FALSE(f1(0, 0).defined);
  const std::vector<std::uint8_t> a = {1, 1, 0, 0}, b = {0, 0, 1, 1}, none = {0, 0, 0, 0};
  CHECK(jaccard(a, b).value == 0.0);
  const Ratio both_empty = jaccard(none, none);
  CHECK(both_empty.value == 1.0);
  CHECK_FALSE(both_empty.defined);
  CHECK_THROWS_AS(jaccard(a, std::vector<std::uint8_t>{1}), DimensionError);
}

TEST_CASE("jaccard equals F1/(2-F1) on random masks") {
  CounterRng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = static_cast<std::size_t>(random_int(rng, 1, 60));
    const auto gt = random_labels(rng, n, rng.uniform());
    const auto pred = random_labels(rng, n, rng.uniform());
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < n; ++i) {
      inter += (gt[i] && pred[i]) ? 1 : 0;
      uni += (gt[i] || pred[i]) ? 1 : 0;
    }
    if (uni == 0) continue;
    const double j = jaccard(gt, pred).value;
    CHECK(j == doctest::Approx(static_cast<double>(inter) / static_cast<double>(uni)));
    std::vector<float> prob(pred.begin(), pred.end());
    const auto c = confusion(prob, gt);
    CHECK(jaccard(c).value == doctest::Approx(j));
    if (inter == 0) continue;
    const double f = f1(precision(c).value, sensitivity(c).value).value;
    CHECK(j == doctest::Approx(f / (2 - f)).epsilon(1e-12));
    CHECK(f >= j);
  }
}

TEST_CASE("auc equals the pairwise statistic") {
  CounterRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto labels = random_labels(rng, 200);
    if (!both_classes(labels)) continue;
    const auto scores = random_scores(rng, 200, trial % 2 == 0 ? 0 : 7);  // odd trials are tie-heavy
    CHECK(std::abs(roc_auc(scores, labels).auc - pairwise_auc(scores, labels)) <= 1e-12);
  }
}

TEST_CASE("auc equals trapezoids over the returned curve") {
  CounterRng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto labels = random_labels(rng, 80);
    if (!both_classes(labels)) continue;
    const auto scores = random_scores(rng, 80, 10);
    const auto r = roc_auc(scores, labels);
    double area = 0;
    for (std::size_t i = 1; i < r.curve.points.size(); ++i) {
      const auto& a = r.curve.points[i - 1];
      const auto& b = r.curve.points[i];
      area += (a.fpr - b.fpr) * (a.tpr + b.tpr) / 2;
    }
    CHECK(area == doctest::Approx(r.auc).epsilon(1e-12));
  }
}

TEST_CASE("auc properties") {
  CounterRng rng(7);
  std::vector<float> sep = {0.1f, 0.2f, 0.3f, 0.7f, 0.8f};
  std::vector<std::uint8_t> lab = {0, 0, 0, 1, 1};
  CHECK(roc_auc(sep, lab).auc == 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto labels = random_labels(rng, 60);
    if (!both_classes(labels)) continue;
    auto scores = random_scores(rng, 60);
    std::vector<float> neg(scores.size());
    std::transform(scores.begin(), scores.end(), neg.begin(), [](float s) { return -s; });
    const double a = roc_auc(scores, labels).auc;
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(a + roc_auc(neg, labels).auc == doctest::Approx(1.0).epsilon(1e-12));
  }
  const auto labels = random_labels(rng, 20000);
  const auto scores = random_scores(rng, 20000);
  CHECK(std::abs(roc_auc(scores, labels).auc - 0.5) < 0.02);
}

TEST_CASE("roc curve shape") {
  CounterRng rng(8);
  const auto labels = random_labels(rng, 100);
  const auto scores = random_scores(rng, 100, 13);
  const auto curve = roc_auc(scores, labels).curve;
  REQUIRE(curve.points.size() >= 2);
  CHECK(curve.points.front().fpr == 1.0);
  CHECK(curve.points.front().tpr == 1.0);
  CHECK(curve.points.back().fpr == 0.0);
  CHECK(curve.points.back().tpr == 0.0);
  CHECK(std::isinf(curve.points.back().threshold));
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i - 1].threshold < curve.points[i].threshold);
    CHECK(curve.points[i - 1].fpr >= curve.points[i].fpr);
    CHECK(curve.points[i - 1].tpr >= curve.points[i].tpr);
  }
}

TEST_CASE("auc errors") {
  const std::vector<float> s = {0.1f, 0.4f};
  CHECK_THROWS_AS(roc_auc(s, std::vector<std::uint8_t>{1, 1}), ConfigError);
  CHECK_THROWS_AS(roc_auc(s, std::vector<std::uint8_t>{1}), DimensionError);
  CHECK_THROWS_AS(roc_auc(std::vector<float>{NAN, 0.3f}, std::vector<std::uint8_t>{1, 0}), NumericError);
}

TEST_CASE("summary flags single-class ground truth") {
  const std::vector<float> prob = {0.2f, 0.9f, 0.4f};
  const auto s = summarize(prob, std::vector<std::uint8_t>{0, 0, 0});
  CHECK_FALSE(s.auc_defined);
  CHECK(s.acc.value == doctest::Approx(2.0 / 3.0));
  const auto t = summarize(prob, std::vector<std::uint8_t>{0, 1, 0});
  CHECK(t.auc_defined);
  CHECK(t.auc == 1.0);
  CHECK(t.f1.value == 1.0);
  CHECK(t.js.value == 1.0);
}

TEST_CASE("roc csv and svg output") {
  const std::vector<float> s = {0.1f, 0.4f, 0.35f, 0.8f};
  const std::vector<std::uint8_t> l = {0, 0, 1, 1};
  const auto r = roc_auc(s, l);
  const auto dir = dunet::testing::scratch_dir("metrics_roc");
  write_roc_csv(dir / "roc.csv", r.curve);
  std::ifstream in(dir / "roc.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "threshold,fpr,tpr");
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += line.empty() ? 0 : 1;
  CHECK(rows == r.curve.points.size());
  const std::string svg = roc_svg(r.curve, r.auc);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("0.75") != std::string::npos);
}
