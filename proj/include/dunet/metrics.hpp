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

#ifndef DUNET_METRICS_HPP_
#define DUNET_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dunet {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

// A pixel is predicted positive iff prob >= threshold; labels are 0 or nonzero.
ConfusionCounts confusion(std::span<const float> prob, std::span<const std::uint8_t> gt, double threshold = 0.5);

// `defined` is false when the denominator was zero; value is then 0
// (or 1 for jaccard of two empty sets).
struct Ratio {
  double value = 0;
  bool defined = true;
};

Ratio accuracy(const ConfusionCounts& c);
Ratio precision(const ConfusionCounts& c);    // PPV
Ratio sensitivity(const ConfusionCounts& c);  // TPR
Ratio specificity(const ConfusionCounts& c);  // TNR
Ratio f1(double ppv, double tpr);
// Foreground-set Jaccard index |GT & SR| / |GT | SR|.
Ratio jaccard(std::span<const std::uint8_t> gt, std::span<const std::uint8_t> pred);
Ratio jaccard(const ConfusionCounts& c);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

// Sorted by increasing threshold. The first point sits at the lowest score
// (fpr = tpr = 1), the last at +inf (fpr = tpr = 0).
struct RocCurve {
  std::vector<RocPoint> points;
};

struct RocResult {
  RocCurve curve;
  double auc = 0;
};

RocResult roc_auc(std::span<const float> scores, std::span<const std::uint8_t> labels);

struct MetricSummary {
  ConfusionCounts counts;
  Ratio acc, ppv, tpr, tnr, f1, js;
  double auc = 0;
  bool auc_defined = true;  // false for single-class ground truth
};

MetricSummary summarize(std::span<const float> prob, std::span<const std::uint8_t> gt, double threshold = 0.5);

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);
std::string roc_svg(const RocCurve& curve, double auc);
void write_roc_svg(const std::filesystem::path& path, const RocCurve& curve, double auc);

}  // namespace dunet

#endif  // DUNET_METRICS_HPP_
