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

#include "dunet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "dunet/errors.hpp"

namespace dunet {

namespace {

Ratio ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return {0.0, false};
  return {static_cast<double>(num) / static_cast<double>(den), true};
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a) + " predictions vs " + std::to_string(b) +
                         " labels");
  }
}

}  // namespace

ConfusionCounts confusion(std::span<const float> prob, std::span<const std::uint8_t> gt, double threshold) {
  require_same_size(prob.size(), gt.size(), "confusion");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  ConfusionCounts c;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const bool predicted = static_cast<double>(prob[i]) >= threshold;
    const bool actual = gt[i] != 0;
    if (predicted) {
      ++(actual ? c.tp : c.fp);
    } else {
      ++(actual ? c.fn : c.tn);
    }
  }
  return c;
}

Ratio accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }
Ratio precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
Ratio sensitivity(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
Ratio specificity(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp); }

Ratio f1(double ppv, double tpr) {
  if (ppv + tpr <= 0.0) return {0.0, false};
  return {2.0 * ppv * tpr / (ppv + tpr), true};
}

Ratio jaccard(std::span<const std::uint8_t> gt, std::span<const std::uint8_t> pred) {
  require_same_size(pred.size(), gt.size(), "jaccard");
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool a = gt[i] != 0, b = pred[i] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return {1.0, false};
  return ratio(inter, uni);
}

Ratio jaccard(const ConfusionCounts& c) {
  const std::uint64_t uni = c.tp + c.fp + c.fn;
  if (uni == 0) return {1.0, false};
  return ratio(c.tp, uni);
}

RocResult roc_auc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
  require_same_size(scores.size(), labels.size(), "roc_auc");
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw NumericError("roc_auc: NaN score at index " + std::to_string(i));
    pos += labels[i] != 0 ? 1 : 0;
  }
  const std::uint64_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw ConfigError("roc_auc needs both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Walk thresholds from high to low. Each tie group moves the curve along a
  // straight segment; twice its trapezoid area is an integer, kept exact.
  RocResult result;
  auto& pts = result.curve.points;
  pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0, twice_area = 0;
  for (std::size_t i = 0; i < order.size();) {
    const float s = scores[order[i]];
    std::uint64_t dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) ++(labels[order[i]] != 0 ? dtp : dfp);
    twice_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    pts.push_back({static_cast<double>(s), static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos)});
  }
  std::reverse(pts.begin(), pts.end());
  result.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return result;
}

MetricSummary summarize(std::span<const float> prob, std::span<const std::uint8_t> gt, double threshold) {
  MetricSummary m;
  m.counts = confusion(prob, gt, threshold);
  m.acc = accuracy(m.counts);
  m.ppv = precision(m.counts);
  m.tpr = sensitivity(m.counts);
  m.tnr = specificity(m.counts);
  m.f1 = f1(m.ppv.value, m.tpr.value);
  m.js = jaccard(m.counts);
  const bool both = m.counts.tp + m.counts.fn > 0 && m.counts.tn + m.counts.fp > 0;
  if (both) {
    m.auc = roc_auc(prob, gt).auc;
  } else {
    m.auc_defined = false;
  }
  return m;
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve.points) out << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

std::string roc_svg(const RocCurve& curve, double auc) {
  constexpr double kSize = 400, kMargin = 50;
  auto px = [](double fpr) { return kMargin + fpr * kSize; };
  auto py = [](double tpr) { return kMargin + (1.0 - tpr) * kSize; };
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  const double full = kSize + 2 * kMargin;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << full << "\" height=\"" << full << "\">\n";
  s << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize << "\" height=\"" << kSize
    << "\" fill=\"white\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
    << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
  s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  // Drop collinear-at-pixel-scale points to keep large curves small.
  double last_x = -1, last_y = -1;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const double x = px(curve.points[i].fpr), y = py(curve.points[i].tpr);
    const bool endpoint = i == 0 || i + 1 == curve.points.size();
    if (!endpoint && std::abs(x - last_x) < 0.5 && std::abs(y - last_y) < 0.5) continue;
    s << x << ',' << y << ' ';
    last_x = x;
    last_y = y;
  }
  s << "\"/>\n";
  s << "<text x=\"" << full / 2 << "\" y=\"" << full - 15 << "\" text-anchor=\"middle\">False positive rate</text>\n";
  s << "<text x=\"15\" y=\"" << full / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << full / 2
    << ")\">True positive rate</text>\n";
  s.precision(4);
  s << "<text x=\"" << px(0.95) << "\" y=\"" << py(0.05) << "\" text-anchor=\"end\">AUC = " << auc << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

void write_roc_svg(const std::filesystem::path& path, const RocCurve& curve, double auc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << roc_svg(curve, auc);
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace dunet
