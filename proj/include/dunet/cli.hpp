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

#ifndef DUNET_CLI_HPP_
#define DUNET_CLI_HPP_

#include <atomic>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "dunet/config.hpp"
#include "dunet/data.hpp"
#include "dunet/metrics.hpp"
#include "dunet/preprocess.hpp"
#include "dunet/train.hpp"

namespace dunet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Set from a signal handler to stop `train` after persisting its state.
std::atomic<bool>& cancel_flag();

// Parses argv (argv[0] is the program name) and runs one subcommand.
// Never throws; returns one of the exit codes above.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

void save_normalization(const std::filesystem::path& path, const NormalizationStats& stats);
NormalizationStats load_normalization(const std::filesystem::path& path);

// Writes <out>/<stem>.png per entry, <out>/manifest.tsv pointing at them,
// <out>/normalization.txt and, with `stages`, <out>/stages/<stem>_{1_channel,
// 2_normalized,3_clahe}.png. Statistics come from the training split.
// Returns the number of images written.
std::size_t cmd_preprocess(const DatasetManifest& manifest, const std::filesystem::path& out_dir,
                           const RunConfig& config, bool stages, std::ostream& log);

// Writes <out>/checkpoint.dunc (best validation loss), <out>/last.dunc,
// <out>/history.csv and <out>/config.txt.
TrainResult cmd_train(const DatasetManifest& manifest, const RunConfig& config, const std::filesystem::path& out_dir,
                      std::ostream& log, const std::atomic<bool>* cancel = nullptr);

// Probability maps in memory for one image, [0, 1].
RealImage predict_image(const ModelGraph<float>& model, const GrayImage& image, int stride, int batch_size);

// Writes <out>/prob/<stem>.png (round(255 p)) and <out>/mask/<stem>.png
// (255 where prob >= 128).
void cmd_predict(const std::filesystem::path& checkpoint, const RunConfig& config,
                 const std::vector<std::filesystem::path>& images, const std::filesystem::path& out_dir,
                 std::ostream& log);

struct EvaluationPair {
  std::string name;
  std::filesystem::path prediction;
  std::filesystem::path ground_truth;
};

// Pairs files of equal stem; any file without a partner is an error.
std::vector<EvaluationPair> pair_by_stem(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

struct EvaluationReport {
  std::vector<std::pair<std::string, MetricSummary>> rows;  // per image
  MetricSummary aggregate;                                   // pooled pixels
  RocCurve roc;                                              // pooled pixels
};

// Writes <out>/report.csv, <out>/roc.csv and <out>/roc.svg.
EvaluationReport cmd_evaluate(const std::vector<EvaluationPair>& pairs, const std::filesystem::path& out_dir,
                              double threshold, std::ostream& log);

// Returns true when every suite passes.
bool cmd_gradcheck(std::uint64_t seed, std::ostream& out);

}  // namespace dunet

#endif  // DUNET_CLI_HPP_
