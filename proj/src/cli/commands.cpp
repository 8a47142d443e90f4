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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dunet/cli.hpp"
#include "dunet/errors.hpp"
#include "dunet/gradcheck.hpp"
#include "dunet/patches.hpp"
#include "dunet/rng.hpp"

namespace dunet {

namespace fs = std::filesystem;

std::atomic<bool>& cancel_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

void save_normalization(const fs::path& path, const NormalizationStats& stats) {
  std::ofstream out(path, std::ios::trunc);
  out << "mean = " << format_double(stats.mean) << "\nstd = " << format_double(stats.std)
      << "\nz_min = " << format_double(stats.z_min) << "\nz_max = " << format_double(stats.z_max) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

NormalizationStats load_normalization(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  NormalizationStats s;
  std::map<std::string, double*> slots{{"mean", &s.mean}, {"std", &s.std}, {"z_min", &s.z_min}, {"z_max", &s.z_max}};
  std::string key, eq, value;
  while (in >> key >> eq >> value) {
    auto it = slots.find(key);
    if (it == slots.end() || eq != "=") throw ConfigError(path.string() + ": unexpected entry '" + key + "'");
    *it->second = parse_double(value, key);
  }
  return s;
}

namespace {

void require_unique_stems(const std::vector<fs::path>& paths) {
  std::set<std::string> stems;
  for (const fs::path& p : paths) {
    if (!stems.insert(p.stem().string()).second) {
      throw ConfigError("two inputs share the file stem '" + p.stem().string() + "'");
    }
  }
}

GrayImage single_channel(const Image8& img, ChannelMode mode) {
  return img.channels == 1 ? to_gray_plane(img) : to_single_channel(img, mode);
}

}  // namespace

std::size_t cmd_preprocess(const DatasetManifest& manifest, const fs::path& out_dir, const RunConfig& config,
                           bool stages, std::ostream& log) {
  if (manifest.entries.empty()) {
    log << "warning: manifest has no entries; nothing to preprocess\n";
    return 0;
  }
  std::vector<fs::path> inputs;
  for (const ManifestEntry& e : manifest.entries) inputs.push_back(e.image);
  require_unique_stems(inputs);

  std::vector<GrayImage> reference;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split == Split::kTrain) reference.push_back(single_channel(read_image(e.image), config.preprocess.channel_mode));
  }
  if (reference.empty()) {
    log << "warning: no training images; normalization statistics use every image\n";
    for (const ManifestEntry& e : manifest.entries) {
      reference.push_back(single_channel(read_image(e.image), config.preprocess.channel_mode));
    }
  }
  const NormalizationStats stats = normalization_stats(reference);
  reference.clear();

  fs::create_directories(out_dir);
  if (stages) fs::create_directories(out_dir / "stages");
  DatasetManifest written;
  written.name = manifest.name;
  written.train_patches = manifest.train_patches;
  written.val_patches = manifest.val_patches;
  for (const ManifestEntry& e : manifest.entries) {
    const std::string stem = e.image.stem().string();
    const PreprocessStages s = preprocess(read_image(e.image), stats, config.preprocess);
    write_gray(out_dir / (stem + ".png"), s.corrected);
    if (stages) {
      write_gray(out_dir / "stages" / (stem + "_1_channel.png"), s.single_channel);
      write_gray(out_dir / "stages" / (stem + "_2_normalized.png"), s.normalized);
      write_gray(out_dir / "stages" / (stem + "_3_clahe.png"), s.equalized);
    }
    written.entries.push_back({stem + ".png", fs::absolute(e.ground_truth).lexically_normal(), e.split});
    log << "preprocessed " << e.image.string() << '\n';
  }
  save_normalization(out_dir / "normalization.txt", stats);
  std::ofstream out(out_dir / "manifest.tsv", std::ios::trunc);
  out << format_manifest(written);
  if (!out) throw IoError("cannot write " + (out_dir / "manifest.tsv").string());
  return manifest.entries.size();
}

TrainResult cmd_train(const DatasetManifest& manifest, const RunConfig& config, const fs::path& out_dir,
                      std::ostream& log, const std::atomic<bool>* cancel) {
  config.validate();
  if (config.model.in_channels != 1) throw ConfigError("training expects single-channel images (in_channels = 1)");
  const auto entries = manifest.select(Split::kTrain);
  if (entries.empty()) throw ConfigError("manifest has no training images");
  const int n_train = config.train_patches >= 0 ? config.train_patches : manifest.train_patches;
  const int n_val = config.val_patches >= 0 ? config.val_patches : manifest.val_patches;
  const int size = config.model.input_size;

  // Training and validation patches come from the same images but from
  // independent streams.
  const std::uint64_t train_seed = splitmix64(config.seed ^ 0x747261696EULL);
  const std::uint64_t val_seed = splitmix64(config.seed ^ 0x76616CULL);
  PatchSet train_set, val_set;
  train_set.size = val_set.size = size;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const RealImage image = to_unit(read_gray(entries[k].image));
    const GrayImage gt = read_gray(entries[k].ground_truth);
    const int id = static_cast<int>(k);
    train_set.append(sample_patches(image, gt, n_train, size, train_seed, id));
    val_set.append(sample_patches(image, gt, n_val, size, val_seed, id));
  }
  log << "sampled " << train_set.count() << " training and " << val_set.count() << " validation patches from "
      << entries.size() << " images\n";

  ModelGraph<float> model = ModelGraph<float>::build(config.model, config.seed);
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  fs::create_directories(out_dir);
  TrainHooks hooks;
  hooks.cancel = cancel;
  hooks.last_checkpoint = out_dir / "last.dunc";
  hooks.on_epoch = [&log](const EpochRecord& r) {
    log << "epoch " << r.epoch << "  lr " << r.lr << "  train_loss " << r.train_loss << "  val_loss " << r.val_loss
        << "  val_acc " << r.val_acc << std::endl;
  };
  TrainResult result = train(model, train_set, val_set, tc, hooks);
  if (!result.history.empty()) save_checkpoint(result.best, out_dir / "checkpoint.dunc");
  write_history_csv(out_dir / "history.csv", result.history);
  save_config(out_dir / "config.txt", config);
  if (result.early_stopped) log << "stopped early after epoch " << result.history.back().epoch << '\n';
  return result;
}

RealImage predict_image(const ModelGraph<float>& model, const GrayImage& image, int stride, int batch_size) {
  const int size = model.config().input_size;
  auto [layout, tiles] = tile(to_unit(image), size, stride);
  std::vector<RealImage> out;
  out.reserve(tiles.size());
  for (std::size_t start = 0; start < tiles.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(tiles.size() - start, static_cast<std::size_t>(batch_size));
    Tensor<float> x(Shape{static_cast<Index>(count), 1, size, size});
    for (std::size_t i = 0; i < count; ++i) {
      Eigen::Map<RealImage>(x.plane(static_cast<Index>(i), 0), size, size) = tiles[start + i];
    }
    const Tensor<float> p = model.predict(x);
    for (std::size_t i = 0; i < count; ++i) {
      out.emplace_back(Eigen::Map<const RealImage>(p.plane(static_cast<Index>(i), 0), size, size));
    }
  }
  return recompose(layout, out);
}

void cmd_predict(const fs::path& checkpoint, const RunConfig& config, const std::vector<fs::path>& images,
                 const fs::path& out_dir, std::ostream& log) {
  config.validate();
  require_unique_stems(images);
  ModelGraph<float> model = ModelGraph<float>::build(config.model, config.seed);
  model.load_checkpoint(load_checkpoint(checkpoint));
  fs::create_directories(out_dir / "prob");
  fs::create_directories(out_dir / "mask");
  for (const fs::path& path : images) {
    const RealImage prob = predict_image(model, read_gray(path), config.stride, config.train.batch_size);
    GrayImage prob8(prob.rows(), prob.cols()), mask(prob.rows(), prob.cols());
    for (Index i = 0; i < prob.size(); ++i) {
      const long v = std::lround(255.0 * std::clamp(static_cast<double>(prob(i)), 0.0, 1.0));
      prob8(i) = static_cast<std::uint8_t>(v);
      mask(i) = v >= 128 ? 255 : 0;
    }
    const std::string name = path.stem().string() + ".png";
    write_gray(out_dir / "prob" / name, prob8);
    write_gray(out_dir / "mask" / name, mask);
    log << "predicted " << path.string() << '\n';
  }
}

std::vector<EvaluationPair> pair_by_stem(const fs::path& pred_dir, const fs::path& gt_dir) {
  auto listing = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("missing directory " + dir.string());
    std::map<std::string, fs::path> files;
    for (const auto& item : fs::directory_iterator(dir)) {
      if (!item.is_regular_file()) continue;
      const std::string ext = item.path().extension().string();
      if (ext != ".png" && ext != ".pgm" && ext != ".ppm") continue;
      if (!files.emplace(item.path().stem().string(), item.path()).second) {
        throw ConfigError("two files share the stem '" + item.path().stem().string() + "' in " + dir.string());
      }
    }
    return files;
  };
  const auto preds = listing(pred_dir);
  const auto gts = listing(gt_dir);
  std::vector<EvaluationPair> pairs;
  for (const auto& [stem, path] : preds) {
    auto it = gts.find(stem);
    if (it == gts.end()) throw ConfigError("no ground truth for prediction " + path.string());
    pairs.push_back({stem, path, it->second});
  }
  for (const auto& [stem, path] : gts) {
    if (preds.count(stem) == 0) throw ConfigError("no prediction for ground truth " + path.string());
  }
  return pairs;
}

namespace {

std::string csv_row(const std::string& name, const MetricSummary& m) {
  std::ostringstream row;
  row << name << ',' << m.counts.tp << ',' << m.counts.fp << ',' << m.counts.tn << ',' << m.counts.fn;
  for (const Ratio* r : {&m.acc, &m.ppv, &m.tpr, &m.tnr, &m.f1, &m.js}) row << ',' << format_double(r->value);
  row << ',' << (m.auc_defined ? format_double(m.auc) : std::string("nan")) << ',';
  std::vector<std::string> warn;
  const std::pair<const char*, const Ratio*> named[] = {{"acc", &m.acc}, {"ppv", &m.ppv}, {"tpr", &m.tpr},
                                                        {"tnr", &m.tnr}, {"f1", &m.f1},   {"js", &m.js}};
  for (const auto& [label, r] : named) {
    if (!r->defined) warn.push_back(label);
  }
  if (!m.auc_defined) warn.push_back("auc");
  for (std::size_t i = 0; i < warn.size(); ++i) row << (i ? ";" : "") << warn[i];
  return row.str();
}

}  // namespace

EvaluationReport cmd_evaluate(const std::vector<EvaluationPair>& pairs, const fs::path& out_dir, double threshold,
                              std::ostream& log) {
  if (pairs.empty()) throw ConfigError("nothing to evaluate");
  EvaluationReport report;
  std::vector<float> pooled_scores;
  std::vector<std::uint8_t> pooled_labels;
  for (const EvaluationPair& pair : pairs) {
    const GrayImage pred = read_gray(pair.prediction);
    const Mask gt = binarize(read_gray(pair.ground_truth));
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
      throw DimensionError("prediction " + pair.prediction.string() + " and ground truth " +
                           pair.ground_truth.string() + " differ in size");
    }
    const RealImage scores = to_unit(pred);
    const std::span<const float> s(scores.data(), static_cast<std::size_t>(scores.size()));
    const std::span<const std::uint8_t> l(gt.data(), static_cast<std::size_t>(gt.size()));
    report.rows.emplace_back(pair.name, summarize(s, l, threshold));
    pooled_scores.insert(pooled_scores.end(), s.begin(), s.end());
    pooled_labels.insert(pooled_labels.end(), l.begin(), l.end());
  }
  report.aggregate = summarize(pooled_scores, pooled_labels, threshold);

  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "report.csv", std::ios::trunc);
  csv << "image,tp,fp,tn,fn,acc,ppv,tpr,tnr,f1,js,auc,warnings\n";
  for (const auto& [name, m] : report.rows) csv << csv_row(name, m) << '\n';
  csv << csv_row("aggregate", report.aggregate) << '\n';
  if (!csv) throw IoError("cannot write " + (out_dir / "report.csv").string());
  if (report.aggregate.auc_defined) {
    report.roc = roc_auc(pooled_scores, pooled_labels).curve;
    write_roc_csv(out_dir / "roc.csv", report.roc);
    write_roc_svg(out_dir / "roc.svg", report.roc, report.aggregate.auc);
  } else {
    log << "warning: pooled ground truth has a single class; no ROC curve written\n";
  }
  log << "aggregate  acc " << report.aggregate.acc.value << "  auc " << report.aggregate.auc << "  f1 "
      << report.aggregate.f1.value << '\n';
  return report;
}

bool cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
  bool all = true;
  for (const GradcheckSuite& suite : default_gradcheck_suites(seed)) {
    const GradcheckResult r = run_gradcheck(suite);
    all = all && r.passed();
    out << (r.passed() ? "PASS " : "FAIL ") << r.name << "  max_rel_error " << r.max_rel_error << "  tolerance "
        << r.tolerance << "  worst " << r.worst << "  checks " << r.checked << '\n';
  }
  return all;
}

namespace {

struct CommonFlags {
  std::string config;
  std::string manifest;
  std::string out;
  std::string arch;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* stride_opt = nullptr;
  CLI::Option* threshold_opt = nullptr;
  int stride = 0;
  double threshold = 0;
};

RunConfig resolve(const CommonFlags& f, RunConfig base = {}) {
  RunConfig c = f.config.empty() ? base : load_config(f.config, base);
  if (!f.manifest.empty()) c.manifest = f.manifest;
  if (!f.out.empty()) c.out = f.out;
  if (!f.arch.empty()) c.model.arch = parse_arch(f.arch);
  if (f.seed_opt != nullptr && f.seed_opt->count() > 0) c.seed = f.seed;
  if (f.stride_opt != nullptr && f.stride_opt->count() > 0) c.stride = f.stride;
  if (f.threshold_opt != nullptr && f.threshold_opt->count() > 0) c.threshold = f.threshold;
  c.validate();
  return c;
}

const std::string& require(const std::string& value, const std::string& what) {
  if (value.empty()) throw ConfigError(what + " is required");
  return value;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retinal vessel segmentation with deformable U-Nets"};
  app.require_subcommand(1);
  CommonFlags f;
  auto add_common = [&f](CLI::App* cmd) {
    cmd->add_option("--config", f.config, "key = value configuration file");
    f.seed_opt = cmd->add_option("--seed", f.seed, "seed for every random choice");
  };

  CLI::App* pre = app.add_subcommand("preprocess", "channel extraction, normalization, CLAHE and gamma");
  add_common(pre);
  pre->add_option("--manifest", f.manifest, "manifest file or preset (drive:DIR, stare:DIR, chase:DIR)");
  pre->add_option("--out", f.out, "output directory");
  bool stages = false;
  pre->add_flag("--stages", stages, "also write the intermediate stages");

  CLI::App* tr = app.add_subcommand("train", "sample patches and train a model");
  add_common(tr);
  tr->add_option("--manifest", f.manifest, "manifest of preprocessed images");
  tr->add_option("--out", f.out, "output directory");
  tr->add_option("--arch", f.arch, "dunet or unet");

  CLI::App* pr = app.add_subcommand("predict", "probability maps and masks for images");
  add_common(pr);
  std::string checkpoint;
  std::vector<std::string> images;
  pr->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  pr->add_option("--manifest", f.manifest, "predict every test image of this manifest");
  pr->add_option("--out", f.out, "output directory");
  pr->add_option("--arch", f.arch, "dunet or unet");
  f.stride_opt = pr->add_option("--stride", f.stride, "tiling stride");
  pr->add_option("images", images, "preprocessed images");

  CLI::App* ev = app.add_subcommand("evaluate", "metrics and ROC curve for predicted probability maps");
  std::string pred_dir, gt_dir;
  ev->add_option("--pred", pred_dir, "directory of 8-bit probability maps")->required();
  ev->add_option("--gt", gt_dir, "directory of ground truths with matching file stems");
  ev->add_option("--manifest", f.manifest, "take ground truths from this manifest's test split instead");
  ev->add_option("--out", f.out, "output directory");
  f.threshold_opt = ev->add_option("--threshold", f.threshold, "probability threshold");
  ev->add_option("--config", f.config, "key = value configuration file");

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference checks of every backward rule");
  f.seed_opt = nullptr;
  std::uint64_t gc_seed = 0;
  gc->add_option("--seed", gc_seed, "seed for the random test inputs");

  CLI::App* sy = app.add_subcommand("synth", "write a synthetic vessel dataset");
  int count = 10, train_count = 7;
  SyntheticSpec spec;
  sy->add_option("--out", f.out, "output directory")->required();
  sy->add_option("--count", count, "number of images");
  sy->add_option("--train", train_count, "images in the training split");
  sy->add_option("--size", spec.height, "canvas height and width");
  sy->add_option("--branches", spec.branches, "vessel branches per image");
  sy->add_option("--seed", spec.seed, "seed of the first image");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // Re-bind the seed option of whichever subcommand ran.
  for (CLI::App* cmd : {pre, tr, pr}) {
    if (cmd->parsed()) f.seed_opt = cmd->get_option("--seed");
  }

  try {
    if (pre->parsed()) {
      const RunConfig c = resolve(f);
      const DatasetManifest m = load_manifest(require(c.manifest, "--manifest"));
      cmd_preprocess(m, require(c.out, "--out"), c, stages, err);
    } else if (tr->parsed()) {
      const RunConfig c = resolve(f);
      const DatasetManifest m = load_manifest(require(c.manifest, "--manifest"));
      const TrainResult r = cmd_train(m, c, require(c.out, "--out"), err, &cancel_flag());
      if (r.interrupted) {
        err << "interrupted; state saved to " << (fs::path(c.out) / "last.dunc").string() << '\n';
        return kExitRuntime;
      }
      out << "best epoch " << r.best_epoch << "  val_loss " << r.best_val_loss << '\n';
    } else if (pr->parsed()) {
      // Without --config, use the configuration saved next to the checkpoint.
      const fs::path saved = fs::path(checkpoint).parent_path() / "config.txt";
      if (f.config.empty() && fs::exists(saved)) f.config = saved.string();
      const RunConfig c = resolve(f);
      std::vector<fs::path> inputs(images.begin(), images.end());
      if (!f.manifest.empty()) {
        for (const ManifestEntry& e : load_manifest(f.manifest).select(Split::kTest)) inputs.push_back(e.image);
      }
      if (inputs.empty()) throw ConfigError("no images to predict");
      cmd_predict(checkpoint, c, inputs, require(c.out, "--out"), err);
    } else if (ev->parsed()) {
      const RunConfig c = resolve(f);
      std::vector<EvaluationPair> pairs;
      if (!gt_dir.empty()) {
        pairs = pair_by_stem(pred_dir, gt_dir);
      } else {
        for (const ManifestEntry& e : load_manifest(require(f.manifest, "--gt or --manifest")).select(Split::kTest)) {
          const std::string stem = e.image.stem().string();
          pairs.push_back({stem, fs::path(pred_dir) / (stem + ".png"), e.ground_truth});
        }
      }
      const EvaluationReport r = cmd_evaluate(pairs, require(c.out, "--out"), c.threshold, err);
      out << "acc " << r.aggregate.acc.value << "  auc " << r.aggregate.auc << '\n';
    } else if (gc->parsed()) {
      if (!cmd_gradcheck(gc_seed, out)) return kExitRuntime;
    } else if (sy->parsed()) {
      spec.width = spec.height;
      write_synthetic_dataset(f.out, count, train_count, spec);
      out << "wrote " << count << " images to " << f.out << '\n';
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace dunet
