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

#include "dunet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <system_error>

#include "dunet/errors.hpp"

namespace dunet {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(what + ": expected a number, got '" + text + "'");
  }
  return v;
}

namespace {

template <typename Int>
Int parse_int(const std::string& text, const std::string& what) {
  Int v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(what + ": expected an integer, got '" + text + "'");
  }
  return v;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

Field int_field(std::string key, int RunConfig::*outer) {
  return {key, [outer](const RunConfig& c) { return std::to_string(c.*outer); },
          [outer, key](RunConfig& c, const std::string& v) { c.*outer = parse_int<int>(v, key); }};
}

template <typename Sub>
Field int_field(std::string key, Sub RunConfig::*sub, int Sub::*member) {
  return {key, [sub, member](const RunConfig& c) { return std::to_string(c.*sub.*member); },
          [sub, member, key](RunConfig& c, const std::string& v) { c.*sub.*member = parse_int<int>(v, key); }};
}

template <typename Sub>
Field double_field(std::string key, Sub RunConfig::*sub, double Sub::*member) {
  return {key, [sub, member](const RunConfig& c) { return format_double(c.*sub.*member); },
          [sub, member, key](RunConfig& c, const std::string& v) { c.*sub.*member = parse_double(v, key); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"arch", [](const RunConfig& c) { return arch_name(c.model.arch); },
                 [](RunConfig& c, const std::string& v) { c.model.arch = parse_arch(v); }});
    f.push_back(int_field("depth", &RunConfig::model, &ModelConfig::depth));
    f.push_back(int_field("base_filters", &RunConfig::model, &ModelConfig::base_filters));
    f.push_back(int_field("kernel", &RunConfig::model, &ModelConfig::kernel));
    f.push_back(int_field("input_size", &RunConfig::model, &ModelConfig::input_size));
    f.push_back(int_field("offset_kernel", &RunConfig::model, &ModelConfig::offset_kernel));
    f.push_back(int_field("convs_per_stage", &RunConfig::model, &ModelConfig::convs_per_stage));
    f.push_back(int_field("in_channels", &RunConfig::model, &ModelConfig::in_channels));
    f.push_back(int_field("batch_size", &RunConfig::train, &TrainConfig::batch_size));
    f.push_back(int_field("epochs", &RunConfig::train, &TrainConfig::epochs));
    f.push_back(double_field("lr0", &RunConfig::train, &TrainConfig::lr0));
    f.push_back(int_field("plateau_patience", &RunConfig::train, &TrainConfig::plateau_patience));
    f.push_back(int_field("stop_patience", &RunConfig::train, &TrainConfig::stop_patience));
    f.push_back(double_field("lr_factor", &RunConfig::train, &TrainConfig::lr_factor));
    f.push_back(double_field("min_delta", &RunConfig::train, &TrainConfig::min_delta));
    f.push_back({"channel_mode",
                 [](const RunConfig& c) {
                   return std::string(c.preprocess.channel_mode == ChannelMode::kGreen ? "green" : "luminance");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "green") {
                     c.preprocess.channel_mode = ChannelMode::kGreen;
                   } else if (v == "luminance") {
                     c.preprocess.channel_mode = ChannelMode::kLuminance;
                   } else {
                     throw ConfigError("channel_mode: expected green or luminance, got '" + v + "'");
                   }
                 }});
    f.push_back({"clahe_clip", [](const RunConfig& c) { return format_double(c.preprocess.clahe.clip_limit); },
                 [](RunConfig& c, const std::string& v) { c.preprocess.clahe.clip_limit = parse_double(v, "clahe_clip"); }});
    f.push_back({"clahe_tiles_y", [](const RunConfig& c) { return std::to_string(c.preprocess.clahe.tiles_y); },
                 [](RunConfig& c, const std::string& v) { c.preprocess.clahe.tiles_y = parse_int<int>(v, "clahe_tiles_y"); }});
    f.push_back({"clahe_tiles_x", [](const RunConfig& c) { return std::to_string(c.preprocess.clahe.tiles_x); },
                 [](RunConfig& c, const std::string& v) { c.preprocess.clahe.tiles_x = parse_int<int>(v, "clahe_tiles_x"); }});
    f.push_back(double_field("gamma", &RunConfig::preprocess, &PreprocessOptions::gamma));
    f.push_back(int_field("stride", &RunConfig::stride));
    f.push_back({"threshold", [](const RunConfig& c) { return format_double(c.threshold); },
                 [](RunConfig& c, const std::string& v) { c.threshold = parse_double(v, "threshold"); }});
    f.push_back(int_field("train_patches", &RunConfig::train_patches));
    f.push_back(int_field("val_patches", &RunConfig::val_patches));
    f.push_back({"manifest", [](const RunConfig& c) { return c.manifest; },
                 [](RunConfig& c, const std::string& v) { c.manifest = v; }});
    f.push_back({"out", [](const RunConfig& c) { return c.out; }, [](RunConfig& c, const std::string& v) { c.out = v; }});
    f.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) { c.seed = parse_int<std::uint64_t>(v, "seed"); }});
    return f;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (preprocess.gamma <= 0) throw ConfigError("gamma must be positive");
  if (preprocess.clahe.clip_limit <= 0) throw ConfigError("clahe_clip must be positive");
  if (preprocess.clahe.tiles_y < 1 || preprocess.clahe.tiles_x < 1) throw ConfigError("clahe tiles must be >= 1");
  if (stride < 1 || stride > model.input_size) throw ConfigError("stride must lie in [1, input_size]");
  if (!(threshold >= 0 && threshold <= 1)) throw ConfigError("threshold must lie in [0, 1]");
  if (train_patches < -1 || val_patches < -1) throw ConfigError("patch counts must be >= 0, or -1 for the manifest quota");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    const std::string where = "config line " + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const Field* field = nullptr;
    for (const Field& f : fields()) {
      if (f.key == key) field = &f;
    }
    if (field == nullptr) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' given twice");
    field->set(base, value);
  }
  return base;
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), std::move(base));
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  out << format_config(config);
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace dunet
