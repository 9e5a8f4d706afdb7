// Copyright (c) 2026, The selfanno Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "selfanno/errors.hpp"

namespace selfanno {

/// Every hyperparameter of one self-training run.
struct RunConfig {
  double threshold = 0.25;            // promotion confidence τ
  int epochs_per_iteration = 100;     // E
  int n_iterations = 15;              // N, in addition to the bootstrap round
  int batch_size = 2;
  int steps_per_epoch = 24;
  double nms_iou = 0.5;
  double eval_iou = 0.75;
  int max_dets_per_image = 100;
  std::uint64_t seed = 0;
  std::string detector = "builtin";  // or "external:<command line>"
  std::string pretrained;            // optional state blob path
  bool keep_bootstrap_annotations = true;
  bool cold_restart = false;
  bool record_timing = false;
  bool augment = true;
  double pixel_threshold = 0.5;  // builtin detector only
  double score_temperature = 5.0;  // builtin detector only
  int min_area = 30;             // builtin detector only

  friend bool operator==(const RunConfig &, const RunConfig &) = default;

  void validate() const {
    const auto fail = [](const std::string &m) { throw ConfigError(m); };
    // values above 1 are allowed and promote nothing
    if (!(threshold >= 0.0 && std::isfinite(threshold))) fail("threshold must be finite and >= 0");
    if (epochs_per_iteration < 1) fail("epochs_per_iteration must be >= 1");
    if (n_iterations < 0) fail("n_iterations must be >= 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (steps_per_epoch < 1) fail("steps_per_epoch must be >= 1");
    if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) fail("nms_iou must lie in [0,1]");
    if (!(eval_iou > 0.0 && eval_iou <= 1.0)) fail("eval_iou must lie in (0,1]");
    if (max_dets_per_image < 1) fail("max_dets_per_image must be >= 1");
    if (!(pixel_threshold > 0.0 && pixel_threshold < 1.0)) fail("pixel_threshold must lie in (0,1)");
    if (min_area < 1) fail("min_area must be >= 1");
    if (!(score_temperature > 0.0)) fail("score_temperature must be positive");
    if (detector != "builtin" && detector.rfind("external:", 0) != 0)
      fail("detector must be 'builtin' or 'external:<command>'");
  }
};

namespace config_detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string &key, const std::string &v) {
  char *end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(d)) throw ConfigError(key + ": not a number: '" + v + "'");
  return d;
}

inline long long to_int(const std::string &key, const std::string &v) {
  char *end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') throw ConfigError(key + ": not an integer: '" + v + "'");
  return i;
}

inline bool to_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // prefer the shortest representation that round-trips
  for (int prec = 1; prec <= 17; ++prec) {
    char probe[64];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

}  // namespace config_detail

inline const std::vector<std::string> &config_keys() {
  static const std::vector<std::string> keys = {
      "threshold", "epochs", "iterations", "batch_size", "steps_per_epoch", "nms_iou",
      "eval_iou", "max_dets", "seed", "detector", "pretrained", "keep_bootstrap_annotations",
      "cold_restart", "record_timing", "augment", "pixel_threshold", "score_temperature", "min_area"};
  return keys;
}

/// Applies one key=value setting; unknown keys are a ConfigError.
inline void apply_setting(RunConfig &c, const std::string &key, const std::string &value) {
  using namespace config_detail;
  if (key == "threshold") c.threshold = to_double(key, value);
  else if (key == "epochs") c.epochs_per_iteration = static_cast<int>(to_int(key, value));
  else if (key == "iterations") c.n_iterations = static_cast<int>(to_int(key, value));
  else if (key == "batch_size") c.batch_size = static_cast<int>(to_int(key, value));
  else if (key == "steps_per_epoch") c.steps_per_epoch = static_cast<int>(to_int(key, value));
  else if (key == "nms_iou") c.nms_iou = to_double(key, value);
  else if (key == "eval_iou") c.eval_iou = to_double(key, value);
  else if (key == "max_dets") c.max_dets_per_image = static_cast<int>(to_int(key, value));
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, value));
  else if (key == "detector") c.detector = value;
  else if (key == "pretrained") c.pretrained = value;
  else if (key == "keep_bootstrap_annotations") c.keep_bootstrap_annotations = to_bool(key, value);
  else if (key == "cold_restart") c.cold_restart = to_bool(key, value);
  else if (key == "record_timing") c.record_timing = to_bool(key, value);
  else if (key == "augment") c.augment = to_bool(key, value);
  else if (key == "pixel_threshold") c.pixel_threshold = to_double(key, value);
  else if (key == "score_temperature") c.score_temperature = to_double(key, value);
  else if (key == "min_area") c.min_area = static_cast<int>(to_int(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Parses "key=value" (or "key = value") lines; '#' starts a comment and
/// "[section]" headers are ignored.
inline RunConfig parse_config(const std::string &text, RunConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    auto value = config_detail::trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    apply_setting(base, config_detail::trim(line.substr(0, eq)), value);
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path &path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

inline std::string config_to_text(const RunConfig &c) {
  using config_detail::fmt_double;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  std::ostringstream o;
  o << "threshold = " << fmt_double(c.threshold) << "\n"
    << "epochs = " << c.epochs_per_iteration << "\n"
    << "iterations = " << c.n_iterations << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "steps_per_epoch = " << c.steps_per_epoch << "\n"
    << "nms_iou = " << fmt_double(c.nms_iou) << "\n"
    << "eval_iou = " << fmt_double(c.eval_iou) << "\n"
    << "max_dets = " << c.max_dets_per_image << "\n"
    << "seed = " << c.seed << "\n"
    << "detector = \"" << c.detector << "\"\n"
    << "pretrained = \"" << c.pretrained << "\"\n"
    << "keep_bootstrap_annotations = " << b(c.keep_bootstrap_annotations) << "\n"
    << "cold_restart = " << b(c.cold_restart) << "\n"
    << "record_timing = " << b(c.record_timing) << "\n"
    << "augment = " << b(c.augment) << "\n"
    << "pixel_threshold = " << fmt_double(c.pixel_threshold) << "\n"
    << "score_temperature = " << fmt_double(c.score_temperature) << "\n"
    << "min_area = " << c.min_area << "\n";
  return o.str();
}

/// SplitMix64 finalizer; derives independent, reproducible child seeds.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace selfanno
