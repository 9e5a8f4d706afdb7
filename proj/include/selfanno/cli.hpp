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

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "selfanno/coco_io.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/metrics.hpp"
#include "selfanno/report.hpp"
#include "selfanno/run_config.hpp"
#include "selfanno/selfloop.hpp"
#include "selfanno/synthgen.hpp"

namespace selfanno {

inline constexpr const char *kRunDirEnv = "SELFANNO_RUN_DIR";

namespace cli_detail {

/// Shortest fixed rendering with at least one decimal: 1.0, 0.835, 0.5.
inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

struct ConfigFile {
  RunConfig config;
  std::map<std::string, std::string> paths;  // dataset, run_dir, image_root
};

inline ConfigFile read_config_file(const std::string &path) {
  static const std::set<std::string> path_keys{"dataset", "run_dir", "image_root"};
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  ConfigFile cf;
  std::string line, passthrough;
  while (std::getline(in, line)) {
    std::string body = line;
    if (auto hash = body.find('#'); hash != std::string::npos) body.erase(hash);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      const auto key = config_detail::trim(body.substr(0, eq));
      if (path_keys.count(key)) {
        auto value = config_detail::trim(body.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        cf.paths[key] = value;
        continue;
      }
    }
    passthrough += line + "\n";
  }
  cf.config = parse_config(passthrough);
  return cf;
}

/// Options shared by run/grid/loio.
struct LoopOptions {
  std::string config_path;
  std::string dataset;
  std::string out;
  std::string image_root;
  std::optional<int> iterations, epochs;
  std::optional<double> threshold;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;

  void attach(CLI::App *app) {
    app->add_option("--config,-c", config_path, "key=value configuration file");
    app->add_option("--dataset,-d", dataset, "COCO-style dataset file");
    app->add_option("--out,-o", out, "output directory");
    app->add_option("--image-root", image_root, "directory image paths are relative to (default: dataset dir)");
    app->add_option("--iterations,-n", iterations, "self-training iterations after bootstrap");
    app->add_option("--threshold,-t", threshold, "promotion confidence threshold");
    app->add_option("--epochs,-e", epochs, "epochs per iteration");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--set", sets, "config override key=value (repeatable)");
  }

  RunConfig resolve(std::map<std::string, std::string> &paths) const {
    RunConfig cfg;
    if (!config_path.empty()) {
      auto cf = read_config_file(config_path);
      cfg = cf.config;
      paths = cf.paths;
    }
    for (const auto &s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--set expects key=value, got '" + s + "'");
      const auto key = config_detail::trim(s.substr(0, eq));
      const auto &known = config_keys();
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw CLI::ValidationError("--set names unknown config key '" + key + "'");
      apply_setting(cfg, key, config_detail::trim(s.substr(eq + 1)));
    }
    if (iterations) cfg.n_iterations = *iterations;
    if (threshold) cfg.threshold = *threshold;
    if (epochs) cfg.epochs_per_iteration = *epochs;
    if (seed) cfg.seed = *seed;
    if (!dataset.empty()) paths["dataset"] = dataset;
    if (!out.empty()) paths["run_dir"] = out;
    if (!image_root.empty()) paths["image_root"] = image_root;
    if (!paths.count("run_dir")) {
      if (const char *env = std::getenv(kRunDirEnv)) paths["run_dir"] = env;
    }
    cfg.validate();
    return cfg;
  }
};

inline std::filesystem::path image_root_for(const std::map<std::string, std::string> &paths) {
  if (auto it = paths.find("image_root"); it != paths.end()) return it->second;
  const std::filesystem::path ds = paths.at("dataset");
  return ds.has_parent_path() ? ds.parent_path() : std::filesystem::path(".");
}

inline void require_paths(const std::map<std::string, std::string> &paths, std::initializer_list<const char *> keys) {
  for (const char *k : keys)
    if (!paths.count(k))
      throw CLI::ValidationError(std::string("missing --") + (std::string(k) == "run_dir" ? "out" : k) +
                                 (std::string(k) == "run_dir" ? std::string(" (or ") + kRunDirEnv + ")" : std::string()));
}

inline std::vector<double> parse_double_list(const std::string &s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(config_detail::to_double("list", config_detail::trim(item)));
  return out;
}

inline std::vector<int> parse_int_list(const std::string &s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<int>(config_detail::to_int("list", config_detail::trim(item))));
  return out;
}

/// Detections from either a dataset file (annotations become detections with
/// their confidence) or a COCO results list.
inline std::vector<Detection> load_detections(const std::string &path, const AnnotatedDataset &gt) {
  const auto text = loop_detail::read_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(path + ": " + e.what());
  }
  std::vector<Detection> out;
  if (j.is_object()) {
    const auto d = parse_coco(text);
    for (const auto &a : d.annotations) out.push_back({a.image_id, a.category_id, a.mask, a.confidence});
    return out;
  }
  if (!j.is_array()) throw SchemaError(path + ": expected a dataset object or a detection list");
  for (const auto &e : j) {
    const Id image_id = coco_detail::get_as<Id>(e, "image_id", "detection");
    const auto *im = gt.find_image(image_id);
    if (!im) throw UnknownImageError("detection on image " + std::to_string(image_id));
    Detection d;
    d.image_id = image_id;
    d.category_id = coco_detail::get_as<Id>(e, "category_id", "detection");
    d.mask = coco_detail::parse_segmentation(coco_detail::require(e, "segmentation", "detection"), *im, "detection");
    d.confidence = e.contains("score") ? coco_detail::get_as<double>(e, "score", "detection")
                                       : coco_detail::get_as<double>(e, "confidence", "detection");
    out.push_back(std::move(d));
  }
  return out;
}

inline ExperimentSpec preset(const std::string &name) {
  if (name == "coffee") return coffee_preset();
  if (name == "drift") return drift_preset();
  if (name == "fruits") return fruits_preset();
  throw ConfigError("unknown preset '" + name + "' (expected coffee, drift or fruits)");
}

}  // namespace cli_detail

/// Entry point of the command-line tool. Exit codes: 0 success, 1 domain
/// error, 2 usage error.
inline int run_command(const std::vector<std::string> &argv, std::ostream &out = std::cout,
                       std::ostream &err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Iterative self-learning annotation for instance segmentation", "selfanno"};
  app.require_subcommand(1, 1);

  // synth
  auto *synth = app.add_subcommand("synth", "generate a synthetic partitioned experiment");
  std::string synth_out, synth_preset = "coffee";
  std::optional<int> s_boot_images, s_annotations, s_training, s_distractors, s_instances;
  std::optional<double> s_hue, s_fade;
  std::uint64_t s_seed = 0;
  synth->add_option("--out,-o", synth_out, "output directory")->required();
  synth->add_option("--preset", synth_preset, "coffee | drift | fruits");
  synth->add_option("--seed", s_seed, "generator seed");
  synth->add_option("--bootstrap-images", s_boot_images, "images carrying the bootstrap annotations");
  synth->add_option("--annotations", s_annotations, "human annotations in the bootstrap set");
  synth->add_option("--training", s_training, "unlabeled training images");
  synth->add_option("--instances", s_instances, "instances per category per scene");
  synth->add_option("--distractors", s_distractors, "non-target look-alikes per scene");
  synth->add_option("--hue-delta", s_hue, "distractor hue shift in degrees");
  synth->add_option("--fade", s_fade, "distractor blend toward the background, 0..1");

  LoopOptions run_opts, grid_opts, loio_opts;
  auto *run = app.add_subcommand("run", "bootstrap and iterate the self-learning loop");
  run_opts.attach(run);

  auto *grid = app.add_subcommand("grid", "grid search over thresholds x epochs (x annotation counts)");
  grid_opts.attach(grid);
  std::string g_thresholds = "0.25,0.5,0.75", g_epochs, g_annotations;
  grid->add_option("--thresholds", g_thresholds, "comma-separated thresholds");
  grid->add_option("--epochs-grid", g_epochs, "comma-separated epochs per iteration");
  grid->add_option("--annotations-grid", g_annotations, "comma-separated bootstrap annotation counts");

  auto *loio = app.add_subcommand("loio", "leave-one-image-out evaluation on a fully annotated dataset");
  loio_opts.attach(loio);
  std::size_t per_category = 1;
  loio->add_option("--per-category", per_category, "bootstrap annotations per category");

  auto *eval = app.add_subcommand("eval", "score detections against ground truth");
  std::string gt_path, pred_path;
  double eval_iou = 0.75, eval_nms = 0.5;
  std::size_t eval_max_dets = 100;
  eval->add_option("--gt", gt_path, "ground-truth dataset")->required();
  eval->add_option("--pred", pred_path, "detections (dataset or results list)")->required();
  eval->add_option("--iou", eval_iou, "matching IoU");
  eval->add_option("--nms-iou", eval_nms, "NMS IoU applied before matching");
  eval->add_option("--max-dets", eval_max_dets, "detections kept per image");

  auto *restore = app.add_subcommand("restore", "restore a run at an iteration checkpoint");
  std::string restore_dir;
  int restore_it = 0;
  bool restore_continue = false;
  restore->add_option("--run,-r", restore_dir, "run directory");
  restore->add_option("--iteration,-k", restore_it, "checkpoint to restore")->required();
  restore->add_flag("--continue", restore_continue, "run the remaining iterations afterwards");

  auto *report = app.add_subcommand("report", "render report.svg and summary.txt for a run");
  std::string report_dir;
  report->add_option("--run,-r", report_dir, "run directory");

  auto *validate_cmd = app.add_subcommand("validate", "load and check a dataset file");
  std::string validate_path;
  validate_cmd->add_option("--dataset,-d", validate_path, "dataset file")->required();

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp &e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  const auto run_dir_or_env = [](const std::string &given) -> std::string {
    if (!given.empty()) return given;
    if (const char *env = std::getenv(kRunDirEnv)) return env;
    throw CLI::ValidationError(std::string("missing --run (or ") + kRunDirEnv + ")");
  };

  try {
    if (synth->parsed()) {
      auto spec = preset(synth_preset);
      spec.seed = s_seed;
      if (s_boot_images) spec.bootstrap_images = *s_boot_images;
      if (s_annotations) spec.bootstrap_annotations = *s_annotations;
      if (s_training) spec.training_images = *s_training;
      if (s_instances)
        for (auto &[cat, n] : spec.scene.n_instances) n = *s_instances;
      if (s_distractors) spec.scene.distractor_count = *s_distractors;
      if (s_hue) spec.scene.distractor_hue_delta = *s_hue;
      if (s_fade) spec.scene.distractor_fade = *s_fade;
      for (auto &t : spec.testing) {
        t.n_instances = spec.scene.n_instances;
        t.distractor_count = spec.scene.distractor_count;
        t.distractor_hue_delta = spec.scene.distractor_hue_delta;
        t.distractor_fade = spec.scene.distractor_fade;
      }
      const auto gen = generate_experiment(spec, synth_out);
      out << "wrote " << gen.dataset.images.size() << " images, " << gen.dataset.annotations.size()
          << " annotations to " << (std::filesystem::path(synth_out) / "dataset.json").string() << "\n";
    } else if (run->parsed()) {
      std::map<std::string, std::string> paths;
      const auto cfg = run_opts.resolve(paths);
      require_paths(paths, {"dataset", "run_dir"});
      const auto ds = load_coco(paths["dataset"]);
      const auto history = run_loop(cfg, ds, image_root_for(paths), paths["run_dir"]);
      out << metrics_csv(history);
      if (auto b = best_iteration(history)) out << "best iteration: " << history[*b].iteration << "\n";
    } else if (grid->parsed()) {
      std::map<std::string, std::string> paths;
      const auto cfg = grid_opts.resolve(paths);
      require_paths(paths, {"dataset", "run_dir"});
      GridSpec spec;
      spec.thresholds = parse_double_list(g_thresholds);
      spec.epochs = g_epochs.empty() ? std::vector<int>{cfg.epochs_per_iteration} : parse_int_list(g_epochs);
      if (!g_annotations.empty()) spec.annotation_counts = parse_int_list(g_annotations);
      const auto ds = load_coco(paths["dataset"]);
      const auto rows = grid_search(cfg, spec, ds, image_root_for(paths), paths["run_dir"]);
      out << grid_csv(rows);
    } else if (loio->parsed()) {
      std::map<std::string, std::string> paths;
      const auto cfg = loio_opts.resolve(paths);
      require_paths(paths, {"dataset", "run_dir"});
      const auto ds = load_coco(paths["dataset"]);
      out << loio_csv(loio_eval(cfg, ds, image_root_for(paths), paths["run_dir"], per_category));
    } else if (eval->parsed()) {
      auto gt = load_coco(gt_path);
      if (gt.images_in(Partition::Testing).empty())
        for (auto &[id, m] : gt.partition_of) m = membership_of({Partition::Testing});
      const auto dets = load_detections(pred_path, gt);
      const auto rec = evaluate_dataset(gt, dets, EvalParams{eval_nms, eval_iou, eval_max_dets}, 0);
      out << "ap75=" << format_metric(rec.ap75) << " ar75=" << format_metric(rec.ar75)
          << " n_detected=" << rec.n_detected_instances << " n_gt=" << rec.n_ground_truth << "\n";
    } else if (restore->parsed()) {
      const auto dir = run_dir_or_env(restore_dir);
      auto state = restore_run(dir, restore_it);
      out << "restored iteration " << restore_it << " (detector " << state.history.back().state_digest.substr(0, 12)
          << ", " << state.dataset.annotations.size() << " annotations)\n";
      if (restore_continue) {
        continue_loop(state);
        out << metrics_csv(state.history);
      }
    } else if (report->parsed()) {
      const auto dir = run_dir_or_env(report_dir);
      render_report(dir);
      out << "wrote " << (std::filesystem::path(dir) / "report.svg").string() << "\n";
    } else if (validate_cmd->parsed()) {
      const auto ds = load_coco(validate_path);
      out << "ok: " << ds.categories.size() << " categories, " << ds.images.size() << " images ("
          << ds.images_in(Partition::Bootstrapping).size() << " bootstrapping, "
          << ds.images_in(Partition::Training).size() << " training, " << ds.images_in(Partition::Testing).size()
          << " testing), " << ds.annotations.size() << " annotations\n";
    }
  } catch (const CLI::ValidationError &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace selfanno
