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
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfanno/coco_io.hpp"
#include "selfanno/dataset.hpp"
#include "selfanno/detector_handle.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/metrics.hpp"
#include "selfanno/nms.hpp"
#include "selfanno/run_config.hpp"

namespace selfanno {

struct IterationRecord {
  int iteration = 0;
  std::size_t promoted = 0;
  std::size_t training_detections = 0;  // post-NMS, before thresholding
  std::size_t testing_detections = 0;
  std::optional<MetricsRecord> metrics;
  std::int64_t wall_ms = 0;
  std::string state_digest;
  bool training_skipped = false;
  std::uint64_t trained_steps = 0;
  std::vector<std::string> warnings;
};

/// Everything a run needs to continue: the evolving dataset, the detector and
/// the per-iteration history.
struct RunState {
  RunConfig config;
  AnnotatedDataset dataset;
  std::filesystem::path image_root;
  DetectorHandle detector;
  std::vector<IterationRecord> history;
  std::filesystem::path run_dir;  // empty: nothing is written
};

/// Keeps detections whose confidence reaches tau; order is preserved.
inline std::vector<Detection> filter_detections(const std::vector<Detection> &detections, double tau) {
  std::vector<Detection> out;
  for (const auto &d : detections)
    if (d.confidence >= tau) out.push_back(d);
  return out;
}

namespace loop_detail {

using nlohmann::json;

inline json metrics_to_json(const MetricsRecord &m) {
  json per = json::array();
  for (const auto &[cat, cm] : m.per_category)
    per.push_back(json{{"category_id", cat}, {"ap", cm.ap}, {"ar", cm.ar}, {"n_detected", cm.n_detected}, {"n_gt", cm.n_gt}});
  return json{{"iteration", m.iteration},
              {"ap75", m.ap75},
              {"ar75", m.ar75},
              {"n_detected", m.n_detected_instances},
              {"n_gt", m.n_ground_truth},
              {"per_category", per}};
}

inline MetricsRecord metrics_from_json(const json &j) {
  MetricsRecord m;
  m.iteration = j.at("iteration").get<int>();
  m.ap75 = j.at("ap75").get<double>();
  m.ar75 = j.at("ar75").get<double>();
  m.n_detected_instances = j.at("n_detected").get<std::size_t>();
  m.n_ground_truth = j.at("n_gt").get<std::size_t>();
  for (const auto &p : j.at("per_category"))
    m.per_category[p.at("category_id").get<Id>()] = CategoryMetrics{
        p.at("ap").get<double>(), p.at("ar").get<double>(), p.at("n_detected").get<std::size_t>(),
        p.at("n_gt").get<std::size_t>()};
  return m;
}

inline json record_to_json(const IterationRecord &r) {
  json j{{"iteration", r.iteration},
         {"promoted", r.promoted},
         {"training_detections", r.training_detections},
         {"testing_detections", r.testing_detections},
         {"wall_ms", r.wall_ms},
         {"state_digest", r.state_digest},
         {"training_skipped", r.training_skipped},
         {"trained_steps", r.trained_steps},
         {"warnings", r.warnings}};
  j["metrics"] = r.metrics ? metrics_to_json(*r.metrics) : json(nullptr);
  return j;
}

inline IterationRecord record_from_json(const json &j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.promoted = j.at("promoted").get<std::size_t>();
  r.training_detections = j.at("training_detections").get<std::size_t>();
  r.testing_detections = j.at("testing_detections").get<std::size_t>();
  r.wall_ms = j.at("wall_ms").get<std::int64_t>();
  r.state_digest = j.at("state_digest").get<std::string>();
  r.training_skipped = j.at("training_skipped").get<bool>();
  r.trained_steps = j.at("trained_steps").get<std::uint64_t>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (!j.at("metrics").is_null()) r.metrics = metrics_from_json(j.at("metrics"));
  return r;
}

inline void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

inline std::string read_text(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path iteration_dir(const std::filesystem::path &run_dir, int iteration) {
  char name[16];
  std::snprintf(name, sizeof name, "%03d", iteration);
  return run_dir / "iterations" / name;
}

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline TrainJob make_job(const RunState &s, const std::vector<ImageRecord> &images, bool human_only, int iteration) {
  TrainJob job;
  job.image_root = s.image_root;
  job.epochs = s.config.epochs_per_iteration;
  job.batch_size = s.config.batch_size;
  job.steps_per_epoch = s.config.steps_per_epoch;
  job.seed = mix_seed(s.config.seed, static_cast<std::uint64_t>(iteration) + 1);
  job.augment = s.config.augment;
  std::map<Id, std::size_t> slot;
  for (const auto &im : images) {
    slot[im.id] = job.items.size();
    job.items.push_back({im, {}});
  }
  auto anns = s.dataset.annotations;
  std::sort(anns.begin(), anns.end(), [](const auto &a, const auto &b) { return a.id < b.id; });
  for (const auto &a : anns) {
    if (human_only && !a.source.is_human()) continue;
    if (auto it = slot.find(a.image_id); it != slot.end()) job.items[it->second].annotations.push_back(a);
  }
  std::erase_if(job.items, [](const TrainItem &it) { return it.annotations.empty(); });
  return job;
}

inline std::uint64_t detector_seed(const RunConfig &c) { return mix_seed(c.seed, 0xDE7EC7); }

inline std::optional<MetricsRecord> evaluate_testing(RunState &s, int iteration, std::size_t &n_test_dets) {
  const auto test_images = s.dataset.images_in(Partition::Testing);
  if (test_images.empty()) return std::nullopt;
  const auto dets = s.detector.infer(test_images, s.image_root);
  auto rec = evaluate_dataset(s.dataset, dets, s.config, iteration);
  n_test_dets = rec.n_detected_instances;
  return rec;
}

}  // namespace loop_detail

inline std::string metrics_csv(const std::vector<IterationRecord> &history) {
  using loop_detail::fmt6;
  std::string out = "iteration,ap75,ar75,n_detected,n_gt,promoted,wall_ms\n";
  for (const auto &r : history) {
    out += std::to_string(r.iteration) + ",";
    if (r.metrics) {
      out += fmt6(r.metrics->ap75) + "," + fmt6(r.metrics->ar75) + "," +
             std::to_string(r.metrics->n_detected_instances) + "," + std::to_string(r.metrics->n_ground_truth);
    } else {
      out += ",,,";
    }
    out += "," + std::to_string(r.promoted) + "," + std::to_string(r.wall_ms) + "\n";
  }
  return out;
}

/// Index of the argmax-AP75 record (earliest on ties), if any record has metrics.
inline std::optional<std::size_t> best_iteration(const std::vector<IterationRecord> &history) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (!history[i].metrics) continue;
    if (!best || history[i].metrics->ap75 > history[*best].metrics->ap75) best = i;
  }
  return best;
}

/// Persists iteration `record`'s checkpoint plus the rolling metrics file.
inline void write_checkpoint(RunState &s, const IterationRecord &record, const DetectorStateBlob &blob) {
  if (s.run_dir.empty()) return;
  using namespace loop_detail;
  const auto dir = iteration_dir(s.run_dir, record.iteration);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_coco(s.dataset, dir / "annotations.json");
  write_state_file(dir / "detector.state", blob);
  write_text(dir / "record.json", record_to_json(record).dump(1) + "\n");
  write_text(s.run_dir / "metrics.csv", metrics_csv(s.history));
  std::string best_txt;
  if (auto b = best_iteration(s.history)) {
    const auto &m = *s.history[*b].metrics;
    best_txt = "best_iteration=" + std::to_string(s.history[*b].iteration) + "\nap75=" + fmt6(m.ap75) +
               "\nar75=" + fmt6(m.ar75) + "\nn_detected=" + std::to_string(m.n_detected_instances) + "\n";
  } else {
    best_txt = "best_iteration=\n";
  }
  write_text(s.run_dir / "best.txt", best_txt);
}

/// Initiation phase: train on the human bootstrap labels only, evaluate, and
/// record iteration 0.
inline RunState bootstrap_phase(const RunConfig &config, const AnnotatedDataset &dataset,
                                const std::filesystem::path &image_root, const std::filesystem::path &run_dir = {}) {
  config.validate();
  validate(dataset);
  const auto t0 = std::chrono::steady_clock::now();
  const auto boot_images = dataset.images_in(Partition::Bootstrapping);
  std::size_t human = 0;
  for (const auto &a : dataset.annotations)
    if (a.source.is_human() && dataset.in_partition(a.image_id, Partition::Bootstrapping)) ++human;
  if (boot_images.empty() || human == 0) throw NoBootstrapError("bootstrapping partition holds no human annotation");

  std::optional<DetectorStateBlob> pretrained;
  if (!config.pretrained.empty()) pretrained = read_state_file(config.pretrained);
  RunState s{config, dataset, image_root,
             open_detector(DetectorKind::from_config(config), pretrained, loop_detail::detector_seed(config)), {}, run_dir};
  // inferred labels never enter iteration 0
  std::erase_if(s.dataset.annotations, [&](const Annotation &a) {
    return !a.source.is_human() && !s.dataset.in_partition(a.image_id, Partition::Testing);
  });

  if (!run_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(run_dir, ec);
    if (ec) throw IoError("cannot create " + run_dir.string() + ": " + ec.message());
    loop_detail::write_text(run_dir / "config.txt", config_to_text(config));
    loop_detail::write_text(run_dir / "source.txt",
                            "image_root = \"" + std::filesystem::absolute(image_root).string() + "\"\n");
  }

  s.detector.train(loop_detail::make_job(s, boot_images, true, 0));
  IterationRecord rec;
  rec.iteration = 0;
  rec.metrics = loop_detail::evaluate_testing(s, 0, rec.testing_detections);
  const auto blob = s.detector.checkpoint();
  rec.state_digest = blob.digest;
  rec.trained_steps = s.detector.trained_steps();
  if (config.record_timing)
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  s.history.push_back(rec);
  write_checkpoint(s, rec, blob);
  return s;
}

/// One infer -> NMS -> threshold -> relabel -> retrain -> evaluate round.
inline void iterate_once(RunState &s) {
  if (s.history.empty()) throw NoBootstrapError("bootstrap_phase has not run");
  const auto t0 = std::chrono::steady_clock::now();
  const int it = static_cast<int>(s.history.size());
  auto &ds = s.dataset;

  const auto training = ds.images_in(Partition::Training);
  auto detections = training.empty() ? std::vector<Detection>{} : s.detector.infer(training, s.image_root);
  detections = nms_per_image(detections, s.config.nms_iou);
  IterationRecord rec;
  rec.iteration = it;
  rec.training_detections = detections.size();
  const auto survivors = filter_detections(detections, s.config.threshold);

  // pseudo-labels are replaced wholesale every round
  std::erase_if(ds.annotations, [&](const Annotation &a) {
    if (ds.in_partition(a.image_id, Partition::Testing)) return false;
    if (!a.source.is_human()) return true;
    return !s.config.keep_bootstrap_annotations;
  });
  std::map<Id, std::vector<const Annotation *>> human_by_image;
  for (const auto &a : ds.annotations)
    if (a.source.is_human() && !ds.in_partition(a.image_id, Partition::Testing)) human_by_image[a.image_id].push_back(&a);

  std::vector<Annotation> promoted;
  Id next_id = ds.max_annotation_id() + 1;
  for (const auto &d : survivors) {
    bool shadowed = false;
    if (auto h = human_by_image.find(d.image_id); h != human_by_image.end()) {
      for (const auto *a : h->second)
        if (rle_iou(d.mask, a->mask) > s.config.nms_iou) {
          shadowed = true;
          break;
        }
    }
    if (shadowed) continue;
    promoted.push_back(make_annotation(next_id++, d.image_id, d.category_id, d.mask,
                                       AnnotationSource::inferred(it), d.confidence));
  }
  rec.promoted = promoted.size();
  ds.annotations.insert(ds.annotations.end(), promoted.begin(), promoted.end());

  if (promoted.empty()) {
    rec.training_skipped = true;
    rec.warnings.push_back("no detection reached the threshold; training skipped");
  } else {
    if (s.config.cold_restart) {
      s.detector = open_detector(s.detector.kind(), std::nullopt, loop_detail::detector_seed(s.config));
    }
    auto job = loop_detail::make_job(s, training, false, it);
    s.detector.train(job);
  }

  rec.metrics = loop_detail::evaluate_testing(s, it, rec.testing_detections);
  const auto blob = s.detector.checkpoint();
  rec.state_digest = blob.digest;
  rec.trained_steps = s.detector.trained_steps();
  if (s.config.record_timing)
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  s.history.push_back(rec);
  write_checkpoint(s, rec, blob);
}

/// Runs iterations until the history holds n_iterations + 1 records.
inline void continue_loop(RunState &s) {
  while (static_cast<int>(s.history.size()) <= s.config.n_iterations) iterate_once(s);
}

inline std::vector<IterationRecord> run_loop(const RunConfig &config, const AnnotatedDataset &dataset,
                                             const std::filesystem::path &image_root,
                                             const std::filesystem::path &run_dir = {}) {
  auto s = bootstrap_phase(config, dataset, image_root, run_dir);
  continue_loop(s);
  return s.history;
}

/// Rebuilds the state a run had right after iteration k.
inline RunState restore_run(const std::filesystem::path &run_dir, int k) {
  using namespace loop_detail;
  const auto dir = iteration_dir(run_dir, k);
  if (k < 0 || !std::filesystem::exists(dir / "detector.state") || !std::filesystem::exists(dir / "annotations.json"))
    throw MissingCheckpointError("no checkpoint for iteration " + std::to_string(k) + " in " + run_dir.string());
  const auto config = parse_config(read_text(run_dir / "config.txt"));
  const auto source = read_text(run_dir / "source.txt");
  std::filesystem::path image_root;
  {
    const auto q0 = source.find('"'), q1 = source.rfind('"');
    if (q0 == std::string::npos || q1 <= q0) throw ParseError("malformed source.txt");
    image_root = source.substr(q0 + 1, q1 - q0 - 1);
  }
  auto dataset = load_coco(dir / "annotations.json");
  const auto blob = read_state_file(dir / "detector.state");
  RunState s{config, std::move(dataset), image_root,
             open_detector(DetectorKind::from_config(config), blob, detector_seed(config)), {}, run_dir};
  for (int i = 0; i <= k; ++i) {
    const auto rec_path = iteration_dir(run_dir, i) / "record.json";
    if (!std::filesystem::exists(rec_path)) throw MissingCheckpointError("missing " + rec_path.string());
    try {
      s.history.push_back(record_from_json(nlohmann::json::parse(read_text(rec_path))));
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(rec_path.string() + ": " + e.what());
    }
  }
  if (s.history.back().state_digest != blob.digest)
    throw VersionError("checkpoint " + std::to_string(k) + " digest disagrees with its record");
  return s;
}

// ---------------------------------------------------------------------------
// experiment drivers

struct GridSpec {
  std::vector<double> thresholds;
  std::vector<int> epochs;
  std::vector<int> annotation_counts;  // empty: use every bootstrap annotation
};

struct GridRow {
  std::size_t cell = 0;
  double threshold = 0;
  int epochs = 0;
  std::size_t annotations = 0;
  std::optional<int> best_iteration;
  double ap75 = 0;
  double ar75 = 0;
  std::size_t n_instances = 0;
  std::string status = "ok";
};

/// Keeps `count` of the human bootstrap annotations, chosen by a seeded
/// shuffle so that smaller subsets nest inside larger ones.
inline AnnotatedDataset subsample_bootstrap(const AnnotatedDataset &d, std::size_t count, std::uint64_t seed) {
  std::vector<Id> ids;
  for (const auto &a : d.annotations)
    if (a.source.is_human() && d.in_partition(a.image_id, Partition::Bootstrapping)) ids.push_back(a.id);
  std::sort(ids.begin(), ids.end());
  if (count > ids.size())
    throw NoBootstrapError("requested " + std::to_string(count) + " bootstrap annotations, only " +
                           std::to_string(ids.size()) + " exist");
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::set<Id> keep(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count));
  AnnotatedDataset out = d;
  std::erase_if(out.annotations, [&](const Annotation &a) {
    return a.source.is_human() && d.in_partition(a.image_id, Partition::Bootstrapping) && !keep.count(a.id);
  });
  return out;
}

inline std::string grid_csv(const std::vector<GridRow> &rows) {
  using loop_detail::fmt6;
  std::string out = "cell,threshold,epochs,annotations,best_iteration,ap75,ar75,n_instances,status\n";
  for (const auto &r : rows) {
    char th[32];
    std::snprintf(th, sizeof th, "%.2f", r.threshold);
    out += std::to_string(r.cell) + "," + th + "," + std::to_string(r.epochs) + "," + std::to_string(r.annotations) + ",";
    if (r.status == "ok" && r.best_iteration) {
      out += std::to_string(*r.best_iteration) + "," + fmt6(r.ap75) + "," + fmt6(r.ar75) + "," +
             std::to_string(r.n_instances);
    } else {
      out += ",,,";
    }
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out += "," + status + "\n";
  }
  return out;
}

/// Runs one loop per (annotation count, threshold, epochs) cell. A failing
/// cell becomes a failed row; the others still run.
inline std::vector<GridRow> grid_search(const RunConfig &base, const GridSpec &grid, const AnnotatedDataset &dataset,
                                        const std::filesystem::path &image_root, const std::filesystem::path &out_dir) {
  if (grid.thresholds.empty() || grid.epochs.empty()) throw ConfigError("grid needs at least one threshold and one epoch value");
  std::size_t all_human = 0;
  for (const auto &a : dataset.annotations)
    if (a.source.is_human() && dataset.in_partition(a.image_id, Partition::Bootstrapping)) ++all_human;
  std::vector<std::optional<int>> counts;
  if (grid.annotation_counts.empty()) counts.push_back(std::nullopt);
  for (int c : grid.annotation_counts) counts.push_back(c);

  std::vector<GridRow> rows;
  std::size_t cell = 0;
  for (const auto &count : counts) {
    for (double tau : grid.thresholds) {
      for (int epochs : grid.epochs) {
        GridRow row;
        row.cell = cell;
        row.threshold = tau;
        row.epochs = epochs;
        row.annotations = count ? static_cast<std::size_t>(std::max(0, *count)) : all_human;
        RunConfig cfg = base;
        cfg.threshold = tau;
        cfg.epochs_per_iteration = epochs;
        cfg.seed = mix_seed(base.seed, cell);
        char name[32];
        std::snprintf(name, sizeof name, "cell_%03zu", cell);
        try {
          if (count && *count < 1) throw NoBootstrapError("annotation count must be >= 1");
          const auto ds = count ? subsample_bootstrap(dataset, static_cast<std::size_t>(*count), mix_seed(base.seed, 0xA77))
                                : dataset;
          const auto history = run_loop(cfg, ds, image_root, out_dir.empty() ? out_dir : out_dir / name);
          if (auto b = best_iteration(history)) {
            const auto &m = *history[*b].metrics;
            row.best_iteration = history[*b].iteration;
            row.ap75 = m.ap75;
            row.ar75 = m.ar75;
            row.n_instances = m.n_detected_instances;
          } else {
            row.status = "failed: no Testing partition to score";
          }
        } catch (const Error &e) {
          row.status = std::string("failed: ") + e.what();
        }
        rows.push_back(row);
        ++cell;
        if (!out_dir.empty()) {
          std::error_code ec;
          std::filesystem::create_directories(out_dir, ec);
          loop_detail::write_text(out_dir / "grid.csv", grid_csv(rows));
        }
      }
    }
  }
  return rows;
}

struct LoioSummary {
  Id holdout_image = 0;
  int best_iteration = 0;
  MetricsRecord best;
};

inline std::string loio_csv(const std::vector<LoioSummary> &rows) {
  using loop_detail::fmt6;
  std::string out = "holdout_image,best_iteration,ap75,ar75,n_detected,n_gt\n";
  for (const auto &r : rows)
    out += std::to_string(r.holdout_image) + "," + std::to_string(r.best_iteration) + "," + fmt6(r.best.ap75) + "," +
           fmt6(r.best.ar75) + "," + std::to_string(r.best.n_detected_instances) + "," +
           std::to_string(r.best.n_ground_truth) + "\n";
  return out;
}

/// Leave-one-image-out: every fully annotated image takes one turn as the
/// sole Testing image. The bootstrap set is `per_category` human annotations
/// per category drawn from the remaining images; everything else trains
/// unlabeled.
inline std::vector<LoioSummary> loio_eval(const RunConfig &config, const AnnotatedDataset &dataset,
                                          const std::filesystem::path &image_root, const std::filesystem::path &out_dir,
                                          std::size_t per_category = 1) {
  std::vector<Id> annotated;
  for (const auto &im : dataset.images)
    if (!dataset.annotations_on(im.id).empty()) annotated.push_back(im.id);
  std::sort(annotated.begin(), annotated.end());
  if (annotated.size() < 2) throw PartitionError("leave-one-image-out needs at least 2 annotated images");

  std::vector<LoioSummary> out;
  for (std::size_t h = 0; h < annotated.size(); ++h) {
    const Id holdout = annotated[h];
    std::mt19937_64 rng(mix_seed(config.seed, 0x1010 + h));
    std::vector<const Annotation *> pool;
    for (const auto &a : dataset.annotations)
      if (a.image_id != holdout && a.source.is_human()) pool.push_back(&a);
    std::sort(pool.begin(), pool.end(), [](auto *a, auto *b) { return a->id < b->id; });
    std::shuffle(pool.begin(), pool.end(), rng);
    std::set<Id> chosen, boot_images;
    std::map<Id, std::size_t> taken;
    for (const auto *a : pool) {
      if (taken[a->category_id] >= per_category) continue;
      ++taken[a->category_id];
      chosen.insert(a->id);
      boot_images.insert(a->image_id);
    }
    PartitionSpec spec;
    spec.testing = {holdout};
    spec.bootstrapping.assign(boot_images.begin(), boot_images.end());
    for (const auto &im : dataset.images)
      if (im.id != holdout && !boot_images.count(im.id)) spec.training.push_back(im.id);
    auto ds = make_partitions(dataset, spec);
    std::erase_if(ds.annotations, [&](const Annotation &a) {
      return ds.in_partition(a.image_id, Partition::Bootstrapping) && !chosen.count(a.id);
    });

    RunConfig cfg = config;
    cfg.seed = mix_seed(config.seed, h);
    char name[32];
    std::snprintf(name, sizeof name, "holdout_%03lld", static_cast<long long>(holdout));
    const auto history = run_loop(cfg, ds, image_root, out_dir.empty() ? out_dir : out_dir / name);
    const auto b = best_iteration(history);
    out.push_back({holdout, history[*b].iteration, *history[*b].metrics});
    if (!out_dir.empty()) loop_detail::write_text(out_dir / "loio.csv", loio_csv(out));
  }
  return out;
}

}  // namespace selfanno
