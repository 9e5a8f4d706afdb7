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
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "selfanno/dataset.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/mask.hpp"
#include "selfanno/nms.hpp"
#include "selfanno/run_config.hpp"

namespace selfanno {

struct RankedDetection {
  std::size_t input_index = 0;  // position in the detection list given to greedy_match
  Id image_id = 0;
  Id category_id = 0;
  double confidence = 0;
  bool true_positive = false;
  std::optional<Id> matched_gt;
  double iou = 0;  // IoU with the matched ground truth, 0 for FPs
};

struct MatchResult {
  std::vector<RankedDetection> ranked;  // descending confidence
  std::map<Id, std::vector<Id>> matched_gt_by_image;
  std::map<Id, std::size_t> n_gt_by_category;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
};

struct CategoryMetrics {
  double ap = 0;
  double ar = 0;
  std::size_t n_detected = 0;
  std::size_t n_gt = 0;
};

struct MetricsRecord {
  int iteration = 0;
  double ap75 = 0;
  double ar75 = 0;
  std::size_t n_detected_instances = 0;
  std::size_t n_ground_truth = 0;
  std::map<Id, CategoryMetrics> per_category;
};

using GroundTruthByImage = std::map<Id, std::vector<Annotation>>;

/// Greedy detection-to-ground-truth matching. Each image keeps only its
/// max_dets highest-confidence detections. Detections are then visited in
/// globally descending confidence (ties: ascending image id, then input
/// index) and each claims the unmatched same-category ground truth with the
/// highest IoU, provided that IoU reaches iou_threshold.
inline MatchResult greedy_match(const GroundTruthByImage &ground_truth,
                                const std::vector<Detection> &detections, double iou_threshold,
                                std::size_t max_dets = 100) {
  MatchResult result;
  for (const auto &[image, anns] : ground_truth) {
    result.matched_gt_by_image[image];
    for (const auto &a : anns) ++result.n_gt_by_category[a.category_id];
    result.n_gt += anns.size();
  }

  std::map<Id, std::vector<std::size_t>> per_image;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (!ground_truth.count(detections[i].image_id))
      throw UnknownImageError("detection on image " + std::to_string(detections[i].image_id));
    per_image[detections[i].image_id].push_back(i);
  }
  const auto by_confidence = [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  };
  std::vector<std::size_t> order;
  for (auto &[image, idx] : per_image) {
    std::stable_sort(idx.begin(), idx.end(), by_confidence);
    if (idx.size() > max_dets) idx.resize(max_dets);
    order.insert(order.end(), idx.begin(), idx.end());
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &da = detections[a], &db = detections[b];
    if (da.confidence != db.confidence) return da.confidence > db.confidence;
    if (da.image_id != db.image_id) return da.image_id < db.image_id;
    return a < b;
  });

  std::map<Id, std::vector<bool>> taken;
  for (const auto &[image, anns] : ground_truth) taken[image].assign(anns.size(), false);
  for (std::size_t idx : order) {
    const auto &det = detections[idx];
    const auto &anns = ground_truth.at(det.image_id);
    auto &used = taken[det.image_id];
    RankedDetection rd{idx, det.image_id, det.category_id, det.confidence, false, std::nullopt, 0.0};
    double best = -1;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < anns.size(); ++k) {
      if (used[k] || anns[k].category_id != det.category_id) continue;
      const double iou = rle_iou(det.mask, anns[k].mask);
      if (iou > best) {
        best = iou;
        best_k = k;
      }
    }
    if (best >= iou_threshold) {
      used[best_k] = true;
      rd.true_positive = true;
      rd.matched_gt = anns[best_k].id;
      rd.iou = best;
      result.matched_gt_by_image[det.image_id].push_back(anns[best_k].id);
    }
    result.ranked.push_back(rd);
  }
  result.n_det = result.ranked.size();
  return result;
}

/// Keeps only the entries of one category.
inline MatchResult restrict_to_category(const MatchResult &m, Id category) {
  MatchResult out;
  for (const auto &rd : m.ranked)
    if (rd.category_id == category) out.ranked.push_back(rd);
  auto it = m.n_gt_by_category.find(category);
  out.n_gt = it == m.n_gt_by_category.end() ? 0 : it->second;
  out.n_gt_by_category[category] = out.n_gt;
  out.n_det = out.ranked.size();
  for (const auto &rd : out.ranked)
    if (rd.matched_gt) out.matched_gt_by_image[rd.image_id].push_back(*rd.matched_gt);
  return out;
}

/// 101-point interpolated average precision and recall of one match.
inline std::pair<double, double> compute_metrics(const MatchResult &match) {
  if (match.n_gt == 0) throw NoGroundTruthError("no ground-truth instances to evaluate against");
  if (match.ranked.empty()) return {0.0, 0.0};
  const std::size_t n = match.ranked.size();
  std::vector<double> recall(n), precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (match.ranked[i].true_positive) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(match.n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return {sum / 101.0, static_cast<double>(tp) / static_cast<double>(match.n_gt)};
}

struct EvalParams {
  double nms_iou = 0.5;
  double eval_iou = 0.75;
  std::size_t max_dets = 100;
};

/// Scores detections against the Testing partition: per-image NMS, greedy
/// matching, then an unweighted mean over categories that have ground truth.
inline MetricsRecord evaluate_dataset(const AnnotatedDataset &dataset,
                                      const std::vector<Detection> &detections,
                                      const EvalParams &params, int iteration) {
  const auto test_images = dataset.images_in(Partition::Testing);
  if (test_images.empty()) throw EmptyTestSetError("dataset has no Testing images");
  GroundTruthByImage gt;
  for (const auto &im : test_images) gt[im.id];
  for (const auto &a : dataset.annotations)
    if (gt.count(a.image_id)) gt[a.image_id].push_back(a);

  std::vector<Detection> on_test;
  for (const auto &d : detections) {
    if (!dataset.find_image(d.image_id))
      throw UnknownImageError("detection on image " + std::to_string(d.image_id));
    if (gt.count(d.image_id)) on_test.push_back(d);
  }
  on_test = nms_per_image(on_test, params.nms_iou);
  const auto match = greedy_match(gt, on_test, params.eval_iou, params.max_dets);

  MetricsRecord rec;
  rec.iteration = iteration;
  rec.n_detected_instances = on_test.size();
  rec.n_ground_truth = match.n_gt;
  if (match.n_gt == 0) throw NoGroundTruthError("Testing images carry no annotations");

  std::set<Id> categories;
  for (const auto &[cat, n] : match.n_gt_by_category)
    if (n > 0) categories.insert(cat);
  for (const auto &d : on_test) categories.insert(d.category_id);
  double ap_sum = 0, ar_sum = 0;
  std::size_t scored = 0;
  for (Id cat : categories) {
    const auto sub = restrict_to_category(match, cat);
    CategoryMetrics cm;
    cm.n_gt = sub.n_gt;
    cm.n_detected = static_cast<std::size_t>(
        std::count_if(on_test.begin(), on_test.end(), [cat](const Detection &d) { return d.category_id == cat; }));
    if (sub.n_gt > 0) {
      std::tie(cm.ap, cm.ar) = compute_metrics(sub);
      ap_sum += cm.ap;
      ar_sum += cm.ar;
      ++scored;
    }
    rec.per_category[cat] = cm;
  }
  rec.ap75 = ap_sum / static_cast<double>(scored);
  rec.ar75 = ar_sum / static_cast<double>(scored);
  return rec;
}

inline MetricsRecord evaluate_dataset(const AnnotatedDataset &dataset,
                                      const std::vector<Detection> &detections, const RunConfig &config,
                                      int iteration) {
  return evaluate_dataset(dataset, detections,
                          EvalParams{config.nms_iou, config.eval_iou,
                                     static_cast<std::size_t>(config.max_dets_per_image)},
                          iteration);
}

}  // namespace selfanno
