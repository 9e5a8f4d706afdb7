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
#include <vector>

#include "selfanno/dataset.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/mask.hpp"

namespace selfanno {

/// Greedy class-aware non-maximum suppression over one image's detections.
/// Detections are visited by descending confidence (ties by input order); a
/// detection survives iff its IoU with every kept detection of the same
/// category is at most iou_threshold. Survivors keep their input order.
inline std::vector<Detection> nms(const std::vector<Detection> &detections, double iou_threshold) {
  if (detections.empty()) return {};
  const Id image = detections.front().image_id;
  for (const auto &d : detections) {
    if (d.image_id != image) throw MixedImageError("nms input spans several images");
  }
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const auto &cand = detections[idx];
    bool keep = true;
    for (std::size_t k : kept) {
      const auto &other = detections[k];
      if (other.category_id != cand.category_id) continue;
      if (rle_iou(cand.mask, other.mask) > iou_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(detections[k]);
  return out;
}

/// Runs nms separately on each image, preserving the image order of first
/// appearance.
inline std::vector<Detection> nms_per_image(const std::vector<Detection> &detections,
                                            double iou_threshold) {
  std::vector<Id> order;
  std::map<Id, std::vector<Detection>> by_image;
  for (const auto &d : detections) {
    auto [it, inserted] = by_image.try_emplace(d.image_id);
    if (inserted) order.push_back(d.image_id);
    it->second.push_back(d);
  }
  std::vector<Detection> out;
  for (Id id : order) {
    auto kept = nms(by_image[id], iou_threshold);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  return out;
}

}  // namespace selfanno
