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


#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "selfanno/errors.hpp"
#include "selfanno/nms.hpp"
#include "selfanno/selfloop.hpp"
#include "test_support.hpp"

using namespace selfanno;
using selfanno::testing::rect_rle;

namespace {

Detection det(Id cat, RleMask m, double conf, Id image = 1) { return Detection{image, cat, std::move(m), conf}; }

// Strip detections [c0, c1) on a 1x16 canvas.
Detection strip(std::size_t c0, std::size_t c1, double conf, Id cat = 1) {
  return det(cat, rect_rle(1, 16, 0, c0, 1, c1), conf);
}

std::vector<Detection> random_detections(std::mt19937_64 &rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> pos(0, 10), len(1, 6), cat(1, 2);
  std::uniform_real_distribution<double> conf(0, 1);
  std::vector<Detection> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = pos(rng), c = pos(rng);
    out.push_back(det(static_cast<Id>(cat(rng)), rect_rle(16, 16, r, c, r + len(rng), c + len(rng)),
                      std::round(conf(rng) * 20) / 20));  // coarse confidences force ties
  }
  return out;
}

bool is_subsequence(const std::vector<Detection> &sub, const std::vector<Detection> &all) {
  std::size_t j = 0;
  for (const auto &d : all)
    if (j < sub.size() && sub[j] == d) ++j;
  return j == sub.size();
}

}  // namespace

TEST(Nms, HigherConfidenceWins) {
  const auto a = det(1, rect_rle(10, 10, 0, 0, 10, 10), 0.9);
  const auto b = det(1, rect_rle(10, 10, 0, 0, 9, 10), 0.8);
  ASSERT_DOUBLE_EQ(rle_iou(a.mask, b.mask), 0.9);
  EXPECT_EQ(nms({b, a}, 0.5), (std::vector<Detection>{a}));
}

TEST(Nms, ClassAware) {
  const auto a = det(1, rect_rle(10, 10, 0, 0, 10, 10), 0.9);
  const auto b = det(2, rect_rle(10, 10, 0, 0, 9, 10), 0.8);
  EXPECT_EQ(nms({a, b}, 0.5).size(), 2u);
}

TEST(Nms, SuppressedDetectionsDoNotSuppress) {
  const auto a = strip(0, 6, 0.9), b = strip(2, 10, 0.8), c = strip(6, 12, 0.7);
  ASSERT_DOUBLE_EQ(rle_iou(a.mask, b.mask), 0.4);
  ASSERT_DOUBLE_EQ(rle_iou(b.mask, c.mask), 0.4);
  ASSERT_DOUBLE_EQ(rle_iou(a.mask, c.mask), 0.0);
  EXPECT_EQ(nms({a, b, c}, 0.3), (std::vector<Detection>{a, c}));
  EXPECT_EQ(nms({c, b, a}, 0.3), (std::vector<Detection>{c, a}));  // input order kept
}

TEST(Nms, IouEqualToThresholdSurvives) {
  const auto a = strip(0, 6, 0.9), b = strip(2, 10, 0.8);
  EXPECT_EQ(nms({a, b}, 0.4).size(), 2u);
}

TEST(Nms, TiesBrokenByInputOrder) {
  const auto a = strip(0, 8, 0.5), b = strip(0, 8, 0.5);
  auto b2 = b;
  b2.category_id = 1;
  b2.mask = rect_rle(1, 16, 0, 0, 1, 7);
  EXPECT_EQ(nms({b2, a}, 0.5), (std::vector<Detection>{b2}));
  EXPECT_EQ(nms({a, b2}, 0.5), (std::vector<Detection>{a}));
}

TEST(Nms, MixedImagesRejected) {
  auto a = strip(0, 4, 0.9), b = strip(0, 4, 0.9);
  b.image_id = 2;
  EXPECT_THROW(nms({a, b}, 0.5), MixedImageError);
  const auto split = nms_per_image({a, b}, 0.5);
  EXPECT_EQ(split.size(), 2u);
}

TEST(Nms, EmptyInput) { EXPECT_TRUE(nms({}, 0.5).empty()); }

TEST(NmsLaws, IdempotentSubsetAndPairwiseBounded) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto dets = random_detections(rng, 1 + trial % 9);
    for (double thr : {0.0, 0.3, 0.5, 0.9}) {
      const auto once = nms(dets, thr);
      EXPECT_EQ(nms(once, thr), once);
      EXPECT_TRUE(is_subsequence(once, dets));
      EXPECT_FALSE(once.empty());
      for (std::size_t i = 0; i < once.size(); ++i)
        for (std::size_t j = i + 1; j < once.size(); ++j)
          if (once[i].category_id == once[j].category_id) EXPECT_LE(rle_iou(once[i].mask, once[j].mask), thr);
    }
  }
}

TEST(Filter, KeepsAtOrAboveTau) {
  std::vector<Detection> d{strip(0, 2, 0.9), strip(3, 5, 0.5), strip(6, 8, 0.2)};
  EXPECT_EQ(filter_detections(d, 0.25), (std::vector<Detection>{d[0], d[1]}));
  EXPECT_EQ(filter_detections(d, 0.5).size(), 2u);
  EXPECT_EQ(filter_detections(d, 0.0), d);
  EXPECT_TRUE(filter_detections(d, 1.01).empty());
}

TEST(FilterLaws, MonotoneAndIdempotent) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto dets = random_detections(rng, trial % 12);
    const double t1 = u(rng), t2 = t1 + (1 - t1) * u(rng);
    const auto lo = filter_detections(dets, t1), hi = filter_detections(dets, t2);
    EXPECT_TRUE(is_subsequence(hi, lo));
    EXPECT_EQ(filter_detections(lo, t1), lo);
  }
  // the three thresholds of the threshold sweep give non-increasing counts
  const auto dets = random_detections(rng, 40);
  const auto n25 = filter_detections(dets, 0.25).size(), n50 = filter_detections(dets, 0.5).size(),
             n75 = filter_detections(dets, 0.75).size();
  EXPECT_GE(n25, n50);
  EXPECT_GE(n50, n75);
}
