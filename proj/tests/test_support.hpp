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
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "selfanno/dataset.hpp"
#include "selfanno/mask.hpp"

namespace selfanno::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string &tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("selfanno_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline BinaryMask rect_mask(std::size_t h, std::size_t w, std::size_t r0, std::size_t c0, std::size_t r1,
                            std::size_t c1) {
  BinaryMask m(h, w);
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) m.set(r, c);
  return m;
}

inline RleMask rect_rle(std::size_t h, std::size_t w, std::size_t r0, std::size_t c0, std::size_t r1,
                        std::size_t c1) {
  return rle_encode(rect_mask(h, w, r0, c0, r1, c1));
}

/// Plain pixel-counting IoU, independent of the RLE walk.
inline double count_iou(const BinaryMask &a, const BinaryMask &b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] && b.bits[i]) ? 1 : 0;
    uni += (a.bits[i] || b.bits[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct OracleDet {
  Id image = 0;
  Id category = 0;
  double confidence = 0;
  std::vector<double> iou;  // against every GT of the same image, in GT order
};

struct OracleGt {
  Id image = 0;
  Id category = 0;
};

/// Brute-force AP/AR: rank, match greedily on a precomputed IoU table, then
/// take the 101-point interpolated precision as a max over the whole tail.
inline std::pair<double, double> oracle_ap_ar(const std::vector<OracleGt> &gts, std::vector<OracleDet> dets,
                                              double thr) {
  if (gts.empty()) return {0, 0};
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].confidence != dets[b].confidence) return dets[a].confidence > dets[b].confidence;
    if (dets[a].image != dets[b].image) return dets[a].image < dets[b].image;
    return a < b;
  });
  std::vector<bool> taken(gts.size(), false);
  std::vector<int> tp_flags;
  for (std::size_t idx : order) {
    const auto &d = dets[idx];
    std::size_t local = 0;
    int best = -1;
    double best_iou = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].image != d.image) continue;
      const double v = d.iou[local++];
      if (gts[g].category != d.category || taken[g]) continue;
      if (v >= thr && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) taken[static_cast<std::size_t>(best)] = true;
    tp_flags.push_back(best >= 0 ? 1 : 0);
  }
  std::vector<double> rec, prec;
  int tp = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    tp += tp_flags[i];
    rec.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
    prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  double sum = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double p = 0;
    for (std::size_t i = 0; i < rec.size(); ++i)
      if (rec[i] >= r) p = std::max(p, prec[i]);
    sum += p;
  }
  return {sum / 101.0, static_cast<double>(tp) / static_cast<double>(gts.size())};
}

}  // namespace selfanno::testing
