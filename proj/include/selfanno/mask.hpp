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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "selfanno/errors.hpp"

namespace selfanno {

/// Dense {0,1} grid addressed as (row, column), stored row-major.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), bits(h * w, 0) {}

  std::uint8_t at(std::size_t row, std::size_t col) const { return bits[row * width + col]; }
  void set(std::size_t row, std::size_t col, bool on = true) {
    bits[row * width + col] = on ? 1 : 0;
  }
  std::size_t area() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
  bool empty() const { return area() == 0; }

  friend bool operator==(const BinaryMask &, const BinaryMask &) = default;
};

/// Column-major run lengths, starting with a (possibly empty) run of zeros.
struct RleMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> counts;

  std::size_t area() const {
    std::size_t a = 0;
    for (std::size_t i = 1; i < counts.size(); i += 2) a += counts[i];
    return a;
  }
  bool empty() const { return area() == 0; }

  friend bool operator==(const RleMask &, const RleMask &) = default;
};

/// (x, y, w, h) in pixels; all zero for an empty mask.
using BBox = std::array<double, 4>;

inline RleMask rle_encode(const BinaryMask &mask) {
  RleMask rle{mask.height, mask.width, {}};
  std::uint32_t run = 0;
  std::uint8_t prev = 0;
  for (std::size_t c = 0; c < mask.width; ++c) {
    for (std::size_t r = 0; r < mask.height; ++r) {
      const std::uint8_t v = mask.at(r, c) ? 1 : 0;
      if (v != prev) {
        rle.counts.push_back(run);
        run = 0;
        prev = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

/// Throws LengthError when the counts do not tile the grid exactly. Interior
/// zero runs are tolerated on decode.
inline BinaryMask rle_decode(const RleMask &rle) {
  std::uint64_t total = 0;
  for (auto c : rle.counts) total += c;
  if (total != static_cast<std::uint64_t>(rle.height) * rle.width) {
    throw LengthError("counts sum to " + std::to_string(total) + ", expected " +
                      std::to_string(rle.height * rle.width));
  }
  BinaryMask mask(rle.height, rle.width);
  std::size_t pos = 0;
  std::uint8_t v = 0;
  for (auto run : rle.counts) {
    for (std::uint32_t k = 0; k < run; ++k, ++pos) {
      if (v) mask.bits[(pos % rle.height) * rle.width + pos / rle.height] = 1;
    }
    v ^= 1;
  }
  return mask;
}

/// True when the counts satisfy the canonical-form invariants.
inline bool rle_is_canonical(const RleMask &rle) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    if (i > 0 && rle.counts[i] == 0) return false;
    total += rle.counts[i];
  }
  if (rle.counts.empty()) return rle.height * rle.width == 0;
  return total == static_cast<std::uint64_t>(rle.height) * rle.width;
}

inline BBox rle_bbox(const RleMask &rle) {
  if (rle.height == 0) return {0, 0, 0, 0};
  std::size_t xmin = rle.width, xmax = 0, ymin = rle.height, ymax = 0;
  std::size_t pos = 0;
  bool any = false;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const std::size_t run = rle.counts[i];
    if (i % 2 == 1 && run > 0) {
      any = true;
      const std::size_t first = pos, last = pos + run - 1;
      const std::size_t c0 = first / rle.height, c1 = last / rle.height;
      xmin = std::min(xmin, c0);
      xmax = std::max(xmax, c1);
      if (c0 == c1) {
        ymin = std::min(ymin, first % rle.height);
        ymax = std::max(ymax, last % rle.height);
      } else {
        // a run that wraps a column touches both the last and first row
        ymin = 0;
        ymax = rle.height - 1;
      }
    }
    pos += run;
  }
  if (!any) return {0, 0, 0, 0};
  return {static_cast<double>(xmin), static_cast<double>(ymin),
          static_cast<double>(xmax - xmin + 1), static_cast<double>(ymax - ymin + 1)};
}

inline BBox mask_bbox(const BinaryMask &mask) {
  std::size_t xmin = mask.width, xmax = 0, ymin = mask.height, ymax = 0;
  bool any = false;
  for (std::size_t r = 0; r < mask.height; ++r) {
    for (std::size_t c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      any = true;
      xmin = std::min(xmin, c);
      xmax = std::max(xmax, c);
      ymin = std::min(ymin, r);
      ymax = std::max(ymax, r);
    }
  }
  if (!any) return {0, 0, 0, 0};
  return {static_cast<double>(xmin), static_cast<double>(ymin),
          static_cast<double>(xmax - xmin + 1), static_cast<double>(ymax - ymin + 1)};
}

struct Point {
  double x = 0;
  double y = 0;
};

namespace detail {

inline bool on_segment(Point p, Point a, Point b) {
  const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  const double scale = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), 1.0});
  if (std::abs(cross) > 1e-9 * scale) return false;
  return p.x >= std::min(a.x, b.x) - 1e-12 && p.x <= std::max(a.x, b.x) + 1e-12 &&
         p.y >= std::min(a.y, b.y) - 1e-12 && p.y <= std::max(a.y, b.y) + 1e-12;
}

inline bool inside_even_odd(Point p, std::span<const Point> poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = poly[i], b = poly[j];
    if (on_segment(p, a, b)) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

}  // namespace detail

/// Sets every pixel whose center lies inside the polygon (even-odd rule);
/// centers exactly on an edge count as inside.
inline BinaryMask rasterize_polygon(std::span<const Point> vertices, std::size_t height,
                                    std::size_t width) {
  if (vertices.size() < 3) throw DegenerateError("polygon needs at least 3 vertices");
  double twice_area = 0;
  for (std::size_t i = 0, j = vertices.size() - 1; i < vertices.size(); j = i++) {
    twice_area += vertices[j].x * vertices[i].y - vertices[i].x * vertices[j].y;
  }
  if (std::abs(twice_area) < 1e-12) throw DegenerateError("polygon has zero area");

  BinaryMask mask(height, width);
  double xmin = vertices[0].x, xmax = xmin, ymin = vertices[0].y, ymax = ymin;
  for (const auto &v : vertices) {
    xmin = std::min(xmin, v.x);
    xmax = std::max(xmax, v.x);
    ymin = std::min(ymin, v.y);
    ymax = std::max(ymax, v.y);
  }
  const auto clamp_lo = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(std::floor(v - 0.5), 0.0, static_cast<double>(hi)));
  };
  const auto clamp_hi = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(std::ceil(v), 0.0, static_cast<double>(hi)));
  };
  const std::size_t r0 = clamp_lo(ymin, height), r1 = clamp_hi(ymax, height);
  const std::size_t c0 = clamp_lo(xmin, width), c1 = clamp_hi(xmax, width);
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t c = c0; c < c1; ++c) {
      const Point center{static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5};
      if (detail::inside_even_odd(center, vertices)) mask.set(r, c);
    }
  }
  return mask;
}

inline double mask_iou(const BinaryMask &a, const BinaryMask &b) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError("mask sizes differ");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] & b.bits[i]);
    uni += (a.bits[i] | b.bits[i]);
  }
  if (uni == 0) throw EmptyError("both masks are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// IoU computed directly on run lengths; same contract as mask_iou.
inline double rle_iou(const RleMask &a, const RleMask &b) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError("mask sizes differ");
  }
  std::size_t ia = 0, ib = 0;
  std::uint64_t ra = a.counts.empty() ? 0 : a.counts[0];
  std::uint64_t rb = b.counts.empty() ? 0 : b.counts[0];
  bool va = false, vb = false;
  std::uint64_t inter = 0, uni = 0;
  const std::uint64_t total = static_cast<std::uint64_t>(a.height) * a.width;
  std::uint64_t pos = 0;
  while (pos < total) {
    while (ra == 0 && ia + 1 < a.counts.size()) {
      ra = a.counts[++ia];
      va = !va;
    }
    while (rb == 0 && ib + 1 < b.counts.size()) {
      rb = b.counts[++ib];
      vb = !vb;
    }
    const std::uint64_t step = std::min(ra, rb);
    if (step == 0) break;  // malformed tail
    if (va || vb) uni += step;
    if (va && vb) inter += step;
    ra -= step;
    rb -= step;
    pos += step;
  }
  if (uni == 0) throw EmptyError("both masks are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace selfanno
