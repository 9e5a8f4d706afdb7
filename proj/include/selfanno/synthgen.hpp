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
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "selfanno/coco_io.hpp"
#include "selfanno/dataset.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/image.hpp"
#include "selfanno/mask.hpp"
#include "selfanno/run_config.hpp"

namespace selfanno {

enum class OverlapMode { Unconnected, LooselyOverlapping, HeavilyConnected };

inline const char *to_string(OverlapMode m) {
  switch (m) {
    case OverlapMode::Unconnected: return "unconnected";
    case OverlapMode::LooselyOverlapping: return "loosely_overlapping";
    case OverlapMode::HeavilyConnected: return "heavily_connected";
  }
  return "";
}

using Rgb = std::array<double, 3>;

/// Color model of one category: every instance draws a relative brightness
/// factor (instance_sigma) and a small per-channel tint (tint_sigma) around
/// `color`; every pixel adds texture noise.
struct Appearance {
  Rgb color{0.45, 0.30, 0.18};
  double instance_sigma = 0.06;
  double tint_sigma = 0.02;
  double texture_sigma = 0.03;
};

struct SceneSpec {
  std::size_t width = 128;
  std::size_t height = 128;
  std::map<Id, int> n_instances;  // per category
  OverlapMode overlap_mode = OverlapMode::Unconnected;
  int distractor_count = 0;
  Id distractor_mimics = 0;        // category whose shape/appearance distractors copy; 0 = first
  double distractor_hue_delta = 120.0;  // degrees
  double distractor_fade = 0.0;         // blend of distractor color toward the background, in [0,1]
  std::map<Id, Appearance> appearance;
  Rgb background{0.86, 0.84, 0.78};
  double background_sigma = 0.02;
  double noise_sigma = 0.015;
  double radius_min = 7.0;
  double radius_max = 10.0;
  std::size_t min_visible_area = 30;
  /// Where a later instance lies against or on an earlier one, its edge
  /// catches light: its pixels within `contact_rim_width` (Chebyshev) of the
  /// earlier instance are blended toward the background by `contact_rim`.
  /// Masks are unaffected; 0 disables the effect.
  double contact_rim = 0.85;
  int contact_rim_width = 1;
  std::uint64_t seed = 0;
};

struct Blob {
  double cx = 0, cy = 0;
  double a = 0, b = 0;  // ellipse semi-axes
  double angle = 0;
  std::array<double, 8> amp{};
  std::array<double, 8> phase{};

  double bound_radius() const {
    double s = 0;
    for (double v : amp) s += v;
    return std::max(a, b) * (1.0 + s);
  }

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double r = std::hypot(dx, dy);
    if (r == 0) return true;
    const double phi = std::atan2(dy, dx);
    const double local = phi - angle;
    const double ca = std::cos(local), sa = std::sin(local);
    double radius = a * b / std::sqrt(b * b * ca * ca + a * a * sa * sa);
    double mod = 1.0;
    for (std::size_t k = 0; k < amp.size(); ++k) mod += amp[k] * std::cos(static_cast<double>(k + 1) * phi + phase[k]);
    radius *= mod;
    return r <= radius;
  }

  BinaryMask rasterize(std::size_t h, std::size_t w) const {
    BinaryMask m(h, w);
    const double br = bound_radius() + 1;
    const long r0 = std::max(0L, static_cast<long>(std::floor(cy - br)));
    const long r1 = std::min(static_cast<long>(h) - 1, static_cast<long>(std::ceil(cy + br)));
    const long c0 = std::max(0L, static_cast<long>(std::floor(cx - br)));
    const long c1 = std::min(static_cast<long>(w) - 1, static_cast<long>(std::ceil(cx + br)));
    for (long r = r0; r <= r1; ++r)
      for (long c = c0; c <= c1; ++c)
        if (contains(static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5))
          m.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    return m;
  }
};

struct SceneInstance {
  Id category_id = 0;
  bool distractor = false;
  Blob blob;
  BinaryMask full;     // pre-occlusion shape
  BinaryMask visible;  // after later instances are drawn on top
};

struct Scene {
  RgbImage image;
  std::vector<Annotation> annotations;  // image_id 0, ids from 1, target instances only
  std::vector<SceneInstance> instances;  // draw order, including distractors and dropped ones
};

namespace synth_detail {

inline Rgb rotate_hue(const Rgb &rgb, double degrees) {
  // RGB -> HSV -> RGB with the hue shifted
  const double mx = std::max({rgb[0], rgb[1], rgb[2]}), mn = std::min({rgb[0], rgb[1], rgb[2]});
  const double v = mx, d = mx - mn, s = mx > 0 ? d / mx : 0;
  double h = 0;
  if (d > 0) {
    if (mx == rgb[0]) h = std::fmod((rgb[1] - rgb[2]) / d, 6.0);
    else if (mx == rgb[1]) h = (rgb[2] - rgb[0]) / d + 2;
    else h = (rgb[0] - rgb[1]) / d + 4;
    h *= 60;
  }
  h = std::fmod(h + degrees + 360.0 * 4, 360.0);
  const double c = v * s, x = c * (1 - std::abs(std::fmod(h / 60.0, 2.0) - 1)), m = v - c;
  Rgb out{};
  if (h < 60) out = {c, x, 0};
  else if (h < 120) out = {x, c, 0};
  else if (h < 180) out = {0, c, x};
  else if (h < 240) out = {0, x, c};
  else if (h < 300) out = {x, 0, c};
  else out = {c, 0, x};
  return {out[0] + m, out[1] + m, out[2] + m};
}

/// Square (Chebyshev) dilation by `radius` pixels.
inline BinaryMask dilate(const BinaryMask &m, int radius) {
  BinaryMask out(m.height, m.width);
  const long h = static_cast<long>(m.height), w = static_cast<long>(m.width);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      if (!m.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) continue;
      for (long rr = std::max(0L, r - radius); rr <= std::min(h - 1, r + radius); ++rr)
        for (long cc = std::max(0L, c - radius); cc <= std::min(w - 1, c + radius); ++cc)
          out.set(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
    }
  return out;
}

inline bool intersects(const BinaryMask &a, const BinaryMask &b) {
  for (std::size_t i = 0; i < a.bits.size(); ++i)
    if (a.bits[i] && b.bits[i]) return true;
  return false;
}

inline void unite(BinaryMask &into, const BinaryMask &m) {
  for (std::size_t i = 0; i < m.bits.size(); ++i) into.bits[i] |= m.bits[i];
}

inline bool touching(const BinaryMask &a, const BinaryMask &b) { return intersects(dilate(a, 1), b); }

inline Blob random_blob(const SceneSpec &spec, std::mt19937_64 &rng, double cx, double cy) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Blob b;
  b.cx = cx;
  b.cy = cy;
  const double base = spec.radius_min + (spec.radius_max - spec.radius_min) * u(rng);
  const double ecc = 0.75 + 0.25 * u(rng);
  b.a = base;
  b.b = base * ecc;
  b.angle = std::numbers::pi * u(rng);
  double total = 0;
  for (std::size_t k = 0; k < b.amp.size(); ++k) {
    b.amp[k] = u(rng) / static_cast<double>(k + 2);
    b.phase[k] = 2 * std::numbers::pi * u(rng);
    total += b.amp[k];
  }
  // irregularity budget: harmonics sum to at most 0.3 of the radius
  const double budget = 0.08 + 0.14 * u(rng);
  for (double &v : b.amp) v *= budget / total;
  return b;
}

inline bool inside_canvas(const BinaryMask &m, const Blob &b) {
  // every pixel the blob would cover must fit, and it must not be clipped
  const double br = b.bound_radius();
  return b.cx - br >= 1 && b.cy - br >= 1 && b.cx + br <= static_cast<double>(m.width) - 1 &&
         b.cy + br <= static_cast<double>(m.height) - 1;
}

}  // namespace synth_detail

/// Draws one scene. Deterministic in spec (including seed).
inline Scene generate_scene(const SceneSpec &spec) {
  using namespace synth_detail;
  const std::size_t h = spec.height, w = spec.width;
  if (h == 0 || w == 0) throw GeometryError("scene size must be positive");

  std::vector<Id> targets;
  for (const auto &[cat, n] : spec.n_instances) {
    if (n < 0) throw SchemaError("instance count must be >= 0");
    for (int i = 0; i < n; ++i) targets.push_back(cat);
  }
  const std::size_t total = targets.size() + static_cast<std::size_t>(std::max(0, spec.distractor_count));
  const double min_area = std::numbers::pi * spec.radius_min * spec.radius_min * 0.75 * 0.7;
  if (static_cast<double>(total) * min_area > static_cast<double>(h * w))
    throw PackingError(std::to_string(total) + " instances cannot fit a " + std::to_string(h) + "x" +
                       std::to_string(w) + " canvas");

  std::mt19937_64 rng(mix_seed(spec.seed, 0x5C3E));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::shuffle(targets.begin(), targets.end(), rng);

  constexpr int kSceneAttempts = 25;
  constexpr int kPlacementAttempts = 400;
  for (int attempt = 0; attempt < kSceneAttempts; ++attempt) {
    std::vector<SceneInstance> placed;
    BinaryMask occupied(h, w);
    bool failed = false;

    const auto free_spot = [&](Id cat, bool distractor, int separation) -> bool {
      for (int t = 0; t < kPlacementAttempts; ++t) {
        Blob b = random_blob(spec, rng, u(rng) * static_cast<double>(w), u(rng) * static_cast<double>(h));
        if (!inside_canvas(occupied, b)) continue;
        auto m = b.rasterize(h, w);
        if (m.area() == 0) continue;
        if (separation >= 0 && intersects(dilate(m, separation), occupied)) continue;
        unite(occupied, m);
        placed.push_back({cat, distractor, b, m, {}});
        return true;
      }
      return false;
    };

    // place a blob touching or overlapping `anchor`, keeping full-shape IoU <= max_iou
    const auto next_to = [&](Id cat, std::size_t anchor, double max_iou, bool keep_clear_of_others) -> bool {
      const auto &ref = placed[anchor];
      for (int t = 0; t < kPlacementAttempts; ++t) {
        const double phi = 2 * std::numbers::pi * u(rng);
        Blob b = random_blob(spec, rng, 0, 0);
        const double dist = (std::min(ref.blob.a, ref.blob.b) + std::min(b.a, b.b)) * (0.8 + 0.35 * u(rng));
        b.cx = ref.blob.cx + dist * std::cos(phi);
        b.cy = ref.blob.cy + dist * std::sin(phi);
        if (!inside_canvas(occupied, b)) continue;
        auto m = b.rasterize(h, w);
        if (m.area() == 0 || !touching(m, ref.full)) continue;
        if (mask_iou(m, ref.full) > max_iou) continue;
        if (keep_clear_of_others) {
          BinaryMask others(h, w);
          for (std::size_t k = 0; k < placed.size(); ++k)
            if (k != anchor) unite(others, placed[k].full);
          if (intersects(dilate(m, 2), others)) continue;
        }
        unite(occupied, m);
        placed.push_back({cat, false, b, m, {}});
        return true;
      }
      return false;
    };

    std::size_t i = 0;
    switch (spec.overlap_mode) {
      case OverlapMode::Unconnected:
        for (; i < targets.size() && !failed; ++i) failed = !free_spot(targets[i], false, 2);
        break;
      case OverlapMode::LooselyOverlapping: {
        const std::size_t pairs = targets.size() >= 2 ? std::max<std::size_t>(1, targets.size() / 8) : 0;
        for (std::size_t p = 0; p < pairs && !failed; ++p) {
          failed = !free_spot(targets[i++], false, 2);
          if (!failed) failed = !next_to(targets[i++], placed.size() - 1, 0.3, true);
        }
        for (; i < targets.size() && !failed; ++i) failed = !free_spot(targets[i], false, 2);
        break;
      }
      case OverlapMode::HeavilyConnected:
        for (; i < targets.size() && !failed; ++i) {
          if (placed.empty() || u(rng) < 0.25) {
            failed = !free_spot(targets[i], false, -1);
          } else {
            std::uniform_int_distribution<std::size_t> pick(0, placed.size() - 1);
            failed = !next_to(targets[i], pick(rng), 0.3, false);
          }
        }
        break;
    }
    if (failed) continue;

    const Id mimic = spec.distractor_mimics != 0 ? spec.distractor_mimics
                     : spec.n_instances.empty() ? 0 : spec.n_instances.begin()->first;
    for (int d = 0; d < spec.distractor_count && !failed; ++d) failed = !free_spot(mimic, true, 2);
    if (failed) continue;

    // visible regions: later instances occlude earlier ones
    BinaryMask above(h, w);
    for (std::size_t k = placed.size(); k-- > 0;) {
      placed[k].visible = placed[k].full;
      for (std::size_t p = 0; p < above.bits.size(); ++p)
        if (above.bits[p]) placed[k].visible.bits[p] = 0;
      unite(above, placed[k].full);
    }

    if (spec.overlap_mode == OverlapMode::HeavilyConnected) {
      std::vector<const SceneInstance *> kept;
      for (const auto &inst : placed)
        if (!inst.distractor && inst.visible.area() >= spec.min_visible_area) kept.push_back(&inst);
      std::size_t with_neighbor = 0;
      for (const auto *a : kept)
        for (const auto *b : kept)
          if (a != b && touching(a->visible, b->visible)) {
            ++with_neighbor;
            break;
          }
      if (2 * with_neighbor < kept.size()) continue;
    }

    Scene scene;
    scene.image = RgbImage(h, w);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Rgb> colors;
    for (const auto &inst : placed) {
      Appearance app;
      if (auto it = spec.appearance.find(inst.category_id); it != spec.appearance.end()) app = it->second;
      const Rgb base = inst.distractor ? rotate_hue(app.color, spec.distractor_hue_delta) : app.color;
      const double shade = std::max(0.05, 1.0 + app.instance_sigma * gauss(rng));
      Rgb c{};
      for (int k = 0; k < 3; ++k) c[k] = base[k] * shade + app.tint_sigma * gauss(rng);
      if (inst.distractor)
        for (int k = 0; k < 3; ++k) c[k] = (1 - spec.distractor_fade) * c[k] + spec.distractor_fade * spec.background[k];
      colors.push_back(c);
    }
    std::vector<int> owner(h * w, -1);
    for (std::size_t k = 0; k < placed.size(); ++k)
      for (std::size_t p = 0; p < h * w; ++p)
        if (placed[k].visible.bits[p]) owner[p] = static_cast<int>(k);
    const int sw = std::max(0, spec.contact_rim_width);
    const auto on_rim = [&](std::size_t p) {
      if (sw == 0 || spec.contact_rim == 0.0) return false;
      const long r = static_cast<long>(p / w), c = static_cast<long>(p % w);
      for (long dr = -sw; dr <= sw; ++dr)
        for (long dc = -sw; dc <= sw; ++dc) {
          const long rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
          const int o = owner[static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)];
          if (o >= 0 && o < owner[p]) return true;
        }
      return false;
    };
    for (std::size_t p = 0; p < h * w; ++p) {
      Rgb px{};
      if (owner[p] < 0) {
        for (int k = 0; k < 3; ++k) px[k] = spec.background[k] + spec.background_sigma * gauss(rng);
      } else {
        const auto &inst = placed[static_cast<std::size_t>(owner[p])];
        Appearance app;
        if (auto it = spec.appearance.find(inst.category_id); it != spec.appearance.end()) app = it->second;
        const double tex = app.texture_sigma * gauss(rng);
        const double rim = on_rim(p) ? spec.contact_rim : 0.0;
        for (int k = 0; k < 3; ++k)
          px[k] = (1 - rim) * colors[static_cast<std::size_t>(owner[p])][k] + rim * spec.background[k] + tex;
      }
      for (int k = 0; k < 3; ++k) {
        const double v = std::clamp(px[k] + spec.noise_sigma * gauss(rng), 0.0, 1.0);
        scene.image.pixels[3 * p + static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }

    Id next_id = 1;
    for (const auto &inst : placed) {
      if (inst.distractor || inst.visible.area() < spec.min_visible_area) continue;
      scene.annotations.push_back(make_annotation(next_id++, 0, inst.category_id, rle_encode(inst.visible)));
    }
    scene.instances = std::move(placed);
    return scene;
  }
  throw PackingError("could not place " + std::to_string(total) + " instances after " +
                     std::to_string(kSceneAttempts) + " attempts");
}

struct ExperimentSpec {
  std::vector<CategoryDef> categories{{1, "particle"}};
  SceneSpec scene;  // template for bootstrap and training scenes (seed and mode are overridden)
  int bootstrap_images = 2;
  int bootstrap_annotations = 6;
  /// Spread the bootstrap annotations evenly over categories (the multi-class
  /// setup annotates one object per class).
  bool annotations_per_category = false;
  std::vector<OverlapMode> bootstrap_modes{OverlapMode::Unconnected, OverlapMode::HeavilyConnected};
  int training_images = 50;
  std::vector<OverlapMode> training_modes{OverlapMode::Unconnected, OverlapMode::LooselyOverlapping,
                                          OverlapMode::HeavilyConnected};
  std::vector<SceneSpec> testing;  // seeds are overridden
  bool bootstrap_in_training = true;
  std::uint64_t seed = 0;
};

/// Three test scenes, one per overlap regime, sharing the template's look.
inline std::vector<SceneSpec> standard_test_scenes(const SceneSpec &tmpl) {
  std::vector<SceneSpec> out;
  for (auto mode : {OverlapMode::Unconnected, OverlapMode::LooselyOverlapping, OverlapMode::HeavilyConnected}) {
    SceneSpec s = tmpl;
    s.overlap_mode = mode;
    out.push_back(s);
  }
  return out;
}

struct GeneratedExperiment {
  AnnotatedDataset dataset;    // partitioned, bootstrap labels only on the training side
  AnnotatedDataset full_truth; // same images, every target instance annotated
};

/// Writes images/NNNN.png, dataset.json and full_truth.json under out_dir.
inline GeneratedExperiment generate_experiment(const ExperimentSpec &spec, const std::filesystem::path &out_dir) {
  if (spec.bootstrap_annotations < 1) throw SchemaError("bootstrap needs at least one annotation");
  if (spec.bootstrap_images < 1) throw SchemaError("bootstrap needs at least one image");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  GeneratedExperiment out;
  AnnotatedDataset &full = out.full_truth;
  full.categories = spec.categories;
  PartitionSpec parts;
  parts.bootstrap_in_training = spec.bootstrap_in_training;
  Id next_image = 1, next_ann = 1;
  std::uint64_t scene_index = 0;

  const auto add_scene = [&](SceneSpec s) -> Id {
    s.seed = mix_seed(spec.seed, scene_index++);
    auto scene = generate_scene(s);
    const Id id = next_image++;
    char name[32];
    std::snprintf(name, sizeof name, "images/%04lld.png", static_cast<long long>(id));
    write_png(out_dir / name, scene.image);
    full.images.push_back({id, s.width, s.height, name});
    for (auto &a : scene.annotations) {
      a.id = next_ann++;
      a.image_id = id;
      full.annotations.push_back(std::move(a));
    }
    return id;
  };

  for (int i = 0; i < spec.bootstrap_images; ++i) {
    SceneSpec s = spec.scene;
    if (!spec.bootstrap_modes.empty()) s.overlap_mode = spec.bootstrap_modes[static_cast<std::size_t>(i) % spec.bootstrap_modes.size()];
    parts.bootstrapping.push_back(add_scene(s));
  }
  for (int i = 0; i < spec.training_images; ++i) {
    SceneSpec s = spec.scene;
    if (!spec.training_modes.empty()) s.overlap_mode = spec.training_modes[static_cast<std::size_t>(i) % spec.training_modes.size()];
    parts.training.push_back(add_scene(s));
  }
  for (const auto &t : spec.testing) parts.testing.push_back(add_scene(t));
  for (const auto &im : full.images) full.partition_of[im.id] = membership_of({Partition::Training});

  // choose the human bootstrap annotations
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < full.annotations.size(); ++k) {
    const Id img = full.annotations[k].image_id;
    if (std::find(parts.bootstrapping.begin(), parts.bootstrapping.end(), img) != parts.bootstrapping.end())
      candidates.push_back(k);
  }
  std::mt19937_64 rng(mix_seed(spec.seed, 0xB007));
  std::shuffle(candidates.begin(), candidates.end(), rng);
  std::vector<std::size_t> chosen;
  if (spec.annotations_per_category) {
    const std::size_t per = static_cast<std::size_t>(spec.bootstrap_annotations) /
                            std::max<std::size_t>(1, spec.categories.size());
    for (const auto &cat : spec.categories) {
      std::size_t got = 0;
      for (std::size_t k : candidates)
        if (got < std::max<std::size_t>(1, per) && full.annotations[k].category_id == cat.id) {
          chosen.push_back(k);
          ++got;
        }
    }
  } else {
    chosen.assign(candidates.begin(),
                  candidates.begin() + std::min<std::ptrdiff_t>(spec.bootstrap_annotations,
                                                                static_cast<std::ptrdiff_t>(candidates.size())));
  }
  if (chosen.size() < static_cast<std::size_t>(spec.bootstrap_annotations) && !spec.annotations_per_category)
    throw SchemaError("bootstrap images hold only " + std::to_string(candidates.size()) + " instances, " +
                      std::to_string(spec.bootstrap_annotations) + " requested");

  AnnotatedDataset labeled = full;
  std::set<Id> keep_ids;
  for (std::size_t k : chosen) keep_ids.insert(full.annotations[k].id);
  std::erase_if(labeled.annotations, [&](const Annotation &a) {
    const bool on_bootstrap =
        std::find(parts.bootstrapping.begin(), parts.bootstrapping.end(), a.image_id) != parts.bootstrapping.end();
    return on_bootstrap && !keep_ids.count(a.id);
  });
  out.dataset = make_partitions(labeled, parts);
  validate(out.dataset);
  save_coco(out.dataset, out_dir / "dataset.json");
  save_coco(full, out_dir / "full_truth.json");
  return out;
}

/// Single-class particle experiment: 2 bootstrap images (unconnected and
/// heavily connected), 50 training images, one test scene per regime.
/// Grains vary widely in roast brightness, so a handful of annotations
/// under-covers the class.
inline ExperimentSpec coffee_preset() {
  ExperimentSpec spec;
  spec.categories = {{1, "particle"}};
  spec.scene.n_instances = {{1, 28}};
  spec.scene.appearance[1] = Appearance{{0.45, 0.30, 0.18}, 0.5, 0.02, 0.03};
  spec.bootstrap_images = 2;
  spec.bootstrap_annotations = 6;
  spec.training_images = 50;
  spec.testing = standard_test_scenes(spec.scene);
  return spec;
}

/// The particle experiment with four pale look-alikes per scene: a small hue
/// shift, faded halfway to the background.
inline ExperimentSpec drift_preset() {
  ExperimentSpec spec = coffee_preset();
  spec.scene.n_instances = {{1, 24}};
  spec.scene.distractor_count = 4;
  spec.scene.distractor_hue_delta = 30;
  spec.scene.distractor_fade = 0.5;
  spec.testing = standard_test_scenes(spec.scene);
  return spec;
}

/// Three classes with one annotation each and foil-wrapped look-alikes.
inline ExperimentSpec fruits_preset() {
  ExperimentSpec spec;
  spec.categories = {{1, "date"}, {2, "fig"}, {3, "hazelnut"}};
  spec.scene.n_instances = {{1, 4}, {2, 4}, {3, 4}};
  spec.scene.appearance[1] = Appearance{{0.35, 0.18, 0.10}, 0.1, 0.02, 0.03};
  spec.scene.appearance[2] = Appearance{{0.45, 0.35, 0.50}, 0.1, 0.02, 0.03};
  spec.scene.appearance[3] = Appearance{{0.65, 0.48, 0.28}, 0.1, 0.02, 0.03};
  spec.scene.distractor_count = 3;
  spec.scene.distractor_hue_delta = 40;
  spec.scene.distractor_fade = 0.5;
  spec.bootstrap_images = 1;
  spec.bootstrap_annotations = 3;
  spec.annotations_per_category = true;
  spec.bootstrap_modes = {OverlapMode::Unconnected};
  spec.training_modes = {OverlapMode::Unconnected};
  spec.training_images = 17;
  spec.testing = {spec.scene};
  return spec;
}

}  // namespace selfanno
