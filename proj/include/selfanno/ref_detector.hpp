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
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "selfanno/dataset.hpp"
#include "selfanno/detector.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/image.hpp"
#include "selfanno/mask.hpp"
#include "selfanno/run_config.hpp"

namespace selfanno {

inline constexpr std::size_t kFeatureDim = 5;
inline constexpr double kVarianceFloor = 1e-6;

/// (r, g, b, local 3x3 mean intensity, local 3x3 intensity std), all in [0,1].
using PixelFeature = std::array<double, kFeatureDim>;

/// Planar float image with channels normalized to [0,1].
struct FloatImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::array<std::vector<double>, 3> channels;

  FloatImage() = default;
  FloatImage(std::size_t h, std::size_t w) : height(h), width(w) {
    for (auto &c : channels) c.assign(h * w, 0.0);
  }
  static FloatImage from_rgb(const RgbImage &img) {
    FloatImage f(img.height, img.width);
    for (std::size_t i = 0; i < img.height * img.width; ++i)
      for (int k = 0; k < 3; ++k) f.channels[k][i] = img.pixels[3 * i + k] / 255.0;
    return f;
  }
};

struct FeatureGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<PixelFeature> data;

  const PixelFeature &at(std::size_t r, std::size_t c) const { return data[r * width + c]; }
};

inline FeatureGrid extract_features(const FloatImage &img) {
  const std::size_t h = img.height, w = img.width;
  std::vector<double> intensity(h * w);
  for (std::size_t i = 0; i < h * w; ++i)
    intensity[i] = (img.channels[0][i] + img.channels[1][i] + img.channels[2][i]) / 3.0;

  FeatureGrid grid{h, w, std::vector<PixelFeature>(h * w)};
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      std::array<double, 9> window;
      std::size_t k = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          // edge replication
          const auto rr = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(r) + dr, 0, static_cast<long>(h) - 1));
          const auto cc = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(c) + dc, 0, static_cast<long>(w) - 1));
          window[k++] = intensity[rr * w + cc];
        }
      }
      double mean = 0;
      for (double v : window) mean += v;
      mean /= 9.0;
      double ss = 0;
      for (double v : window) ss += (v - mean) * (v - mean);
      const std::size_t i = r * w + c;
      grid.data[i] = {img.channels[0][i], img.channels[1][i], img.channels[2][i], mean, std::sqrt(ss / 9.0)};
    }
  }
  return grid;
}

inline FeatureGrid extract_features(const RgbImage &img) { return extract_features(FloatImage::from_rgb(img)); }

/// Running diagonal Gaussian for one class.
struct ClassModel {
  Id id = 0;  // 0 is the background model
  std::uint64_t n = 0;
  PixelFeature mean{};
  PixelFeature var{};

  /// Count-weighted merge of a batch summarized by (count, mean, population variance).
  void merge(std::uint64_t m, const PixelFeature &batch_mean, const PixelFeature &batch_var) {
    if (m == 0) return;
    const double nn = static_cast<double>(n), mm = static_cast<double>(m), tot = nn + mm;
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      const double delta = batch_mean[k] - mean[k];
      const double m2 = nn * var[k] + mm * batch_var[k] + delta * delta * nn * mm / tot;
      mean[k] = (nn * mean[k] + mm * batch_mean[k]) / tot;
      var[k] = m2 / tot;
    }
    n += m;
    if (n >= 2)
      for (auto &v : var) v = std::max(v, kVarianceFloor);
  }

  double log_likelihood(const PixelFeature &x) const {
    double ll = 0;
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      const double v = std::max(var[k], kVarianceFloor);
      const double d = x[k] - mean[k];
      ll -= 0.5 * (std::log(2.0 * std::numbers::pi * v) + d * d / v);
    }
    return ll;
  }

  friend bool operator==(const ClassModel &, const ClassModel &) = default;
};

struct RefDetectorParams {
  double pixel_threshold = 0.5;
  /// Log-odds divisor for the scores. The five features are strongly
  /// correlated, so the raw naive-Bayes ratio is overconfident; dividing by the
  /// feature count scores by the per-feature geometric mean instead. The
  /// foreground decision at pixel_threshold 0.5 does not depend on it.
  double score_temperature = static_cast<double>(kFeatureDim);
  std::size_t min_area = 30;
  int connectivity = 8;
  bool flips = true;
  bool rotations = true;
  bool noise = true;
  double noise_sigma = 0.02;

  friend bool operator==(const RefDetectorParams &, const RefDetectorParams &) = default;
};

struct RefModelState {
  ClassModel background;
  std::vector<ClassModel> categories;  // ascending id

  ClassModel &category(Id id) {
    auto it = std::lower_bound(categories.begin(), categories.end(), id,
                               [](const ClassModel &m, Id v) { return m.id < v; });
    if (it == categories.end() || it->id != id) it = categories.insert(it, ClassModel{id, 0, {}, {}});
    return *it;
  }
  bool trained() const {
    return std::any_of(categories.begin(), categories.end(), [](const ClassModel &m) { return m.n >= 2; });
  }
  friend bool operator==(const RefModelState &, const RefModelState &) = default;
};

namespace ref_detail {

/// An image prepared for repeated presentation: float channels plus a label
/// map holding a category id per pixel (0 = unlabeled). Where annotations
/// overlap, the one with the larger id owns the pixel.
struct PreparedImage {
  FloatImage image;
  std::vector<Id> labels;
};

inline PreparedImage prepare(const TrainItem &item, const std::filesystem::path &root) {
  PreparedImage p{FloatImage::from_rgb(load_image_for(item.image, root)), {}};
  p.labels.assign(item.image.height * item.image.width, 0);
  auto anns = item.annotations;
  std::sort(anns.begin(), anns.end(), [](const auto &a, const auto &b) { return a.id < b.id; });
  for (const auto &a : anns) {
    if (a.mask.height != item.image.height || a.mask.width != item.image.width)
      throw GeometryError("annotation " + std::to_string(a.id) + " does not match its image");
    const auto m = rle_decode(a.mask);
    for (std::size_t i = 0; i < m.bits.size(); ++i)
      if (m.bits[i]) p.labels[i] = a.category_id;
  }
  return p;
}

struct Augmentation {
  bool flip_h = false;
  bool flip_v = false;
  int quarter_turns = 0;
  bool noise = false;
};

/// Maps output pixel (r, c) of the transformed grid back to the source grid.
struct GridTransform {
  std::size_t src_h, src_w, out_h, out_w;
  Augmentation aug;

  GridTransform(std::size_t h, std::size_t w, const Augmentation &a) : src_h(h), src_w(w), aug(a) {
    const bool swap = a.quarter_turns % 2 == 1;
    out_h = swap ? w : h;
    out_w = swap ? h : w;
  }

  std::size_t source_index(std::size_t r, std::size_t c) const {
    // undo the flips applied after rotation, then undo the rotation
    if (aug.flip_h) c = out_w - 1 - c;
    if (aug.flip_v) r = out_h - 1 - r;
    std::size_t sr = r, sc = c;
    switch (aug.quarter_turns % 4) {
      case 1: sr = src_h - 1 - c; sc = r; break;  // output = source rotated 90° clockwise
      case 2: sr = src_h - 1 - r; sc = src_w - 1 - c; break;
      case 3: sr = c; sc = src_w - 1 - r; break;
      default: break;
    }
    return sr * src_w + sc;
  }
};

}  // namespace ref_detail

/// Presents one augmented image to the model, updating the statistics of
/// every labeled category and of the background.
inline void present_image(RefModelState &state, const ref_detail::PreparedImage &prepared,
                          const ref_detail::Augmentation &aug, double noise_sigma, std::mt19937_64 &rng) {
  const ref_detail::GridTransform tf(prepared.image.height, prepared.image.width, aug);
  FloatImage out(tf.out_h, tf.out_w);
  std::vector<Id> labels(tf.out_h * tf.out_w);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (std::size_t r = 0; r < tf.out_h; ++r) {
    for (std::size_t c = 0; c < tf.out_w; ++c) {
      const std::size_t src = tf.source_index(r, c), dst = r * tf.out_w + c;
      labels[dst] = prepared.labels[src];
      for (int k = 0; k < 3; ++k) {
        double v = prepared.image.channels[k][src];
        if (aug.noise) v = std::clamp(v + noise(rng), 0.0, 1.0);
        out.channels[k][dst] = v;
      }
    }
  }
  const auto features = extract_features(out);

  struct Acc {
    std::uint64_t n = 0;
    PixelFeature sum{}, sumsq{};
  };
  std::map<Id, Acc> acc;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto &a = acc[labels[i]];
    ++a.n;
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      a.sum[k] += features.data[i][k];
      a.sumsq[k] += features.data[i][k] * features.data[i][k];
    }
  }
  for (const auto &[id, a] : acc) {
    PixelFeature mean{}, var{};
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      mean[k] = a.sum[k] / static_cast<double>(a.n);
      var[k] = std::max(0.0, a.sumsq[k] / static_cast<double>(a.n) - mean[k] * mean[k]);
    }
    (id == 0 ? state.background : state.category(id)).merge(a.n, mean, var);
  }
}

/// Runs every batch of a job. Returns the number of images presented.
inline std::uint64_t fit_epochs(RefModelState &state, const TrainJob &job, const RefDetectorParams &params,
                                std::uint64_t detector_seed) {
  job.check();
  std::vector<ref_detail::PreparedImage> pool;
  pool.reserve(job.items.size());
  for (const auto &item : job.items) pool.push_back(ref_detail::prepare(item, job.image_root));

  std::mt19937_64 rng(mix_seed(detector_seed, job.seed));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> coin(0, 1), turns(0, 3);
  std::uint64_t presented = 0;
  for (std::uint64_t b = 0; b < job.batches(); ++b) {
    for (int k = 0; k < job.batch_size; ++k) {
      const std::size_t idx = pick(rng);
      ref_detail::Augmentation aug;
      if (job.augment) {
        if (params.flips) {
          aug.flip_h = coin(rng) == 1;
          aug.flip_v = coin(rng) == 1;
        }
        if (params.rotations) aug.quarter_turns = turns(rng);
        aug.noise = params.noise && params.noise_sigma > 0;
      }
      present_image(state, pool[idx], aug, params.noise_sigma, rng);
      ++presented;
    }
  }
  return presented;
}

/// Pixel-wise Gaussian scoring followed by connected-component grouping.
inline std::vector<Detection> segment_image(const RefModelState &state, const FloatImage &image,
                                            const RefDetectorParams &params, Id image_id = 0) {
  if (!state.trained()) throw NotTrainedError("no category model has enough observations");
  const auto features = extract_features(image);
  const std::size_t h = image.height, w = image.width, n = h * w;

  ClassModel background = state.background;
  if (background.n < 2) {
    // nothing observed outside the masks yet: fall back to a broad prior
    background.mean.fill(0.5);
    background.var.fill(1.0 / 12.0);
  }
  std::vector<const ClassModel *> models;
  for (const auto &m : state.categories)
    if (m.n >= 2) models.push_back(&m);

  std::vector<int> label(n, -1);
  std::vector<std::vector<float>> scores(models.size(), std::vector<float>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double lbg = background.log_likelihood(features.data[i]);
    double best = -1;
    int best_c = -1;
    for (std::size_t c = 0; c < models.size(); ++c) {
      // s = p_c / (p_c + p_bg) evaluated in log space
      const double s =
          1.0 / (1.0 + std::exp((lbg - models[c]->log_likelihood(features.data[i])) / params.score_temperature));
      scores[c][i] = static_cast<float>(s);
      if (s > best) {
        best = s;
        best_c = static_cast<int>(c);
      }
    }
    if (best > params.pixel_threshold) label[i] = best_c;
  }

  std::vector<Detection> out;
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::size_t> stack, component;
  for (std::size_t start = 0; start < n; ++start) {
    if (label[start] < 0 || seen[start]) continue;
    component.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const long r = static_cast<long>(p / w), c = static_cast<long>(p % w);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (params.connectivity == 4 && dr != 0 && dc != 0) continue;
          const long rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
          const std::size_t q = static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc);
          if (label[q] < 0 || seen[q]) continue;
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
    if (component.size() < params.min_area) continue;

    std::vector<std::size_t> votes(models.size(), 0);
    for (std::size_t p : component) ++votes[static_cast<std::size_t>(label[p])];
    const auto winner = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    BinaryMask mask(h, w);
    double conf = 0;
    for (std::size_t p : component) {
      mask.bits[p] = 1;
      conf += scores[winner][p];
    }
    conf = std::clamp(conf / static_cast<double>(component.size()), 0.0, 1.0);
    out.push_back(Detection{image_id, models[winner]->id, rle_encode(mask), conf});
  }
  return out;
}

/// The builtin detector: per-class diagonal Gaussians over handcrafted pixel
/// features, trained by streaming sufficient statistics.
class RefDetector final : public Detector {
 public:
  static constexpr std::uint8_t kBlobVersion = 1;
  static constexpr const char *kVersionTag = "builtin/1";

  explicit RefDetector(RefDetectorParams params = {}, std::uint64_t seed = 0) : params_(params), seed_(seed) {}

  std::string name() const override { return "builtin-reference"; }

  void train(const TrainJob &job) override {
    const auto presented = fit_epochs(state_, job, params_, seed_);
    trained_steps_ += presented;
    batches_ += job.batches();
  }

  std::vector<Detection> infer(const std::vector<ImageRecord> &images,
                               const std::filesystem::path &image_root) override {
    if (!state_.trained()) throw NotTrainedError("detector has not been trained");
    std::vector<Detection> out;
    for (const auto &rec : images) {
      const auto img = FloatImage::from_rgb(load_image_for(rec, image_root));
      auto dets = segment_image(state_, img, params_, rec.id);
      out.insert(out.end(), std::make_move_iterator(dets.begin()), std::make_move_iterator(dets.end()));
    }
    return out;
  }

  DetectorStateBlob save() override { return DetectorStateBlob::make(kVersionTag, serialize()); }

  void load(const DetectorStateBlob &blob) override {
    if (blob.version != kVersionTag) throw VersionError("expected " + std::string(kVersionTag) + ", got " + blob.version);
    if (!blob.intact()) throw VersionError("state digest mismatch");
    deserialize(blob.bytes);
  }

  std::uint64_t trained_steps() const override { return trained_steps_; }
  std::uint64_t batches_seen() const { return batches_; }
  const RefModelState &state() const { return state_; }
  const RefDetectorParams &params() const { return params_; }

 private:
  // version byte, model count, per model (id, n, mean[5], var[5]) with the
  // background first, then params, then the presentation/batch counters
  std::vector<std::uint8_t> serialize() const {
    using namespace bytes_detail;
    std::vector<std::uint8_t> out{kBlobVersion};
    put_u64(out, state_.categories.size() + 1);
    const auto put_model = [&out](const ClassModel &m) {
      put_u64(out, static_cast<std::uint64_t>(m.id));
      put_u64(out, m.n);
      for (double v : m.mean) put_f64(out, v);
      for (double v : m.var) put_f64(out, v);
    };
    put_model(state_.background);
    for (const auto &m : state_.categories) put_model(m);
    put_f64(out, params_.pixel_threshold);
    put_f64(out, params_.score_temperature);
    put_u64(out, params_.min_area);
    put_u64(out, static_cast<std::uint64_t>(params_.connectivity));
    put_u64(out, (params_.flips ? 1u : 0u) | (params_.rotations ? 2u : 0u) | (params_.noise ? 4u : 0u));
    put_f64(out, params_.noise_sigma);
    put_u64(out, seed_);
    put_u64(out, trained_steps_);
    put_u64(out, batches_);
    return out;
  }

  void deserialize(const std::vector<std::uint8_t> &bytes) {
    bytes_detail::Reader in(bytes);
    if (in.u8() != kBlobVersion) throw VersionError("unsupported builtin state version");
    const std::uint64_t count = in.u64();
    if (count == 0 || count > (1u << 20)) throw SerializationError("implausible model count");
    const auto get_model = [&in]() {
      ClassModel m;
      m.id = static_cast<Id>(in.u64());
      m.n = in.u64();
      for (double &v : m.mean) v = in.f64();
      for (double &v : m.var) v = in.f64();
      return m;
    };
    RefModelState st;
    st.background = get_model();
    for (std::uint64_t i = 1; i < count; ++i) st.categories.push_back(get_model());
    RefDetectorParams p;
    p.pixel_threshold = in.f64();
    p.score_temperature = in.f64();
    if (!(p.score_temperature > 0)) throw SerializationError("score temperature must be positive");
    p.min_area = in.u64();
    p.connectivity = static_cast<int>(in.u64());
    const auto flags = in.u64();
    p.flips = flags & 1u;
    p.rotations = flags & 2u;
    p.noise = flags & 4u;
    p.noise_sigma = in.f64();
    const auto seed = in.u64();
    const auto steps = in.u64();
    const auto batches = in.u64();
    if (!in.done()) throw SerializationError("trailing bytes in state blob");
    state_ = std::move(st);
    params_ = p;
    seed_ = seed;
    trained_steps_ = steps;
    batches_ = batches;
  }

  RefDetectorParams params_;
  std::uint64_t seed_ = 0;
  RefModelState state_;
  std::uint64_t trained_steps_ = 0;
  std::uint64_t batches_ = 0;
};

}  // namespace selfanno
