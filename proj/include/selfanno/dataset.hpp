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
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "selfanno/errors.hpp"
#include "selfanno/mask.hpp"

namespace selfanno {

using Id = std::int64_t;

inline constexpr std::uint64_t kDefaultPixelCap = std::uint64_t{1} << 26;

struct CategoryDef {
  Id id = 0;
  std::string name;
  friend bool operator==(const CategoryDef &, const CategoryDef &) = default;
};

struct ImageRecord {
  Id id = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::string file_path;
  friend bool operator==(const ImageRecord &, const ImageRecord &) = default;
};

/// Human labels come from the user; Inferred labels are detections promoted
/// to ground truth during the given loop iteration.
struct AnnotationSource {
  enum class Kind { Human, Inferred };
  Kind kind = Kind::Human;
  int iteration = 0;

  static AnnotationSource human() { return {}; }
  static AnnotationSource inferred(int it) { return {Kind::Inferred, it}; }
  bool is_human() const { return kind == Kind::Human; }
  friend bool operator==(const AnnotationSource &, const AnnotationSource &) = default;
};

struct Annotation {
  Id id = 0;
  Id image_id = 0;
  Id category_id = 0;
  RleMask mask;
  std::size_t area = 0;
  BBox bbox{0, 0, 0, 0};
  AnnotationSource source;
  double confidence = 1.0;
  friend bool operator==(const Annotation &, const Annotation &) = default;
};

/// Builds an annotation whose area and bbox are derived from the mask.
inline Annotation make_annotation(Id id, Id image_id, Id category_id, RleMask mask,
                                  AnnotationSource source = AnnotationSource::human(),
                                  double confidence = 1.0) {
  Annotation a;
  a.id = id;
  a.image_id = image_id;
  a.category_id = category_id;
  a.area = mask.area();
  a.bbox = rle_bbox(mask);
  a.mask = std::move(mask);
  a.source = source;
  a.confidence = confidence;
  return a;
}

struct Detection {
  Id image_id = 0;
  Id category_id = 0;
  RleMask mask;
  double confidence = 0;
  friend bool operator==(const Detection &, const Detection &) = default;
};

enum class Partition : std::uint8_t { Bootstrapping = 1, Training = 2, Testing = 4 };

/// Set of partitions an image belongs to. Bootstrapping images normally also
/// sit in Training; Testing is exclusive.
struct Membership {
  std::uint8_t bits = 0;

  bool has(Partition p) const { return (bits & static_cast<std::uint8_t>(p)) != 0; }
  void add(Partition p) { bits |= static_cast<std::uint8_t>(p); }
  bool none() const { return bits == 0; }
  friend bool operator==(const Membership &, const Membership &) = default;
};

inline Membership membership_of(std::initializer_list<Partition> parts) {
  Membership m;
  for (auto p : parts) m.add(p);
  return m;
}

struct AnnotatedDataset {
  std::vector<CategoryDef> categories;
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;
  std::map<Id, Membership> partition_of;

  const ImageRecord *find_image(Id id) const {
    for (const auto &im : images)
      if (im.id == id) return &im;
    return nullptr;
  }

  bool in_partition(Id image_id, Partition p) const {
    auto it = partition_of.find(image_id);
    return it != partition_of.end() && it->second.has(p);
  }

  /// Images of a partition, in ascending id order.
  std::vector<ImageRecord> images_in(Partition p) const {
    std::vector<ImageRecord> out;
    for (const auto &im : images)
      if (in_partition(im.id, p)) out.push_back(im);
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.id < b.id; });
    return out;
  }

  std::vector<Annotation> annotations_on(Id image_id) const {
    std::vector<Annotation> out;
    for (const auto &a : annotations)
      if (a.image_id == image_id) out.push_back(a);
    return out;
  }

  Id max_annotation_id() const {
    Id m = 0;
    for (const auto &a : annotations) m = std::max(m, a.id);
    return m;
  }

  friend bool operator==(const AnnotatedDataset &, const AnnotatedDataset &) = default;
};

/// Checks every dataset invariant; throws the matching domain error.
inline void validate(const AnnotatedDataset &d, std::uint64_t pixel_cap = kDefaultPixelCap) {
  std::set<Id> cat_ids;
  for (const auto &c : d.categories) {
    if (c.id <= 0) throw SchemaError("category id must be positive");
    if (c.name.empty()) throw SchemaError("category " + std::to_string(c.id) + " has no name");
    if (!cat_ids.insert(c.id).second)
      throw SchemaError("duplicate category id " + std::to_string(c.id));
  }
  std::map<Id, const ImageRecord *> images;
  for (const auto &im : d.images) {
    if (im.id <= 0) throw SchemaError("image id must be positive");
    if (im.width == 0 || im.height == 0)
      throw GeometryError("image " + std::to_string(im.id) + " has zero size");
    if (static_cast<std::uint64_t>(im.width) * im.height > pixel_cap)
      throw GeometryError("image " + std::to_string(im.id) + " exceeds the pixel cap");
    if (!images.emplace(im.id, &im).second)
      throw SchemaError("duplicate image id " + std::to_string(im.id));
  }
  std::set<Id> ann_ids;
  for (const auto &a : d.annotations) {
    const auto tag = "annotation " + std::to_string(a.id);
    if (a.id <= 0) throw SchemaError("annotation id must be positive");
    if (!ann_ids.insert(a.id).second) throw SchemaError("duplicate " + tag);
    auto im = images.find(a.image_id);
    if (im == images.end()) throw SchemaError(tag + " references unknown image");
    if (!cat_ids.count(a.category_id)) throw SchemaError(tag + " references unknown category");
    if (a.mask.height != im->second->height || a.mask.width != im->second->width)
      throw GeometryError(tag + " mask size differs from its image");
    if (!rle_is_canonical(a.mask)) throw GeometryError(tag + " has malformed run lengths");
    if (a.area != a.mask.area()) throw SchemaError(tag + " area disagrees with its mask");
    if (a.bbox != rle_bbox(a.mask)) throw SchemaError(tag + " bbox is not tight");
    if (!(a.confidence >= 0.0 && a.confidence <= 1.0))
      throw SchemaError(tag + " confidence outside [0,1]");
  }
  for (const auto &[id, m] : d.partition_of) {
    if (!images.count(id)) throw PartitionError("unknown image id " + std::to_string(id));
    if (m.has(Partition::Testing) &&
        (m.has(Partition::Training) || m.has(Partition::Bootstrapping)))
      throw PartitionError("image " + std::to_string(id) + " is both testing and training");
  }
}

struct PartitionSpec {
  std::vector<Id> bootstrapping;
  std::vector<Id> training;
  std::vector<Id> testing;
  /// Bootstrapping images also join the training set unless this is cleared.
  bool bootstrap_in_training = true;
};

/// Assigns partitions and strips labels accordingly: bootstrapping images keep
/// human annotations only, other training images lose all annotations, and
/// images listed nowhere stay out of every partition.
inline AnnotatedDataset make_partitions(const AnnotatedDataset &dataset, const PartitionSpec &spec) {
  std::set<Id> known;
  for (const auto &im : dataset.images) known.insert(im.id);
  std::map<Id, Membership> parts;
  for (const auto &im : dataset.images) parts[im.id] = Membership{};
  const auto assign = [&](const std::vector<Id> &ids, Partition p) {
    for (Id id : ids) {
      if (!known.count(id)) throw PartitionError("unknown image id " + std::to_string(id));
      parts[id].add(p);
    }
  };
  assign(spec.bootstrapping, Partition::Bootstrapping);
  assign(spec.training, Partition::Training);
  assign(spec.testing, Partition::Testing);
  if (spec.bootstrap_in_training) {
    for (Id id : spec.bootstrapping) parts[id].add(Partition::Training);
  }
  for (const auto &[id, m] : parts) {
    if (m.has(Partition::Testing) &&
        (m.has(Partition::Training) || m.has(Partition::Bootstrapping)))
      throw PartitionError("image " + std::to_string(id) + " is both testing and training");
  }

  AnnotatedDataset out = dataset;
  out.partition_of = parts;
  std::vector<Annotation> kept;
  for (const auto &a : dataset.annotations) {
    const auto &m = parts[a.image_id];
    if (m.has(Partition::Bootstrapping)) {
      if (a.source.is_human()) kept.push_back(a);
    } else if (m.has(Partition::Training)) {
      continue;
    } else {
      kept.push_back(a);
    }
  }
  out.annotations = std::move(kept);
  return out;
}

}  // namespace selfanno
