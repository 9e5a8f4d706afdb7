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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfanno/dataset.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/mask.hpp"

namespace selfanno {

namespace coco_detail {

using nlohmann::json;

inline const json &require(const json &obj, const char *key, const std::string &where) {
  if (!obj.is_object() || !obj.contains(key))
    throw SchemaError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

template <typename T>
T get_as(const json &obj, const char *key, const std::string &where) {
  const auto &v = require(obj, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception &) {
    throw SchemaError(where + ": field '" + key + "' has the wrong type");
  }
}

inline RleMask parse_segmentation(const json &seg, const ImageRecord &image, const std::string &where) {
  if (seg.is_object()) {
    const auto size = get_as<std::vector<std::size_t>>(seg, "size", where);
    if (size.size() != 2) throw SchemaError(where + ": RLE size must be [height, width]");
    RleMask rle{size[0], size[1], get_as<std::vector<std::uint32_t>>(seg, "counts", where)};
    if (rle.height != image.height || rle.width != image.width)
      throw GeometryError(where + ": mask is " + std::to_string(rle.height) + "x" +
                          std::to_string(rle.width) + " but image is " +
                          std::to_string(image.height) + "x" + std::to_string(image.width));
    try {
      return rle_encode(rle_decode(rle));
    } catch (const LengthError &e) {
      throw GeometryError(where + ": " + e.what());
    }
  }
  if (seg.is_array()) {
    BinaryMask merged(image.height, image.width);
    for (const auto &part : seg) {
      std::vector<double> flat;
      try {
        flat = part.get<std::vector<double>>();
      } catch (const json::exception &) {
        throw SchemaError(where + ": polygon must be a flat coordinate list");
      }
      if (flat.size() % 2 != 0) throw SchemaError(where + ": odd polygon coordinate count");
      std::vector<Point> pts;
      for (std::size_t i = 0; i < flat.size(); i += 2) {
        if (flat[i] < 0 || flat[i] > static_cast<double>(image.width) || flat[i + 1] < 0 ||
            flat[i + 1] > static_cast<double>(image.height))
          throw GeometryError(where + ": polygon vertex outside the image");
        pts.push_back({flat[i], flat[i + 1]});
      }
      try {
        const auto m = rasterize_polygon(pts, image.height, image.width);
        for (std::size_t k = 0; k < m.bits.size(); ++k) merged.bits[k] |= m.bits[k];
      } catch (const DegenerateError &e) {
        throw GeometryError(where + ": " + e.what());
      }
    }
    return rle_encode(merged);
  }
  throw SchemaError(where + ": segmentation must be a polygon list or an RLE object");
}

inline json rle_to_json(const RleMask &m) {
  return json{{"counts", m.counts}, {"size", {m.height, m.width}}};
}

inline const char *partition_key(Partition p) {
  switch (p) {
    case Partition::Bootstrapping: return "bootstrapping";
    case Partition::Training: return "training";
    case Partition::Testing: return "testing";
  }
  return "";
}

}  // namespace coco_detail

/// Parses COCO-style text. Polygons are rasterized; area and bbox are always
/// recomputed from the mask.
inline AnnotatedDataset parse_coco(const std::string &text, std::uint64_t pixel_cap = kDefaultPixelCap) {
  using coco_detail::get_as;
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ParseError(e.what());
  }
  if (!root.is_object()) throw ParseError("top level must be an object");

  AnnotatedDataset d;
  for (const auto &c : coco_detail::require(root, "categories", "file")) {
    d.categories.push_back({get_as<Id>(c, "id", "category"), get_as<std::string>(c, "name", "category")});
  }
  for (const auto &im : coco_detail::require(root, "images", "file")) {
    ImageRecord rec;
    rec.id = get_as<Id>(im, "id", "image");
    const auto where = "image " + std::to_string(rec.id);
    rec.width = get_as<std::size_t>(im, "width", where);
    rec.height = get_as<std::size_t>(im, "height", where);
    rec.file_path = get_as<std::string>(im, "file_name", where);
    d.images.push_back(rec);
  }
  std::map<Id, const ImageRecord *> images;
  for (const auto &im : d.images) {
    if (im.width == 0 || im.height == 0)
      throw GeometryError("image " + std::to_string(im.id) + " has zero size");
    if (static_cast<std::uint64_t>(im.width) * im.height > pixel_cap)
      throw GeometryError("image " + std::to_string(im.id) + " exceeds the pixel cap");
    images[im.id] = &im;
  }

  for (const auto &a : coco_detail::require(root, "annotations", "file")) {
    const Id id = get_as<Id>(a, "id", "annotation");
    const auto where = "annotation " + std::to_string(id);
    const Id image_id = get_as<Id>(a, "image_id", where);
    const Id category_id = get_as<Id>(a, "category_id", where);
    auto im = images.find(image_id);
    if (im == images.end()) throw SchemaError(where + " references unknown image");
    auto mask = coco_detail::parse_segmentation(coco_detail::require(a, "segmentation", where),
                                                *im->second, where);
    AnnotationSource source;
    if (a.contains("source")) {
      const auto kind = get_as<std::string>(a, "source", where);
      if (kind == "inferred") {
        source = AnnotationSource::inferred(get_as<int>(a, "iteration", where));
      } else if (kind != "human") {
        throw SchemaError(where + ": unknown source '" + kind + "'");
      }
    }
    const double confidence = a.contains("confidence") ? get_as<double>(a, "confidence", where) : 1.0;
    d.annotations.push_back(make_annotation(id, image_id, category_id, std::move(mask), source, confidence));
  }

  for (const auto &im : d.images) d.partition_of[im.id] = membership_of({Partition::Training});
  if (root.contains("partitions")) {
    const auto &block = root.at("partitions");
    if (!block.is_object()) throw SchemaError("partitions must be an object");
    std::set<Id> listed;
    std::map<Id, Membership> parts;
    for (auto p : {Partition::Bootstrapping, Partition::Training, Partition::Testing}) {
      const char *key = coco_detail::partition_key(p);
      if (!block.contains(key)) continue;
      for (Id id : get_as<std::vector<Id>>(block, key, "partitions")) {
        if (!images.count(id)) throw SchemaError("partitions reference unknown image " + std::to_string(id));
        parts[id].add(p);
        listed.insert(id);
      }
    }
    if (block.contains("excluded")) {
      for (Id id : get_as<std::vector<Id>>(block, "excluded", "partitions")) {
        if (!images.count(id)) throw SchemaError("partitions reference unknown image " + std::to_string(id));
        parts[id] = Membership{};
        listed.insert(id);
      }
    }
    for (const auto &[id, m] : parts) d.partition_of[id] = m;
  }
  validate(d, pixel_cap);
  return d;
}

inline AnnotatedDataset load_coco(const std::filesystem::path &path,
                                  std::uint64_t pixel_cap = kDefaultPixelCap) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_coco(ss.str(), pixel_cap);
}

/// Deterministic serialization: every list sorted by id, one record per line,
/// object keys in lexicographic order.
inline std::string dump_coco(const AnnotatedDataset &d) {
  using nlohmann::json;
  auto categories = d.categories;
  std::sort(categories.begin(), categories.end(), [](auto &a, auto &b) { return a.id < b.id; });
  auto images = d.images;
  std::sort(images.begin(), images.end(), [](auto &a, auto &b) { return a.id < b.id; });
  auto annotations = d.annotations;
  std::sort(annotations.begin(), annotations.end(), [](auto &a, auto &b) { return a.id < b.id; });

  std::string out = "{\n\"annotations\": [";
  const auto append_rows = [&out](const std::vector<json> &rows) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out += i == 0 ? "\n" : ",\n";
      out += rows[i].dump();
    }
    out += rows.empty() ? "]" : "\n]";
  };
  std::vector<json> rows;
  for (const auto &a : annotations) {
    json j{{"id", a.id},
           {"image_id", a.image_id},
           {"category_id", a.category_id},
           {"segmentation", coco_detail::rle_to_json(a.mask)},
           {"area", a.area},
           {"bbox", {a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]}},
           {"confidence", a.confidence}};
    if (a.source.is_human()) {
      j["source"] = "human";
    } else {
      j["source"] = "inferred";
      j["iteration"] = a.source.iteration;
    }
    rows.push_back(std::move(j));
  }
  append_rows(rows);
  out += ",\n\"categories\": [";
  rows.clear();
  for (const auto &c : categories) rows.push_back(json{{"id", c.id}, {"name", c.name}});
  append_rows(rows);
  out += ",\n\"images\": [";
  rows.clear();
  for (const auto &im : images)
    rows.push_back(json{{"id", im.id}, {"width", im.width}, {"height", im.height}, {"file_name", im.file_path}});
  append_rows(rows);

  json parts = json::object();
  std::vector<Id> excluded;
  for (auto p : {Partition::Bootstrapping, Partition::Training, Partition::Testing}) {
    std::vector<Id> ids;
    for (const auto &im : images)
      if (d.in_partition(im.id, p)) ids.push_back(im.id);
    parts[coco_detail::partition_key(p)] = ids;
  }
  for (const auto &im : images) {
    auto it = d.partition_of.find(im.id);
    if (it == d.partition_of.end() || it->second.none()) excluded.push_back(im.id);
  }
  parts["excluded"] = excluded;
  out += ",\n\"partitions\": " + parts.dump() + "\n}\n";
  return out;
}

inline void save_coco(const AnnotatedDataset &d, const std::filesystem::path &path) {
  const auto text = dump_coco(d);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace selfanno
