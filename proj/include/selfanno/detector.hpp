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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "selfanno/dataset.hpp"
#include "selfanno/digest.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/image.hpp"

namespace selfanno {

struct TrainItem {
  ImageRecord image;
  std::vector<Annotation> annotations;
};

/// One call's worth of training. An epoch is steps_per_epoch batches of
/// batch_size images drawn with replacement from `items`, each presentation
/// freshly augmented.
struct TrainJob {
  std::vector<TrainItem> items;
  std::filesystem::path image_root;
  int epochs = 1;
  int batch_size = 2;
  int steps_per_epoch = 24;
  std::uint64_t seed = 0;
  bool augment = true;

  std::uint64_t presentations() const {
    return static_cast<std::uint64_t>(epochs) * static_cast<std::uint64_t>(steps_per_epoch) *
           static_cast<std::uint64_t>(batch_size);
  }
  std::uint64_t batches() const {
    return static_cast<std::uint64_t>(epochs) * static_cast<std::uint64_t>(steps_per_epoch);
  }

  void check() const {
    if (items.empty()) throw EmptyJobError("no annotated images to train on");
    if (epochs < 1 || batch_size < 1 || steps_per_epoch < 1)
      throw EmptyJobError("epochs, batch_size and steps_per_epoch must be >= 1");
    for (const auto &it : items) {
      for (const auto &a : it.annotations) {
        if (a.image_id != it.image.id)
          throw SchemaError("annotation " + std::to_string(a.id) + " does not belong to image " +
                            std::to_string(it.image.id));
      }
    }
  }
};

/// Serialized detector state; `version` names the detector family.
struct DetectorStateBlob {
  std::string version;
  std::vector<std::uint8_t> bytes;
  std::string digest;

  static DetectorStateBlob make(std::string version, std::vector<std::uint8_t> bytes) {
    DetectorStateBlob b{std::move(version), std::move(bytes), {}};
    b.digest = sha256_hex(b.bytes);
    return b;
  }
  bool intact() const { return digest == sha256_hex(bytes); }
  friend bool operator==(const DetectorStateBlob &, const DetectorStateBlob &) = default;
};

// File layout: "SASTATE1\n", version line, digest line, byte count line, bytes.
inline void write_state_file(const std::filesystem::path &path, const DetectorStateBlob &blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "SASTATE1\n" << blob.version << "\n" << blob.digest << "\n" << blob.bytes.size() << "\n";
  out.write(reinterpret_cast<const char *>(blob.bytes.data()), static_cast<std::streamsize>(blob.bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

/// Throws VersionError when the stored digest does not match the bytes.
inline DetectorStateBlob read_state_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic, size_line;
  DetectorStateBlob blob;
  if (!std::getline(in, magic) || magic != "SASTATE1")
    throw VersionError(path.string() + " is not a detector state file");
  if (!std::getline(in, blob.version) || !std::getline(in, blob.digest) || !std::getline(in, size_line))
    throw VersionError(path.string() + " has a truncated header");
  std::size_t size = 0;
  try {
    size = std::stoull(size_line);
  } catch (const std::exception &) {
    throw VersionError(path.string() + " has a malformed size");
  }
  blob.bytes.resize(size);
  in.read(reinterpret_cast<char *>(blob.bytes.data()), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) throw VersionError(path.string() + " is truncated");
  if (!blob.intact()) throw VersionError(path.string() + ": digest mismatch");
  return blob;
}

/// Trainable instance-segmentation model behind the loop.
class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::string name() const = 0;
  virtual void train(const TrainJob &job) = 0;
  virtual std::vector<Detection> infer(const std::vector<ImageRecord> &images,
                                       const std::filesystem::path &image_root) = 0;
  virtual DetectorStateBlob save() = 0;
  virtual void load(const DetectorStateBlob &blob) = 0;
  /// Total images presented to training so far.
  virtual std::uint64_t trained_steps() const = 0;
  virtual void close() {}
};

inline RgbImage load_image_for(const ImageRecord &rec, const std::filesystem::path &root) {
  const auto path = std::filesystem::path(rec.file_path).is_absolute() ? std::filesystem::path(rec.file_path)
                                                                        : root / rec.file_path;
  auto img = read_png(path);
  if (img.width != rec.width || img.height != rec.height)
    throw GeometryError(path.string() + " does not match the recorded image size");
  return img;
}

namespace bytes_detail {

inline void put_u64(std::vector<std::uint8_t> &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_f64(std::vector<std::uint8_t> &out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, sizeof v);
  put_u64(out, v);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t> &b) : bytes_(b) {}
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    const std::uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, sizeof d);
    return d;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw SerializationError("state blob is truncated");
  }
  const std::vector<std::uint8_t> &bytes_;
  std::size_t pos_ = 0;
};

}  // namespace bytes_detail

}  // namespace selfanno
