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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "selfanno/detector.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/protocol.hpp"
#include "selfanno/ref_detector.hpp"
#include "selfanno/run_config.hpp"

namespace selfanno {

struct DetectorKind {
  enum class Type { BuiltinReference, External };
  Type type = Type::BuiltinReference;
  std::string command;  // External only
  RefDetectorParams params;  // BuiltinReference only

  static DetectorKind builtin(RefDetectorParams p = {}) { return {Type::BuiltinReference, {}, p}; }
  static DetectorKind external(std::string cmd) { return {Type::External, std::move(cmd), {}}; }

  /// Parses the RunConfig spelling: "builtin" or "external:<command line>".
  static DetectorKind from_config(const RunConfig &c) {
    if (c.detector == "builtin") {
      RefDetectorParams p;
      p.pixel_threshold = c.pixel_threshold;
      p.score_temperature = c.score_temperature;
      p.min_area = static_cast<std::size_t>(c.min_area);
      return builtin(p);
    }
    if (c.detector.rfind("external:", 0) == 0) return external(c.detector.substr(9));
    throw ConfigError("unknown detector '" + c.detector + "'");
  }
};

/// Exclusive owner of one detector instance. Training only ever adds to the
/// step counter; the handle is unusable after close().
class DetectorHandle {
 public:
  DetectorHandle(DetectorKind kind, std::unique_ptr<Detector> impl, std::uint64_t seed)
      : kind_(std::move(kind)), impl_(std::move(impl)), seed_(seed) {}

  DetectorHandle(DetectorHandle &&) noexcept = default;
  DetectorHandle &operator=(DetectorHandle &&) noexcept = default;
  ~DetectorHandle() {
    if (impl_) {
      try {
        impl_->close();
      } catch (...) {
      }
    }
  }

  const DetectorKind &kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  bool valid() const { return impl_ != nullptr; }
  std::uint64_t trained_steps() const { return live().trained_steps(); }
  std::string name() const { return live().name(); }

  void train(const TrainJob &job) { live().train(job); }

  std::vector<Detection> infer(const std::vector<ImageRecord> &images, const std::filesystem::path &root) {
    return live().infer(images, root);
  }

  DetectorStateBlob checkpoint() { return live().save(); }

  void close() {
    if (impl_) impl_->close();
    impl_.reset();
  }

  Detector &detector() { return live(); }

 private:
  Detector &live() const {
    if (!impl_) throw ProtocolError("detector handle is closed");
    return *impl_;
  }

  DetectorKind kind_;
  std::unique_ptr<Detector> impl_;
  std::uint64_t seed_ = 0;
};

/// Opens a detector, optionally restoring a saved state into it.
inline DetectorHandle open_detector(const DetectorKind &kind, const std::optional<DetectorStateBlob> &pretrained,
                                    std::uint64_t seed) {
  std::unique_ptr<Detector> impl;
  if (kind.type == DetectorKind::Type::BuiltinReference) {
    impl = std::make_unique<RefDetector>(kind.params, seed);
  } else {
    impl = std::make_unique<ExternalDetector>(kind.command);
  }
  if (pretrained) impl->load(*pretrained);
  return DetectorHandle(kind, std::move(impl), seed);
}

}  // namespace selfanno
