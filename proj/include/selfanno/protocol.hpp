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
#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfanno/dataset.hpp"
#include "selfanno/detector.hpp"
#include "selfanno/digest.hpp"
#include "selfanno/errors.hpp"
#include "selfanno/subprocess.hpp"

namespace selfanno {

inline constexpr int kProtocolVersion = 1;

namespace wire {

using nlohmann::json;

inline json mask_to_json(const RleMask &m) { return json{{"counts", m.counts}, {"size", {m.height, m.width}}}; }

inline RleMask mask_from_json(const json &j) {
  const auto size = j.at("size").get<std::vector<std::size_t>>();
  if (size.size() != 2) throw ProtocolError("mask size must be [height, width]");
  RleMask m{size[0], size[1], j.at("counts").get<std::vector<std::uint32_t>>()};
  if (!rle_is_canonical(m)) throw ProtocolError("mask counts do not tile the grid");
  return m;
}

inline json image_to_json(const ImageRecord &im, const std::filesystem::path &root) {
  const auto path = std::filesystem::path(im.file_path).is_absolute() ? std::filesystem::path(im.file_path)
                                                                      : root / im.file_path;
  return json{{"id", im.id}, {"width", im.width}, {"height", im.height}, {"path", path.string()}};
}

inline ImageRecord image_from_json(const json &j) {
  return ImageRecord{j.at("id").get<Id>(), j.at("width").get<std::size_t>(), j.at("height").get<std::size_t>(),
                     j.at("path").get<std::string>()};
}

inline json train_payload(const TrainJob &job) {
  json images = json::array(), anns = json::array();
  for (const auto &item : job.items) {
    images.push_back(image_to_json(item.image, job.image_root));
    for (const auto &a : item.annotations)
      anns.push_back(json{{"id", a.id},
                          {"image_id", a.image_id},
                          {"category_id", a.category_id},
                          {"segmentation", mask_to_json(a.mask)}});
  }
  return json{{"images", images},          {"annotations", anns},
              {"epochs", job.epochs},      {"batch_size", job.batch_size},
              {"steps_per_epoch", job.steps_per_epoch}, {"seed", job.seed},
              {"augment", job.augment}};
}

inline TrainJob train_job_from_json(const json &p) {
  TrainJob job;
  std::map<Id, std::size_t> slot;
  for (const auto &j : p.at("images")) {
    slot[j.at("id").get<Id>()] = job.items.size();
    job.items.push_back(TrainItem{image_from_json(j), {}});
  }
  for (const auto &j : p.at("annotations")) {
    const Id image_id = j.at("image_id").get<Id>();
    auto it = slot.find(image_id);
    if (it == slot.end()) throw ProtocolError("annotation references an image not in the job");
    job.items[it->second].annotations.push_back(
        make_annotation(j.at("id").get<Id>(), image_id, j.at("category_id").get<Id>(), mask_from_json(j.at("segmentation"))));
  }
  job.epochs = p.at("epochs").get<int>();
  job.batch_size = p.value("batch_size", 2);
  job.steps_per_epoch = p.value("steps_per_epoch", 24);
  job.seed = p.value("seed", std::uint64_t{0});
  job.augment = p.value("augment", true);
  return job;
}

inline json detection_to_json(const Detection &d) {
  return json{{"image_id", d.image_id},
              {"category_id", d.category_id},
              {"segmentation", mask_to_json(d.mask)},
              {"confidence", d.confidence}};
}

inline Detection detection_from_json(const json &j) {
  Detection d{j.at("image_id").get<Id>(), j.at("category_id").get<Id>(), mask_from_json(j.at("segmentation")),
              j.at("confidence").get<double>()};
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) throw ProtocolError("confidence outside [0,1]");
  if (d.mask.empty()) throw ProtocolError("empty detection mask");
  return d;
}

}  // namespace wire

/// Client side of the stdio protocol. Requests are strictly sequential; any
/// malformed exchange poisons the detector.
class ExternalDetector final : public Detector {
 public:
  static constexpr const char *kVersionTag = "external/1";

  explicit ExternalDetector(const std::string &command_line, int timeout_ms = 600000)
      : command_(command_line), timeout_ms_(timeout_ms) {
    child_ = std::make_unique<ChildProcess>(split_command_line(command_line));
    nlohmann::json hello;
    try {
      hello = request("hello", nlohmann::json::object());
    } catch (const ProtocolError &e) {
      throw SpawnError("'" + command_line + "' did not complete the handshake: " + e.what());
    }
    if (hello.value("protocol", 0) != kProtocolVersion)
      throw SpawnError("'" + command_line + "' speaks an unsupported protocol version");
    name_ = hello.value("name", std::string("external"));
  }

  ~ExternalDetector() override {
    try {
      close();
    } catch (...) {
    }
  }

  std::string name() const override { return name_; }

  void train(const TrainJob &job) override {
    job.check();
    std::lock_guard lock(mu_);
    const auto reply = request("train", wire::train_payload(job));
    trained_steps_ += job.presentations();
    if (reply.contains("trained_steps") && reply.at("trained_steps").get<std::uint64_t>() != trained_steps_) {
      poisoned_ = true;
      throw ProtocolError("detector reports a different step count");
    }
  }

  std::vector<Detection> infer(const std::vector<ImageRecord> &images,
                               const std::filesystem::path &image_root) override {
    std::lock_guard lock(mu_);
    if (trained_steps_ == 0) throw NotTrainedError("external detector has not been trained");
    nlohmann::json ims = nlohmann::json::array();
    for (const auto &im : images) ims.push_back(wire::image_to_json(im, image_root));
    const auto reply = request("infer", nlohmann::json{{"images", ims}});
    std::vector<Detection> out;
    try {
      for (const auto &j : reply.at("detections")) out.push_back(wire::detection_from_json(j));
    } catch (const nlohmann::json::exception &e) {
      poisoned_ = true;
      throw ProtocolError(std::string("bad infer reply: ") + e.what());
    } catch (const ProtocolError &) {
      poisoned_ = true;
      throw;
    }
    return out;
  }

  DetectorStateBlob save() override {
    std::lock_guard lock(mu_);
    const auto reply = request("save", nlohmann::json::object());
    std::vector<std::uint8_t> state;
    try {
      state = base64_decode(reply.at("state").get<std::string>());
    } catch (const std::exception &e) {
      poisoned_ = true;
      throw ProtocolError(std::string("bad save reply: ") + e.what());
    }
    // prefix the opaque bytes with the step counter so restores keep it
    std::vector<std::uint8_t> bytes;
    bytes_detail::put_u64(bytes, trained_steps_);
    bytes.insert(bytes.end(), state.begin(), state.end());
    return DetectorStateBlob::make(kVersionTag, std::move(bytes));
  }

  void load(const DetectorStateBlob &blob) override {
    if (blob.version != kVersionTag) throw VersionError("expected " + std::string(kVersionTag) + ", got " + blob.version);
    if (!blob.intact()) throw VersionError("state digest mismatch");
    bytes_detail::Reader in(blob.bytes);
    const auto steps = in.u64();
    const std::vector<std::uint8_t> state(blob.bytes.begin() + 8, blob.bytes.end());
    std::lock_guard lock(mu_);
    request("load", nlohmann::json{{"state", base64_encode(state)}});
    trained_steps_ = steps;
  }

  std::uint64_t trained_steps() const override { return trained_steps_; }

  void close() override {
    std::lock_guard lock(mu_);
    if (!child_) return;
    if (!poisoned_) {
      try {
        request("close", nlohmann::json::object());
      } catch (const Error &) {
      }
    }
    child_->terminate();
    child_.reset();
  }

  bool poisoned() const { return poisoned_; }

 private:
  nlohmann::json request(const std::string &cmd, const nlohmann::json &payload) {
    if (!child_) throw ProtocolError("detector is closed");
    if (poisoned_) throw ProtocolError("detector is poisoned by an earlier protocol failure");
    const std::int64_t id = next_id_++;
    const nlohmann::json req{{"id", id}, {"cmd", cmd}, {"payload", payload}};
    if (!child_->write_all(req.dump() + "\n")) {
      poisoned_ = true;
      throw ProtocolError("detector process closed its input");
    }
    std::string line;
    if (!child_->read_line(line, timeout_ms_)) {
      poisoned_ = true;
      throw ProtocolError("no reply to '" + cmd + "'");
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &) {
      poisoned_ = true;
      throw ProtocolError("malformed reply line to '" + cmd + "'");
    }
    if (!reply.is_object() || !reply.contains("id") || !reply.contains("ok") || !reply.at("ok").is_boolean() ||
        !reply.at("id").is_number_integer() || reply.at("id").get<std::int64_t>() != id) {
      poisoned_ = true;
      throw ProtocolError("reply to '" + cmd + "' is missing fields or carries the wrong id");
    }
    if (!reply.at("ok").get<bool>()) {
      const auto msg = reply.contains("error") ? reply.at("error").dump() : std::string("unspecified");
      if (msg.find("not trained") != std::string::npos) throw NotTrainedError(msg);
      throw ProtocolError("'" + cmd + "' failed: " + msg);
    }
    return reply.contains("payload") ? reply.at("payload") : nlohmann::json::object();
  }

  std::string command_;
  int timeout_ms_;
  std::string name_;
  std::unique_ptr<ChildProcess> child_;
  std::mutex mu_;
  std::int64_t next_id_ = 1;
  std::uint64_t trained_steps_ = 0;
  bool poisoned_ = false;
};

/// Server side of the protocol: answers requests on `in` by delegating to a
/// local detector until "close" or end of stream. Returns the number of
/// requests served.
inline std::size_t serve_detector(Detector &detector, std::istream &in, std::ostream &out,
                                  const std::string &name) {
  using nlohmann::json;
  std::string line;
  std::size_t served = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json reply;
    json req;
    try {
      req = json::parse(line);
    } catch (const json::parse_error &) {
      out << json{{"id", nullptr}, {"ok", false}, {"error", "malformed request"}}.dump() << "\n" << std::flush;
      continue;
    }
    reply["id"] = req.contains("id") ? req.at("id") : json(nullptr);
    bool closing = false;
    try {
      const auto cmd = req.at("cmd").get<std::string>();
      const json payload = req.contains("payload") ? req.at("payload") : json::object();
      json result = json::object();
      if (cmd == "hello") {
        result = json{{"protocol", kProtocolVersion}, {"name", name}};
      } else if (cmd == "train") {
        detector.train(wire::train_job_from_json(payload));
        result["trained_steps"] = detector.trained_steps();
      } else if (cmd == "infer") {
        std::vector<ImageRecord> images;
        for (const auto &j : payload.at("images")) images.push_back(wire::image_from_json(j));
        json dets = json::array();
        for (const auto &d : detector.infer(images, {})) dets.push_back(wire::detection_to_json(d));
        result["detections"] = dets;
      } else if (cmd == "save") {
        result["state"] = base64_encode(detector.save().bytes);
      } else if (cmd == "load") {
        auto bytes = base64_decode(payload.at("state").get<std::string>());
        auto probe = detector.save();
        detector.load(DetectorStateBlob::make(probe.version, std::move(bytes)));
      } else if (cmd == "close") {
        closing = true;
      } else {
        throw ProtocolError("unknown command '" + cmd + "'");
      }
      reply["ok"] = true;
      reply["payload"] = result;
    } catch (const NotTrainedError &e) {
      reply["ok"] = false;
      reply["error"] = std::string("not trained: ") + e.what();
    } catch (const std::exception &e) {
      reply["ok"] = false;
      reply["error"] = e.what();
    }
    out << reply.dump() << "\n" << std::flush;
    ++served;
    if (closing) break;
  }
  return served;
}

}  // namespace selfanno
