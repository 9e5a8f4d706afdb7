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

#include <stdexcept>
#include <string>

namespace selfanno {

/// Base of every domain error raised by the library. The CLI maps these to
/// exit code 1; anything else escaping a command is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SELFANNO_DEFINE_ERROR(Name)                \
  class Name : public Error {                      \
   public:                                         \
    explicit Name(const std::string &what)         \
        : Error(std::string(#Name ": ") + what) {} \
  }

// dataset / file format
SELFANNO_DEFINE_ERROR(ParseError);
SELFANNO_DEFINE_ERROR(SchemaError);
SELFANNO_DEFINE_ERROR(GeometryError);
SELFANNO_DEFINE_ERROR(IoError);
SELFANNO_DEFINE_ERROR(PartitionError);

// mask geometry
SELFANNO_DEFINE_ERROR(LengthError);
SELFANNO_DEFINE_ERROR(DegenerateError);
SELFANNO_DEFINE_ERROR(DimensionError);
SELFANNO_DEFINE_ERROR(EmptyError);
SELFANNO_DEFINE_ERROR(MixedImageError);

// evaluation
SELFANNO_DEFINE_ERROR(UnknownImageError);
SELFANNO_DEFINE_ERROR(NoGroundTruthError);
SELFANNO_DEFINE_ERROR(EmptyTestSetError);

// detectors
SELFANNO_DEFINE_ERROR(SpawnError);
SELFANNO_DEFINE_ERROR(VersionError);
SELFANNO_DEFINE_ERROR(EmptyJobError);
SELFANNO_DEFINE_ERROR(ProtocolError);
SELFANNO_DEFINE_ERROR(NotTrainedError);
SELFANNO_DEFINE_ERROR(SerializationError);

// synthetic data
SELFANNO_DEFINE_ERROR(PackingError);

// loop orchestration and reporting
SELFANNO_DEFINE_ERROR(NoBootstrapError);
SELFANNO_DEFINE_ERROR(MissingCheckpointError);
SELFANNO_DEFINE_ERROR(MissingMetricsError);
SELFANNO_DEFINE_ERROR(ConfigError);

#undef SELFANNO_DEFINE_ERROR

}  // namespace selfanno
