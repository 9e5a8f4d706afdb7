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


// Serves the builtin detector over the newline-delimited JSON protocol on
// stdin/stdout, so it can be driven as "external:ref_detector_server".

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

#include "selfanno/protocol.hpp"
#include "selfanno/ref_detector.hpp"

int main(int argc, char **argv) {
  std::uint64_t seed = 0;
  if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);
  std::ios::sync_with_stdio(false);
  selfanno::RefDetector detector({}, seed);
  selfanno::serve_detector(detector, std::cin, std::cout, "ref_detector_server");
  return 0;
}
