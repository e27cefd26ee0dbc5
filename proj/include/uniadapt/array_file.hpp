// Copyright 2026 The uniadapt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "uniadapt/common.hpp"

// Named-array container used by checkpoints and dataset dumps: a text
// manifest `<stem>.json` (metadata + array index with byte offsets) plus a
// binary payload `<stem>.bin` of concatenated little-endian float32 arrays.

namespace uniadapt {

struct NamedArray {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // held as f64 in memory, narrowed on write
};

struct ArrayFile {
  nlohmann::json meta;
  std::vector<NamedArray> arrays;
  const NamedArray* find(const std::string& name) const;
};

void write_array_file(const std::string& stem, const nlohmann::json& meta,
                      const std::vector<NamedArray>& arrays);
ArrayFile read_array_file(const std::string& stem);

}  // namespace uniadapt
