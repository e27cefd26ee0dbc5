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

#include "uniadapt/array_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace uniadapt {

static_assert(std::endian::native == std::endian::little,
              "payload format is little-endian");

const NamedArray* ArrayFile::find(const std::string& name) const {
  for (const NamedArray& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

void write_array_file(const std::string& stem, const nlohmann::json& meta,
                      const std::vector<NamedArray>& arrays) {
  nlohmann::json manifest;
  manifest["format"] = "uniadapt-arrays-v1";
  manifest["meta"] = meta;
  nlohmann::json index = nlohmann::json::array();
  std::ofstream bin(stem + ".bin", std::ios::binary | std::ios::trunc);
  UA_CHECK(bin.good(), "cannot open ", stem, ".bin for writing");
  std::uint64_t offset = 0;
  for (const NamedArray& a : arrays) {
    UA_CHECK(a.data.size() == static_cast<size_t>(a.rows) * a.cols,
             "array ", a.name, ": size does not match shape");
    std::vector<float> f32(a.data.begin(), a.data.end());
    bin.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * sizeof(float)));
    index.push_back({{"name", a.name},
                     {"rows", a.rows},
                     {"cols", a.cols},
                     {"byte_offset", offset}});
    offset += f32.size() * sizeof(float);
  }
  UA_CHECK(bin.good(), "write failed for ", stem, ".bin");
  bin.close();
  manifest["arrays"] = index;
  manifest["payload_bytes"] = offset;
  std::ofstream man(stem + ".json", std::ios::trunc);
  UA_CHECK(man.good(), "cannot open ", stem, ".json for writing");
  man << manifest.dump(1) << "\n";
  UA_CHECK(man.good(), "write failed for ", stem, ".json");
}

ArrayFile read_array_file(const std::string& stem) {
  std::ifstream man(stem + ".json");
  UA_CHECK(man.good(), "cannot open ", stem, ".json");
  nlohmann::json manifest;
  try {
    man >> manifest;
  } catch (const std::exception& e) {
    fail("malformed manifest ", stem, ".json: ", e.what());
  }
  UA_CHECK(manifest.value("format", "") == "uniadapt-arrays-v1",
           stem, ".json: unsupported format");
  std::ifstream bin(stem + ".bin", std::ios::binary);
  UA_CHECK(bin.good(), "cannot open ", stem, ".bin");
  ArrayFile out;
  out.meta = manifest["meta"];
  for (const auto& entry : manifest["arrays"]) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.rows = entry.at("rows").get<int>();
    a.cols = entry.at("cols").get<int>();
    const std::uint64_t off = entry.at("byte_offset").get<std::uint64_t>();
    const size_t n = static_cast<size_t>(a.rows) * a.cols;
    std::vector<float> f32(n);
    bin.seekg(static_cast<std::streamoff>(off));
    bin.read(reinterpret_cast<char*>(f32.data()),
             static_cast<std::streamsize>(n * sizeof(float)));
    UA_CHECK(bin.good(), "truncated payload reading array ", a.name);
    a.data.assign(f32.begin(), f32.end());
    out.arrays.push_back(std::move(a));
  }
  return out;
}

}  // namespace uniadapt
