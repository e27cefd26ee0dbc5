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

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace uniadapt {

// Thrown on every contract violation (bad shapes, unknown language ids,
// infeasible CTC instances, pruned-state misuse, ...). The CLI maps it to a
// nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void format_parts(std::ostringstream&) {}
template <class T, class... Rest>
void format_parts(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  format_parts(os, rest...);
}
}  // namespace detail

template <class... Parts>
std::string strcat_msg(const Parts&... parts) {
  std::ostringstream os;
  detail::format_parts(os, parts...);
  return os.str();
}

template <class... Parts>
[[noreturn]] void fail(const Parts&... parts) {
  throw Error(strcat_msg(parts...));
}

#define UA_CHECK(cond, ...)                 \
  do {                                      \
    if (!(cond)) ::uniadapt::fail(__VA_ARGS__); \
  } while (0)

using Rng = std::mt19937_64;

// splitmix64; used to derive independent child seeds from (seed, tags) so
// that every stochastic stream in a run is pinned by the top-level seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

}  // namespace uniadapt
