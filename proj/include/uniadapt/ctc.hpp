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

#include "uniadapt/tensor.hpp"

namespace uniadapt {

// Output symbol table: the union of per-language character sets followed by
// the four special tokens (unknown, padding, blank, mask).
class Vocab {
 public:
  Vocab() = default;
  // `chars` in final order (deduplicated, stable).
  explicit Vocab(std::vector<std::string> chars);

  int size() const { return static_cast<int>(symbols_.size()); }
  int n_chars() const { return size() - 4; }
  int unk() const { return n_chars(); }
  int pad() const { return n_chars() + 1; }
  int blank() const { return n_chars() + 2; }
  int mask() const { return n_chars() + 3; }
  const std::string& symbol(int id) const { return symbols_.at(id); }
  int id_of(const std::string& symbol) const;  // -1 if absent
  std::string render(const std::vector<int>& ids) const;

  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
};

// -log p_ctc(y | logits): marginal over all blank-augmented alignments that
// collapse to `labels`, computed with a log-space forward DP. Differentiable
// w.r.t. `logits` (pre-softmax scores, T x V). Throws if no alignment is
// feasible (T too short) or labels are out of range / contain the blank.
Tensor ctc_loss(Tensor logits, const std::vector<int>& labels, int blank);

// Same computation on raw values (no tape); used by oracles and bindings.
double ctc_loss_value(const std::vector<double>& logits, int T, int V,
                      const std::vector<int>& labels, int blank);

// Best-path decoding: per-frame argmax, collapse repeats, strip blanks.
std::vector<int> greedy_decode(const std::vector<double>& logits, int T, int V,
                               int blank);
std::vector<int> greedy_decode(Tensor logits, int blank);

int levenshtein(const std::vector<int>& a, const std::vector<int>& b);

// Levenshtein(ref, hyp) / len(ref). Throws on empty ref.
double cer(const std::vector<int>& ref, const std::vector<int>& hyp);

}  // namespace uniadapt
