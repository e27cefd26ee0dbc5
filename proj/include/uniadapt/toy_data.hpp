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

#include <array>
#include <string>
#include <vector>

#include "uniadapt/ctc.hpp"

namespace uniadapt {

// Synthetic stand-in for a real multilingual corpus: latent symbol sequences
// rendered into continuous feature frames through a language-specific
// orthogonal channel transform plus Gaussian noise.
struct ToyLanguageSpec {
  int lid = 0;
  std::vector<std::string> charset;   // display symbols
  std::vector<int> char_ids;          // vocab ids, aligned with charset
  std::vector<double> prototypes;     // n_chars x d_in
  std::vector<double> transform;      // d_in x d_in, orthogonal
  std::vector<double> bias;           // d_in
  double sigma = 0.1;
  int frames_min = 3, frames_max = 5;
  int u_min = 3, u_max = 8;
  int d_in = 16;
};

struct Utterance {
  int lid = 0;
  std::vector<int> labels;     // vocab ids, no blanks
  int length = 0;              // frame count T
  std::vector<double> feats;   // T x d_in
};

// Padded batch container: every utterance keeps its own language id, and
// true lengths carry the unpadded extents.
struct Batch {
  int size = 0, t_max = 0, u_max = 0, d_in = 0;
  std::vector<double> feats;          // B x T_max x d_in, zero padded
  std::vector<int> lengths;           // true frame counts
  std::vector<int> targets;           // B x U_max, padded with pad id
  std::vector<int> target_lengths;
  std::vector<int> lids;

  std::vector<double> utterance_feats(int i) const;
  std::vector<int> utterance_labels(int i) const;
};

struct DataConfig {
  int n_langs = 3;
  int chars_per_lang = 5;
  std::vector<int> train_utts = {1500, 1500, 750};  // per language
  int dev_utts = 150;
  int test_utts = 200;
  int u_min = 3, u_max = 8;
  int frames_min = 3, frames_max = 5;
  double sigma = 0.1;
  int d_in = 16;
  // The last language renders its first `twin_chars` characters with the
  // exact acoustics of `twin_source`'s corresponding characters: genuine
  // cross-language confusion that only the language id (or context) can
  // resolve. 0 disables.
  int twin_chars = 3;
  int twin_source = 0;
  std::uint64_t seed = 7;
};

struct ToyDataset {
  Vocab vocab;
  std::vector<ToyLanguageSpec> specs;
  std::vector<Utterance> train, dev, test;
  int d_in = 16;
};

// Union of the per-language character sets (stable order, deduplicated)
// plus the four special tokens.
Vocab build_vocab(const std::vector<std::vector<std::string>>& charsets);

std::vector<Utterance> gen_language(const ToyLanguageSpec& spec, int n_utts,
                                    std::uint64_t seed);

// Stratified-by-language seeded split; ratios must sum to 1.
struct SplitResult {
  std::vector<Utterance> train, dev, test;
};
SplitResult split(const std::vector<Utterance>& utts,
                  const std::array<double, 3>& ratios, std::uint64_t seed);

ToyDataset build_toy_dataset(const DataConfig& cfg);

Batch make_batch(std::span<const Utterance> utts, int pad_id);

// Seeded orthogonal matrix (QR of a Gaussian draw with a fixed sign
// convention), row-major n x n.
std::vector<double> random_orthogonal(int n, Rng& rng);

// Named-array dataset dump (same container format as checkpoints).
void save_dataset(const ToyDataset& ds, const std::string& path_stem);
ToyDataset load_dataset(const std::string& path_stem);

}  // namespace uniadapt
