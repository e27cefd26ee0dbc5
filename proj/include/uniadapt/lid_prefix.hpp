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

#include "uniadapt/adapters.hpp"
#include "uniadapt/nn.hpp"

namespace uniadapt {

// Where the language identifier enters the model.
enum class LidMode {
  kNone,             // no conditioning (multilingual baseline)
  kPrefixes,         // learned key/value prefixes in top-K attention layers
  kInput,            // LID embedding added to the frame embeddings
  kTopK,             // LID embedding added to each top-K layer input
  kAttentionConcat,  // feature concat at attention input + down-projection
};

std::string lid_mode_name(LidMode mode);
LidMode lid_mode_from_name(const std::string& name);

// Re-parameterization MLP producing the prefixes:
// [P_k, P_v] = W2 tanh(W1 Embed(lid) + b1) + b2, split into two L_p x d halves.
struct PrefixMlpParams {
  Param* embed = nullptr;  // L x d_e
  Param* w1 = nullptr;     // d_e x d_h
  Param* b1 = nullptr;     // 1 x d_h
  Param* w2 = nullptr;     // d_h x (2 * L_p * d)
  Param* b2 = nullptr;     // 1 x (2 * L_p * d)
  int prefix_len = 1;
  int model_dim = 0;
};

PrefixMlpParams make_prefix_mlp_params(ParamStore& store,
                                       const std::string& prefix, int n_langs,
                                       int embed_dim, int hidden_dim,
                                       int prefix_len, int model_dim);
void init_prefix_mlp(PrefixMlpParams& p, Rng& rng);

// Deterministic function of the language id; tanh applied exactly once.
PrefixPair make_prefixes(Tape& tape, const PrefixMlpParams& p, int lid);

// Randomized check of the central identity: direct concatenated prefixed
// attention equals the gamma-gated decomposition. Returns the max abs output
// difference; optionally reports the gamma range seen.
double prefix_equivalence_max_abs_diff(std::uint64_t seed, int t_frames, int d,
                                       int n_heads, int prefix_len,
                                       double* min_gamma = nullptr,
                                       double* max_gamma = nullptr);

}  // namespace uniadapt
