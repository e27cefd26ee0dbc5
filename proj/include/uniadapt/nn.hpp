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

#include <optional>
#include <vector>

#include "uniadapt/adapters.hpp"
#include "uniadapt/tensor.hpp"

namespace uniadapt {

Tensor linear(Tensor x, Tensor w, Tensor b);  // x.w + b

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  int n_heads = 1;
  int model_dim() const { return wq.rows(); }
  int head_dim() const { return model_dim() / n_heads; }
};

// Learned pseudo key/value rows prepended to every head's keys and values.
struct PrefixPair {
  Tensor pk, pv;  // each L_p x d
  int len() const { return pk.valid() ? pk.rows() : 0; }
};

struct AttentionOptions {
  int valid_len = -1;                   // content keys >= valid_len are masked
  const PrefixPair* prefix = nullptr;   // nullptr or empty => standard attention
  bool gated_route = false;             // gamma-gated decomposition instead of
                                        // direct concatenation
};

// Scaled dot-product multi-head self-attention. Prefix rows, when present,
// are prepended to keys/values of every head and are never masked. Both the
// direct concatenated route and the gamma-gated decomposition are exposed;
// they agree to float roundoff.
Tensor attention(Tensor x, const AttentionWeights& w,
                 const AttentionOptions& opt = {});

// Per-position, per-head softmax mass assigned to the prefix columns
// (the gate of the gated decomposition). Returns T x N_h.
Tensor attention_gamma(Tensor x, const AttentionWeights& w,
                       const PrefixPair& prefix, int valid_len = -1);

// LID embedding concatenated feature-wise to the attention input, restored
// to width d by a down-projection.
struct AttentionConcatCond {
  Tensor lid_row;  // 1 x d_e
  Tensor w;        // (d + d_e) x d
  Tensor b;        // 1 x d
};

struct EncoderLayerWeights {
  Tensor ln1_g, ln1_b;
  AttentionWeights attn;
  Tensor ln2_g, ln2_b;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
};

// Adapters applied to a sublayer output s as s + sum of deltas; one entry in
// the KD paths, two in the summation variant, empty when the slot is off.
struct EncoderLayerSlots {
  std::vector<AdapterWeights> attn_adapters;
  std::vector<AdapterWeights> ffn_adapters;
};

// Captured per-layer activations needed by the adapter distillation loss.
struct EncoderLayerTrace {
  std::optional<Tensor> attn_adapter_in, attn_adapter_out;
  std::optional<Tensor> ffn_adapter_in, ffn_adapter_out;
};

struct EncoderLayerOptions {
  bool post_norm = false;
  int valid_len = -1;
  const PrefixPair* prefix = nullptr;
  const AttentionConcatCond* attn_concat = nullptr;
  double dropout_rate = 0.0;
  Rng* dropout_rng = nullptr;
  EncoderLayerTrace* trace = nullptr;
};

Tensor encoder_layer(Tensor x, const EncoderLayerWeights& w,
                     const EncoderLayerSlots& slots,
                     const EncoderLayerOptions& opt = {});

// Fixed sin/cos table, T x d row-major.
std::vector<double> sinusoidal_position_encoding(int T, int d);

}  // namespace uniadapt
