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

#include "uniadapt/nn.hpp"

#include <cmath>

namespace uniadapt {

Tensor linear(Tensor x, Tensor w, Tensor b) {
  return add_row(matmul(x, w), b);
}

namespace {

struct HeadProjections {
  Tensor q, k, v;  // T x d each, pre-slicing
  int t = 0;
  int valid = 0;
};

HeadProjections project_qkv(Tensor x, const AttentionWeights& w, int valid_len) {
  const int t = x.rows();
  const int valid = valid_len < 0 ? t : valid_len;
  UA_CHECK(valid >= 0 && valid <= t, "attention: valid_len ", valid_len,
           " out of range for T=", t);
  UA_CHECK(w.model_dim() % w.n_heads == 0, "attention: model dim ",
           w.model_dim(), " not divisible by ", w.n_heads, " heads");
  return {linear(x, w.wq, w.bq), linear(x, w.wk, w.bk), linear(x, w.wv, w.bv),
          t, valid};
}

}  // namespace

Tensor attention(Tensor x, const AttentionWeights& w,
                 const AttentionOptions& opt) {
  HeadProjections p = project_qkv(x, w, opt.valid_len);
  const int hd = w.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const PrefixPair* pp = opt.prefix;
  const int lp = pp ? pp->len() : 0;
  UA_CHECK(p.valid > 0 || lp > 0,
           "attention: empty support (all keys masked, no prefix)");
  if (opt.gated_route)
    UA_CHECK(lp > 0 && p.valid > 0,
             "attention: gated route needs at least one prefix and one "
             "content key");

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<size_t>(w.n_heads));
  for (int h = 0; h < w.n_heads; ++h) {
    Tensor qh = slice_cols(p.q, h * hd, hd);
    Tensor kh = slice_cols(p.k, h * hd, hd);
    Tensor vh = slice_cols(p.v, h * hd, hd);
    if (lp == 0) {
      Tensor scores = affine(matmul_nt(qh, kh), scale);
      head_outputs.push_back(matmul(softmax_rows(scores, p.valid), vh));
      continue;
    }
    Tensor pkh = slice_cols(pp->pk, h * hd, hd);
    Tensor pvh = slice_cols(pp->pv, h * hd, hd);
    if (!opt.gated_route) {
      Tensor parts_k[] = {pkh, kh};
      Tensor parts_v[] = {pvh, vh};
      Tensor kcat = concat_rows(parts_k);
      Tensor vcat = concat_rows(parts_v);
      Tensor scores = affine(matmul_nt(qh, kcat), scale);
      // prefix columns are always attendable; only padded content is masked
      head_outputs.push_back(matmul(softmax_rows(scores, lp + p.valid), vcat));
    } else {
      Tensor logits_c = affine(matmul_nt(qh, kh), scale);
      Tensor logits_p = affine(matmul_nt(qh, pkh), scale);
      Tensor gamma = gamma_rows(logits_p, logits_c, p.valid);
      Tensor attn_c = matmul(softmax_rows(logits_c, p.valid), vh);
      Tensor attn_p = matmul(softmax_rows(logits_p), pvh);
      head_outputs.push_back(add(mul_col(attn_c, affine(gamma, -1.0, 1.0)),
                                 mul_col(attn_p, gamma)));
    }
  }
  Tensor ctx = w.n_heads == 1 ? head_outputs[0] : concat_cols(head_outputs);
  return linear(ctx, w.wo, w.bo);
}

Tensor attention_gamma(Tensor x, const AttentionWeights& w,
                       const PrefixPair& prefix, int valid_len) {
  HeadProjections p = project_qkv(x, w, valid_len);
  UA_CHECK(prefix.len() > 0, "attention_gamma: empty prefix");
  UA_CHECK(p.valid > 0, "attention_gamma: needs at least one content key");
  const int hd = w.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Tensor> cols;
  cols.reserve(static_cast<size_t>(w.n_heads));
  for (int h = 0; h < w.n_heads; ++h) {
    Tensor qh = slice_cols(p.q, h * hd, hd);
    Tensor kh = slice_cols(p.k, h * hd, hd);
    Tensor pkh = slice_cols(prefix.pk, h * hd, hd);
    Tensor logits_c = affine(matmul_nt(qh, kh), scale);
    Tensor logits_p = affine(matmul_nt(qh, pkh), scale);
    cols.push_back(gamma_rows(logits_p, logits_c, p.valid));
  }
  return cols.size() == 1 ? cols[0] : concat_cols(cols);
}

namespace {

Tensor apply_adapters(Tensor s, const std::vector<AdapterWeights>& adapters,
                      std::optional<Tensor>* in, std::optional<Tensor>* out) {
  if (adapters.empty()) return s;
  if (in) *in = s;
  Tensor acc = s;
  for (const AdapterWeights& a : adapters) acc = add(acc, adapter_delta(s, a));
  if (out) *out = acc;
  return acc;
}

Tensor maybe_dropout(Tensor t, const EncoderLayerOptions& opt) {
  if (opt.dropout_rate <= 0.0) return t;
  UA_CHECK(opt.dropout_rng != nullptr, "encoder_layer: dropout needs an rng");
  return dropout(t, opt.dropout_rate, *opt.dropout_rng);
}

}  // namespace

Tensor encoder_layer(Tensor x, const EncoderLayerWeights& w,
                     const EncoderLayerSlots& slots,
                     const EncoderLayerOptions& opt) {
  EncoderLayerTrace* tr = opt.trace;
  AttentionOptions attn_opt;
  attn_opt.valid_len = opt.valid_len;
  attn_opt.prefix = opt.prefix;

  auto attn_sublayer = [&](Tensor h) {
    if (opt.attn_concat) {
      Tensor lid_mat = broadcast_row(opt.attn_concat->lid_row, h.rows());
      Tensor parts[] = {h, lid_mat};
      h = linear(concat_cols(parts), opt.attn_concat->w, opt.attn_concat->b);
    }
    return maybe_dropout(attention(h, w.attn, attn_opt), opt);
  };
  auto ffn_sublayer = [&](Tensor h) {
    Tensor f = relu(linear(h, w.ff1_w, w.ff1_b));
    return maybe_dropout(linear(f, w.ff2_w, w.ff2_b), opt);
  };

  if (!opt.post_norm) {
    Tensor s = attn_sublayer(layernorm_rows(x, w.ln1_g, w.ln1_b));
    x = add(x, apply_adapters(s, slots.attn_adapters,
                              tr ? &tr->attn_adapter_in : nullptr,
                              tr ? &tr->attn_adapter_out : nullptr));
    Tensor f = ffn_sublayer(layernorm_rows(x, w.ln2_g, w.ln2_b));
    return add(x, apply_adapters(f, slots.ffn_adapters,
                                 tr ? &tr->ffn_adapter_in : nullptr,
                                 tr ? &tr->ffn_adapter_out : nullptr));
  }
  Tensor s = attn_sublayer(x);
  x = layernorm_rows(add(x, apply_adapters(s, slots.attn_adapters,
                                           tr ? &tr->attn_adapter_in : nullptr,
                                           tr ? &tr->attn_adapter_out : nullptr)),
                     w.ln1_g, w.ln1_b);
  Tensor f = ffn_sublayer(x);
  return layernorm_rows(add(x, apply_adapters(f, slots.ffn_adapters,
                                              tr ? &tr->ffn_adapter_in : nullptr,
                                              tr ? &tr->ffn_adapter_out : nullptr)),
                        w.ln2_g, w.ln2_b);
}

std::vector<double> sinusoidal_position_encoding(int T, int d) {
  std::vector<double> pe(static_cast<size_t>(T) * d, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i * 2 < d; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(d));
      pe[static_cast<size_t>(t) * d + 2 * i] = std::sin(t * freq);
      if (2 * i + 1 < d)
        pe[static_cast<size_t>(t) * d + 2 * i + 1] = std::cos(t * freq);
    }
  }
  return pe;
}

}  // namespace uniadapt
