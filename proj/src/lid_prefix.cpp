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

#include "uniadapt/lid_prefix.hpp"

#include <algorithm>
#include <cmath>

namespace uniadapt {

std::string lid_mode_name(LidMode mode) {
  switch (mode) {
    case LidMode::kNone: return "none";
    case LidMode::kPrefixes: return "prefixes";
    case LidMode::kInput: return "input";
    case LidMode::kTopK: return "topk";
    case LidMode::kAttentionConcat: return "attncat";
  }
  fail("invalid lid mode");
}

LidMode lid_mode_from_name(const std::string& name) {
  if (name == "none") return LidMode::kNone;
  if (name == "prefixes") return LidMode::kPrefixes;
  if (name == "input") return LidMode::kInput;
  if (name == "topk" || name == "top6") return LidMode::kTopK;
  if (name == "attncat" || name == "attention") return LidMode::kAttentionConcat;
  fail("unknown lid mode '", name,
       "' (expected none|prefixes|input|topk|attncat)");
}

PrefixMlpParams make_prefix_mlp_params(ParamStore& store,
                                       const std::string& prefix, int n_langs,
                                       int embed_dim, int hidden_dim,
                                       int prefix_len, int model_dim) {
  UA_CHECK(prefix_len >= 1, "prefix_len must be >= 1, got ", prefix_len);
  PrefixMlpParams p;
  p.embed = &store.create(prefix + ".embed", n_langs, embed_dim);
  p.w1 = &store.create(prefix + ".w1", embed_dim, hidden_dim);
  p.b1 = &store.create(prefix + ".b1", 1, hidden_dim);
  p.w2 = &store.create(prefix + ".w2", hidden_dim, 2 * prefix_len * model_dim);
  p.b2 = &store.create(prefix + ".b2", 1, 2 * prefix_len * model_dim);
  p.prefix_len = prefix_len;
  p.model_dim = model_dim;
  return p;
}

void init_prefix_mlp(PrefixMlpParams& p, Rng& rng) {
  auto fill_normal = [&rng](Param* prm, double sd) {
    std::normal_distribution<double> nd(0.0, sd);
    for (double& v : prm->value) v = nd(rng);
  };
  fill_normal(p.embed, 1.0);
  fill_normal(p.w1, 1.0 / std::sqrt(static_cast<double>(p.w1->rows)));
  fill_normal(p.w2, 1.0 / std::sqrt(static_cast<double>(p.w2->rows)));
}

double prefix_equivalence_max_abs_diff(std::uint64_t seed, int t_frames, int d,
                                       int n_heads, int prefix_len,
                                       double* min_gamma, double* max_gamma) {
  UA_CHECK(t_frames >= 1 && d >= n_heads && d % n_heads == 0 && prefix_len >= 1,
           "prefix_equivalence: bad dimensions");
  Rng rng(seed);
  auto randmat = [&rng](int r, int c, double sd) {
    std::normal_distribution<double> nd(0.0, sd);
    std::vector<double> v(static_cast<size_t>(r) * c);
    for (double& x : v) x = nd(rng);
    return v;
  };
  // standard initializer scales keep the logits in a representative range
  const double wsd = 1.0 / std::sqrt(static_cast<double>(d));
  Tape tape(/*grad_enabled=*/false);
  Tensor x = tape.input(t_frames, d, randmat(t_frames, d, 1.0));
  AttentionWeights w;
  w.wq = tape.input(d, d, randmat(d, d, wsd));
  w.bq = tape.input(1, d, randmat(1, d, 0.5));
  w.wk = tape.input(d, d, randmat(d, d, wsd));
  w.bk = tape.input(1, d, randmat(1, d, 0.5));
  w.wv = tape.input(d, d, randmat(d, d, wsd));
  w.bv = tape.input(1, d, randmat(1, d, 0.5));
  w.wo = tape.input(d, d, randmat(d, d, wsd));
  w.bo = tape.input(1, d, randmat(1, d, 0.5));
  w.n_heads = n_heads;
  PrefixPair pp{tape.input(prefix_len, d, randmat(prefix_len, d, 1.0)),
                tape.input(prefix_len, d, randmat(prefix_len, d, 1.0))};

  AttentionOptions direct;
  direct.prefix = &pp;
  AttentionOptions gated = direct;
  gated.gated_route = true;
  Tensor out_direct = attention(x, w, direct);
  Tensor out_gated = attention(x, w, gated);
  double max_diff = 0.0;
  auto a = out_direct.value();
  auto b = out_gated.value();
  for (size_t i = 0; i < a.size(); ++i)
    max_diff = std::max(max_diff, std::abs(a[i] - b[i]));

  if (min_gamma || max_gamma) {
    Tensor g = attention_gamma(x, w, pp);
    double lo = 1.0, hi = 0.0;
    for (double v : g.value()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (min_gamma) *min_gamma = lo;
    if (max_gamma) *max_gamma = hi;
  }
  return max_diff;
}

PrefixPair make_prefixes(Tape& tape, const PrefixMlpParams& p, int lid) {
  UA_CHECK(lid >= 0 && lid < p.embed->rows, "unknown language id ", lid,
           " (prefix table holds ", p.embed->rows, " languages)");
  Tensor e = gather_row(tape.leaf(*p.embed), lid);
  Tensor h = tanh_op(linear(e, tape.leaf(*p.w1), tape.leaf(*p.b1)));
  Tensor o = linear(h, tape.leaf(*p.w2), tape.leaf(*p.b2));
  const int d = p.model_dim, lp = p.prefix_len;
  std::vector<Tensor> k_rows, v_rows;
  for (int i = 0; i < lp; ++i) k_rows.push_back(slice_cols(o, i * d, d));
  for (int i = 0; i < lp; ++i) v_rows.push_back(slice_cols(o, (lp + i) * d, d));
  PrefixPair pair;
  pair.pk = lp == 1 ? k_rows[0] : concat_rows(k_rows);
  pair.pv = lp == 1 ? v_rows[0] : concat_rows(v_rows);
  return pair;
}

}  // namespace uniadapt
