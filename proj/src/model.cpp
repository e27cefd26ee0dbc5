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

#include "uniadapt/model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "uniadapt/array_file.hpp"

namespace uniadapt {

std::string forward_path_name(ForwardPath p) {
  switch (p) {
    case ForwardPath::kPlain: return "plain";
    case ForwardPath::kLsa: return "lsa";
    case ForwardPath::kLua: return "lua";
    case ForwardPath::kSum: return "sum";
  }
  fail("invalid forward path");
}

ForwardPath forward_path_from_name(const std::string& name) {
  if (name == "plain") return ForwardPath::kPlain;
  if (name == "lsa") return ForwardPath::kLsa;
  if (name == "lua") return ForwardPath::kLua;
  if (name == "sum") return ForwardPath::kSum;
  fail("unknown forward path '", name, "' (expected plain|lsa|lua|sum)");
}

const PrefixMlpParams& Model::prefix_mlp_for_layer(int equipped_idx) const {
  UA_CHECK(!prefix_mlps.empty(), "model has no prefix parameters");
  if (cfg.share_prefix_layers) return prefix_mlps[0];
  return prefix_mlps.at(static_cast<size_t>(equipped_idx));
}

namespace {

void init_normal(Param& p, Rng& rng, double sd) {
  std::normal_distribution<double> nd(0.0, sd);
  for (double& v : p.value) v = nd(rng);
}

void init_ones(Param& p) { std::fill(p.value.begin(), p.value.end(), 1.0); }

}  // namespace

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  UA_CHECK(cfg.d_model % cfg.n_heads == 0, "model: d_model ", cfg.d_model,
           " not divisible by n_heads ", cfg.n_heads);
  UA_CHECK(cfg.top_k >= 0 && cfg.top_k <= cfg.n_layers,
           "model: top_k must be in [0, n_layers]");
  UA_CHECK(cfg.vocab_size > 0, "model: vocab_size not set");
  UA_CHECK(cfg.n_langs >= 1, "model: need at least one language");

  Model m;
  m.cfg = cfg;
  ParamStore& s = m.store;
  const int d = cfg.d_model;

  m.embed_w = &s.create("backbone.embed.w", cfg.d_in, d, !cfg.freeze_embed);
  m.embed_b = &s.create("backbone.embed.b", 1, d, !cfg.freeze_embed);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = strcat_msg("backbone.layer", l);
    Model::LayerParams lp;
    lp.ln1_g = &s.create(p + ".ln1.g", 1, d);
    lp.ln1_b = &s.create(p + ".ln1.b", 1, d);
    lp.wq = &s.create(p + ".attn.wq", d, d);
    lp.bq = &s.create(p + ".attn.bq", 1, d);
    lp.wk = &s.create(p + ".attn.wk", d, d);
    lp.bk = &s.create(p + ".attn.bk", 1, d);
    lp.wv = &s.create(p + ".attn.wv", d, d);
    lp.bv = &s.create(p + ".attn.bv", 1, d);
    lp.wo = &s.create(p + ".attn.wo", d, d);
    lp.bo = &s.create(p + ".attn.bo", 1, d);
    lp.ln2_g = &s.create(p + ".ln2.g", 1, d);
    lp.ln2_b = &s.create(p + ".ln2.b", 1, d);
    lp.ff1_w = &s.create(p + ".ffn.w1", d, cfg.d_ff);
    lp.ff1_b = &s.create(p + ".ffn.b1", 1, cfg.d_ff);
    lp.ff2_w = &s.create(p + ".ffn.w2", cfg.d_ff, d);
    lp.ff2_b = &s.create(p + ".ffn.b2", 1, d);
    m.layers.push_back(lp);
  }
  m.lnf_g = &s.create("backbone.lnf.g", 1, d);
  m.lnf_b = &s.create("backbone.lnf.b", 1, d);
  m.out_w = &s.create("backbone.out.w", d, cfg.vocab_size);
  m.out_b = &s.create("backbone.out.b", 1, cfg.vocab_size);

  const int P = cfg.n_positions();
  if (cfg.use_lsa) {
    m.lsa.per_language.resize(static_cast<size_t>(cfg.n_langs));
    for (int lang = 0; lang < cfg.n_langs; ++lang)
      for (int pos = 0; pos < P; ++pos)
        m.lsa.per_language[static_cast<size_t>(lang)].push_back(
            make_adapter_params(s, strcat_msg("lsa.lang", lang, ".pos", pos), d,
                                cfg.adapter_r));
  }
  if (cfg.use_lua)
    for (int pos = 0; pos < P; ++pos)
      m.lua.push_back(
          make_adapter_params(s, strcat_msg("lua.pos", pos), d, cfg.adapter_r));
  if (cfg.use_lsa && cfg.use_lua && cfg.use_bridges)
    for (int pos = 0; pos < P; ++pos)
      m.bridges.push_back({&s.create(strcat_msg("bridge.pos", pos, ".w"), d, d),
                           &s.create(strcat_msg("bridge.pos", pos, ".b"), 1, d)});

  if (cfg.lid_mode == LidMode::kPrefixes && cfg.prefix_len > 0) {
    const int n_mlps = cfg.share_prefix_layers ? 1 : cfg.top_k;
    for (int i = 0; i < n_mlps; ++i)
      m.prefix_mlps.push_back(make_prefix_mlp_params(
          s, strcat_msg("prefix.set", i), cfg.n_langs, cfg.prefix_embed_dim,
          cfg.prefix_hidden_dim, cfg.prefix_len, d));
  } else if (cfg.lid_mode == LidMode::kInput || cfg.lid_mode == LidMode::kTopK) {
    m.lid_embed = &s.create("lid.embed", cfg.n_langs, d);
  } else if (cfg.lid_mode == LidMode::kAttentionConcat) {
    m.lid_concat_embed = &s.create("lid.concat_embed", cfg.n_langs, cfg.lid_embed_dim);
    for (int l = 0; l < cfg.n_layers; ++l)
      m.attn_concat.push_back(
          {&s.create(strcat_msg("lid.concat_proj", l, ".w"), d + cfg.lid_embed_dim, d),
           &s.create(strcat_msg("lid.concat_proj", l, ".b"), 1, d)});
  }

  // ---- initialization (one stream per component family) ----
  Rng rng(mix_seed(seed, 0xba5e));
  init_normal(*m.embed_w, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d_in)));
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& lp : m.layers) {
    init_ones(*lp.ln1_g);
    init_ones(*lp.ln2_g);
    init_normal(*lp.wq, rng, sd);
    init_normal(*lp.wk, rng, sd);
    init_normal(*lp.wv, rng, sd);
    init_normal(*lp.wo, rng, sd);
    init_normal(*lp.ff1_w, rng, sd);
    init_normal(*lp.ff2_w, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d_ff)));
  }
  init_ones(*m.lnf_g);
  init_normal(*m.out_w, rng, sd);

  Rng arng(mix_seed(seed, 0xada));
  for (auto& lang : m.lsa.per_language)
    for (auto& a : lang) init_adapter(a, arng, cfg.zero_init_adapters);
  for (auto& a : m.lua) init_adapter(a, arng, cfg.zero_init_adapters);
  for (auto& b : m.bridges) {
    // identity start so the distillation view begins near the raw features
    for (int i = 0; i < d; ++i) b.w->value[static_cast<size_t>(i) * d + i] = 1.0;
  }
  Rng prng(mix_seed(seed, 0x9ef));
  for (auto& pm : m.prefix_mlps) init_prefix_mlp(pm, prng);
  if (m.lid_embed) init_normal(*m.lid_embed, prng, 0.1);
  if (m.lid_concat_embed) init_normal(*m.lid_concat_embed, prng, 1.0);
  for (auto& cp : m.attn_concat) {
    // identity on the feature block keeps the start near-neutral; the LID
    // rows get a small random init so conditioning flows from step one
    for (int i = 0; i < d; ++i)
      cp.w->value[static_cast<size_t>(i) * d + i] = 1.0;
    std::normal_distribution<double> nd(0.0, 0.05);
    for (int i = d; i < d + cfg.lid_embed_dim; ++i)
      for (int j = 0; j < d; ++j)
        cp.w->value[static_cast<size_t>(i) * d + j] = nd(prng);
  }
  return m;
}

// ---- forward ------------------------------------------------------------------

namespace {

EncoderLayerWeights leaf_layer(Tape& tape, const Model::LayerParams& lp,
                               int n_heads) {
  EncoderLayerWeights w;
  w.ln1_g = tape.leaf(*lp.ln1_g);
  w.ln1_b = tape.leaf(*lp.ln1_b);
  w.attn = AttentionWeights{tape.leaf(*lp.wq), tape.leaf(*lp.bq),
                            tape.leaf(*lp.wk), tape.leaf(*lp.bk),
                            tape.leaf(*lp.wv), tape.leaf(*lp.bv),
                            tape.leaf(*lp.wo), tape.leaf(*lp.bo), n_heads};
  w.ln2_g = tape.leaf(*lp.ln2_g);
  w.ln2_b = tape.leaf(*lp.ln2_b);
  w.ff1_w = tape.leaf(*lp.ff1_w);
  w.ff1_b = tape.leaf(*lp.ff1_b);
  w.ff2_w = tape.leaf(*lp.ff2_w);
  w.ff2_b = tape.leaf(*lp.ff2_b);
  return w;
}

}  // namespace

ForwardTrace model_forward(Model& m, Tape& tape, std::span<const double> feats,
                           int t_frames, int lid, ForwardPath path,
                           Rng* dropout_rng, int valid_len) {
  const ModelConfig& cfg = m.cfg;
  UA_CHECK(static_cast<int>(feats.size()) == t_frames * cfg.d_in,
           "model_forward: features size ", feats.size(),
           " does not match T=", t_frames, ", d_in=", cfg.d_in);
  UA_CHECK(lid >= 0 && lid < cfg.n_langs, "unknown language id ", lid);
  if (path == ForwardPath::kLsa || path == ForwardPath::kSum)
    UA_CHECK(!m.pruned, "LSA pass requested on a pruned model");
  if (path == ForwardPath::kLsa || path == ForwardPath::kSum)
    UA_CHECK(cfg.use_lsa, "model has no LSA bank");
  if (path == ForwardPath::kLua || path == ForwardPath::kSum)
    UA_CHECK(cfg.use_lua, "model has no LUA");

  ForwardTrace trace;
  Tensor x = tape.input(t_frames, cfg.d_in, feats);
  x = linear(x, tape.leaf(*m.embed_w), tape.leaf(*m.embed_b));
  if (cfg.use_pos_enc)
    x = add(x, tape.input(t_frames, cfg.d_model,
                          sinusoidal_position_encoding(t_frames, cfg.d_model)));
  Tensor lid_row;
  if (cfg.lid_mode == LidMode::kInput || cfg.lid_mode == LidMode::kTopK)
    lid_row = gather_row(tape.leaf(*m.lid_embed), lid);
  if (cfg.lid_mode == LidMode::kInput) x = add_row(x, lid_row);

  Tensor concat_lid_row;
  if (cfg.lid_mode == LidMode::kAttentionConcat)
    concat_lid_row = gather_row(tape.leaf(*m.lid_concat_embed), lid);

  for (int l = 0; l < cfg.n_layers; ++l) {
    const bool equipped = cfg.layer_equipped(l);
    const int equipped_idx = l - cfg.first_equipped_layer();

    if (cfg.lid_mode == LidMode::kTopK && equipped) x = add_row(x, lid_row);

    EncoderLayerWeights w = leaf_layer(tape, m.layers[static_cast<size_t>(l)],
                                       cfg.n_heads);
    EncoderLayerSlots slots;
    if (equipped && path != ForwardPath::kPlain) {
      const int pos_attn = 2 * equipped_idx;
      const int pos_ffn = 2 * equipped_idx + 1;
      auto push = [&](std::vector<AdapterWeights>& slot, int pos) {
        if (path == ForwardPath::kLsa || path == ForwardPath::kSum)
          slot.push_back(leaf_adapter(tape, m.lsa.route(lid, pos)));
        if (path == ForwardPath::kLua || path == ForwardPath::kSum)
          slot.push_back(leaf_adapter(tape, m.lua.at(static_cast<size_t>(pos))));
      };
      push(slots.attn_adapters, pos_attn);
      push(slots.ffn_adapters, pos_ffn);
    }

    PrefixPair pp;
    AttentionConcatCond concat_cond;
    EncoderLayerOptions opt;
    opt.post_norm = cfg.post_norm;
    opt.valid_len = valid_len;
    // no rng means inference: dropout disabled
    opt.dropout_rate = dropout_rng ? cfg.dropout : 0.0;
    opt.dropout_rng = dropout_rng;
    if (cfg.lid_mode == LidMode::kPrefixes && equipped && cfg.prefix_len > 0) {
      if (m.prefixes_exported) {
        auto& [pk, pv] =
            m.prefix_store.at(static_cast<size_t>(lid)).at(static_cast<size_t>(equipped_idx));
        pp = PrefixPair{tape.leaf(*pk), tape.leaf(*pv)};
      } else {
        pp = make_prefixes(tape, m.prefix_mlp_for_layer(equipped_idx), lid);
      }
      opt.prefix = &pp;
    }
    if (cfg.lid_mode == LidMode::kAttentionConcat) {
      concat_cond =
          AttentionConcatCond{concat_lid_row,
                              tape.leaf(*m.attn_concat[static_cast<size_t>(l)].w),
                              tape.leaf(*m.attn_concat[static_cast<size_t>(l)].b)};
      opt.attn_concat = &concat_cond;
    }

    EncoderLayerTrace layer_trace;
    const bool want_trace = equipped && (path == ForwardPath::kLsa ||
                                         path == ForwardPath::kLua);
    opt.trace = want_trace ? &layer_trace : nullptr;

    x = encoder_layer(x, w, slots, opt);

    if (want_trace) {
      UA_CHECK(layer_trace.attn_adapter_in && layer_trace.ffn_adapter_in,
               "internal: adapter trace missing");
      trace.adapter_inputs.push_back(*layer_trace.attn_adapter_in);
      trace.adapter_outputs.push_back(*layer_trace.attn_adapter_out);
      trace.adapter_inputs.push_back(*layer_trace.ffn_adapter_in);
      trace.adapter_outputs.push_back(*layer_trace.ffn_adapter_out);
    }
  }

  x = layernorm_rows(x, tape.leaf(*m.lnf_g), tape.leaf(*m.lnf_b));
  trace.logits = linear(x, tape.leaf(*m.out_w), tape.leaf(*m.out_b));
  return trace;
}

// ---- pruning / prefix export -----------------------------------------------------

void prune_for_inference(Model& m) {
  if (m.pruned) return;  // idempotent
  m.store.erase_prefix("lsa.");
  m.store.erase_prefix("bridge.");
  m.lsa.per_language.clear();
  m.bridges.clear();
  m.cfg.use_lsa = false;
  m.pruned = true;
}

void export_prefixes(Model& m) {
  if (m.prefixes_exported) return;  // idempotent
  UA_CHECK(m.cfg.lid_mode == LidMode::kPrefixes && !m.prefix_mlps.empty(),
           "export_prefixes: model has no prefix parameters");
  const int n_layers = m.cfg.top_k;
  m.prefix_store.assign(static_cast<size_t>(m.cfg.n_langs), {});
  for (int lang = 0; lang < m.cfg.n_langs; ++lang) {
    for (int i = 0; i < n_layers; ++i) {
      Tape tape(/*grad_enabled=*/false);
      PrefixPair pp = make_prefixes(tape, m.prefix_mlp_for_layer(i), lang);
      Param* pk = &m.store.create(strcat_msg("prefix_store.lang", lang, ".set", i, ".pk"),
                                  pp.pk.rows(), pp.pk.cols(), /*trainable=*/false);
      Param* pv = &m.store.create(strcat_msg("prefix_store.lang", lang, ".set", i, ".pv"),
                                  pp.pv.rows(), pp.pv.cols(), /*trainable=*/false);
      auto kv = pp.pk.value();
      auto vv = pp.pv.value();
      pk->value.assign(kv.begin(), kv.end());
      pv->value.assign(vv.begin(), vv.end());
      m.prefix_store[static_cast<size_t>(lang)].push_back({pk, pv});
    }
  }
  m.store.erase_prefix("prefix.set");
  m.prefix_mlps.clear();
  m.prefixes_exported = true;
}

// ---- params report -----------------------------------------------------------------

ParamsReport params_report(const Model& m) {
  ParamsReport r;
  r.backbone = m.store.total_count("backbone.");
  auto push = [&](const std::string& name, std::int64_t count) {
    if (count == 0) return;
    r.rows.push_back({name, count,
                      r.backbone > 0 ? static_cast<double>(count) / r.backbone : 0.0});
  };
  push("backbone", r.backbone);
  push("lsa_bank", m.store.total_count("lsa."));
  push("lua", m.store.total_count("lua."));
  push("bridges", m.store.total_count("bridge."));
  push("prefix_mlp", m.store.total_count("prefix.set"));
  push("prefix_store", m.store.total_count("prefix_store."));
  push("lid_embed", m.store.total_count("lid."));
  r.total = m.store.total_count("");
  return r;
}

std::string format_params_report(const ParamsReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "component" << std::right << std::setw(12)
     << "params" << std::setw(16) << "vs backbone" << "\n";
  for (const auto& row : r.rows) {
    os << std::left << std::setw(14) << row.component << std::right
       << std::setw(12) << row.count << std::setw(15) << std::fixed
       << std::setprecision(2) << 100.0 * row.ratio_vs_backbone << "%\n";
  }
  os << std::left << std::setw(14) << "total" << std::right << std::setw(12)
     << r.total << "\n";
  return os.str();
}

// ---- checkpoint -----------------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"d_in", c.d_in},
          {"d_model", c.d_model},
          {"n_heads", c.n_heads},
          {"n_layers", c.n_layers},
          {"d_ff", c.d_ff},
          {"top_k", c.top_k},
          {"vocab_size", c.vocab_size},
          {"n_langs", c.n_langs},
          {"post_norm", c.post_norm},
          {"use_pos_enc", c.use_pos_enc},
          {"dropout", c.dropout},
          {"freeze_embed", c.freeze_embed},
          {"use_lsa", c.use_lsa},
          {"use_lua", c.use_lua},
          {"use_bridges", c.use_bridges},
          {"adapter_r", c.adapter_r},
          {"zero_init_adapters", c.zero_init_adapters},
          {"bridge_mode",
           c.bridge_mode == BridgeMode::kBeforeAdapter ? "before" : "after"},
          {"lid_mode", lid_mode_name(c.lid_mode)},
          {"prefix_len", c.prefix_len},
          {"prefix_embed_dim", c.prefix_embed_dim},
          {"prefix_hidden_dim", c.prefix_hidden_dim},
          {"share_prefix_layers", c.share_prefix_layers},
          {"lid_embed_dim", c.lid_embed_dim}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_in = j.at("d_in").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.top_k = j.at("top_k").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.n_langs = j.at("n_langs").get<int>();
  c.post_norm = j.at("post_norm").get<bool>();
  c.use_pos_enc = j.at("use_pos_enc").get<bool>();
  c.dropout = j.at("dropout").get<double>();
  c.freeze_embed = j.at("freeze_embed").get<bool>();
  c.use_lsa = j.at("use_lsa").get<bool>();
  c.use_lua = j.at("use_lua").get<bool>();
  c.use_bridges = j.value("use_bridges", true);
  c.adapter_r = j.at("adapter_r").get<int>();
  c.zero_init_adapters = j.at("zero_init_adapters").get<bool>();
  c.bridge_mode = j.at("bridge_mode").get<std::string>() == "before"
                      ? BridgeMode::kBeforeAdapter
                      : BridgeMode::kAfterAdapter;
  c.lid_mode = lid_mode_from_name(j.at("lid_mode").get<std::string>());
  c.prefix_len = j.at("prefix_len").get<int>();
  c.prefix_embed_dim = j.at("prefix_embed_dim").get<int>();
  c.prefix_hidden_dim = j.at("prefix_hidden_dim").get<int>();
  c.share_prefix_layers = j.at("share_prefix_layers").get<bool>();
  c.lid_embed_dim = j.at("lid_embed_dim").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const Model& m, const Vocab& vocab, const std::string& stem,
                     const std::map<std::string, std::string>& extra_meta) {
  nlohmann::json meta;
  meta["kind"] = "checkpoint";
  meta["config"] = config_to_json(m.cfg);
  meta["pruned"] = m.pruned;
  meta["prefixes_exported"] = m.prefixes_exported;
  meta["vocab"] = vocab.symbols();
  for (const auto& [k, v] : extra_meta) meta["extra"][k] = v;
  std::vector<NamedArray> arrays;
  for (const Param* p : m.store.all())
    arrays.push_back({p->name, p->rows, p->cols, p->value});
  write_array_file(stem, meta, arrays);
}

LoadedCheckpoint load_checkpoint(const std::string& stem) {
  ArrayFile f = read_array_file(stem);
  UA_CHECK(f.meta.value("kind", "") == "checkpoint", stem,
           ": not a checkpoint");
  ModelConfig cfg = config_from_json(f.meta.at("config"));
  LoadedCheckpoint out{build_model(cfg, /*seed=*/0), Vocab{}, {}};
  if (f.meta.value("pruned", false)) prune_for_inference(out.model);
  if (f.meta.value("prefixes_exported", false)) export_prefixes(out.model);

  std::vector<std::string> symbols =
      f.meta.at("vocab").get<std::vector<std::string>>();
  UA_CHECK(symbols.size() >= 4, stem, ": malformed vocab");
  out.vocab = Vocab(std::vector<std::string>(symbols.begin(), symbols.end() - 4));
  UA_CHECK(out.vocab.size() == cfg.vocab_size, stem,
           ": vocab does not match config");

  size_t filled = 0;
  for (const NamedArray& a : f.arrays) {
    Param* p = out.model.store.find(a.name);
    UA_CHECK(p != nullptr, stem, ": unexpected array ", a.name);
    UA_CHECK(p->rows == a.rows && p->cols == a.cols, stem,
             ": shape mismatch for ", a.name);
    p->value = a.data;
    ++filled;
  }
  UA_CHECK(filled == out.model.store.all().size(), stem,
           ": checkpoint is missing arrays (", filled, " of ",
           out.model.store.all().size(), ")");
  if (f.meta.contains("extra"))
    for (const auto& [k, v] : f.meta.at("extra").items())
      out.extra_meta[k] = v.get<std::string>();
  return out;
}

}  // namespace uniadapt
