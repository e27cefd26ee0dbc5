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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uniadapt/adapters.hpp"
#include "uniadapt/ctc.hpp"
#include "uniadapt/lid_prefix.hpp"
#include "uniadapt/nn.hpp"

namespace uniadapt {

struct ModelConfig {
  int d_in = 16;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 4;
  int d_ff = 128;
  int top_k = 2;  // adapter/prefix-equipped top layers
  int vocab_size = 0;
  int n_langs = 3;
  bool post_norm = false;
  bool use_pos_enc = true;
  double dropout = 0.0;
  bool freeze_embed = true;

  bool use_lsa = false;
  bool use_lua = false;
  // bridge linears exist only for distillation training (not for the
  // summation variant) and are dropped at pruning
  bool use_bridges = true;
  int adapter_r = 16;
  bool zero_init_adapters = true;
  BridgeMode bridge_mode = BridgeMode::kBeforeAdapter;

  LidMode lid_mode = LidMode::kNone;
  int prefix_len = 1;
  int prefix_embed_dim = 16;
  int prefix_hidden_dim = 80;
  bool share_prefix_layers = false;
  int lid_embed_dim = 16;  // attention-concat embedding width

  int n_positions() const { return 2 * top_k; }
  int first_equipped_layer() const { return n_layers - top_k; }
  bool layer_equipped(int layer) const {
    return layer >= first_equipped_layer();
  }
};

// Which adapter set is active during a forward pass.
enum class ForwardPath { kPlain, kLsa, kLua, kSum };

std::string forward_path_name(ForwardPath p);
ForwardPath forward_path_from_name(const std::string& name);

struct Model {
  ModelConfig cfg;
  ParamStore store;

  Param* embed_w = nullptr;
  Param* embed_b = nullptr;
  struct LayerParams {
    Param *ln1_g, *ln1_b;
    Param *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    Param *ln2_g, *ln2_b;
    Param *ff1_w, *ff1_b, *ff2_w, *ff2_b;
  };
  std::vector<LayerParams> layers;
  Param* lnf_g = nullptr;
  Param* lnf_b = nullptr;
  Param* out_w = nullptr;
  Param* out_b = nullptr;

  LsaBank lsa;                       // [lang][position]; empty after pruning
  std::vector<AdapterParams> lua;    // [position]
  struct BridgeParams {
    Param* w = nullptr;
    Param* b = nullptr;
  };
  std::vector<BridgeParams> bridges;  // [position]; dropped at pruning

  std::vector<PrefixMlpParams> prefix_mlps;  // per equipped layer (1 if shared)
  Param* lid_embed = nullptr;                // additive modes, L x d
  struct ConcatProjParams {
    Param* w = nullptr;
    Param* b = nullptr;
  };
  Param* lid_concat_embed = nullptr;          // attncat mode, L x d_e
  std::vector<ConcatProjParams> attn_concat;  // per layer in attncat mode

  // exported prefixes: [lang][equipped layer] -> (pk, pv)
  std::vector<std::vector<std::pair<Param*, Param*>>> prefix_store;

  bool pruned = false;
  bool prefixes_exported = false;

  const PrefixMlpParams& prefix_mlp_for_layer(int equipped_idx) const;
};

Model build_model(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardTrace {
  Tensor logits;                         // T x V
  std::vector<Tensor> adapter_inputs;    // x_i per position (adapter passes)
  std::vector<Tensor> adapter_outputs;   // adapter block output per position
};

// One utterance forward. `valid_len` < 0 means all T frames are real.
ForwardTrace model_forward(Model& m, Tape& tape, std::span<const double> feats,
                           int t_frames, int lid, ForwardPath path,
                           Rng* dropout_rng = nullptr, int valid_len = -1);

// Removes the LSA bank and the bridge linears (idempotent). The LUA forward
// path is bitwise unchanged.
void prune_for_inference(Model& m);

// Replaces the prefix re-parameterization MLP with the stored per-language
// prefix pairs (idempotent). In-memory outputs are bitwise unchanged.
void export_prefixes(Model& m);

// ---- parameter accounting ---------------------------------------------------

struct ParamsReport {
  struct Row {
    std::string component;
    std::int64_t count = 0;
    double ratio_vs_backbone = 0.0;
  };
  std::vector<Row> rows;
  std::int64_t total = 0;
  std::int64_t backbone = 0;
};

ParamsReport params_report(const Model& m);
std::string format_params_report(const ParamsReport& r);

// ---- checkpointing ------------------------------------------------------------

// Writes `<stem>.json` + `<stem>.bin`. The manifest carries the model config,
// the vocab and the named-array index; the payload is little-endian float32.
void save_checkpoint(const Model& m, const Vocab& vocab,
                     const std::string& stem,
                     const std::map<std::string, std::string>& extra_meta = {});

struct LoadedCheckpoint {
  Model model;
  Vocab vocab;
  std::map<std::string, std::string> extra_meta;
};
LoadedCheckpoint load_checkpoint(const std::string& stem);

}  // namespace uniadapt
