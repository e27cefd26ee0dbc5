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

#include <memory>
#include <vector>

#include "uniadapt/tensor.hpp"

namespace uniadapt {

// Owns parameters with stable addresses and preserves creation order (the
// order defines checkpoint layout and optimizer iteration order).
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Param& create(const std::string& name, int rows, int cols,
                bool trainable = true);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  bool erase_prefix(const std::string& name_prefix);  // true if any removed
  std::vector<Param*> all();
  std::vector<const Param*> all() const;
  std::int64_t total_count(const std::string& name_prefix = "") const;

 private:
  std::vector<std::unique_ptr<Param>> params_;  // stable addresses under erase
};

// Bottleneck block: layer norm, down-projection, ReLU, up-projection, plus
// the residual connection. With W_up = 0 and b_up = 0 the block is exactly
// the identity.
struct AdapterParams {
  Param* ln_g = nullptr;
  Param* ln_b = nullptr;
  Param* down_w = nullptr;  // d x r
  Param* down_b = nullptr;  // 1 x r
  Param* up_w = nullptr;    // r x d
  Param* up_b = nullptr;    // 1 x d
};

// Tape-level view of an adapter (parameters leafed onto a tape).
struct AdapterWeights {
  Tensor ln_g, ln_b, down_w, down_b, up_w, up_b;
};

AdapterParams make_adapter_params(ParamStore& store, const std::string& prefix,
                                  int d, int r);
void init_adapter(AdapterParams& a, Rng& rng, bool zero_init_up);
AdapterWeights leaf_adapter(Tape& tape, const AdapterParams& a);

// W_up^T relu(W_down^T LN(x) + b_down) + b_up, i.e. the block without its
// residual. Used directly by the summation variant.
Tensor adapter_delta(Tensor x, const AdapterWeights& a);
// x + adapter_delta(x)
Tensor adapter_forward(Tensor x, const AdapterWeights& a);

// How the bridge linear (W_i, b_i) combines with the language-universal
// adapter inside the adapter distillation loss.
enum class BridgeMode {
  kBeforeAdapter,  // adapter(W x + b)
  kAfterAdapter,   // W adapter(x) + b
};

// The distillation-only view of the LUA at one position. Feeds the adapter
// distillation loss, never the model's forward path.
Tensor lua_distill_view(Tensor x, const AdapterWeights& lua, Tensor bridge_w,
                        Tensor bridge_b, BridgeMode mode);

// Language-specific adapter bank: one adapter set per language, routed by
// the utterance's language id.
struct LsaBank {
  std::vector<std::vector<AdapterParams>> per_language;  // [lang][position]
  int n_languages() const { return static_cast<int>(per_language.size()); }
  int n_positions() const {
    return per_language.empty() ? 0 : static_cast<int>(per_language[0].size());
  }
  const AdapterParams& route(int lid, int position) const;
};

std::int64_t adapter_param_count(int d, int r);

}  // namespace uniadapt
