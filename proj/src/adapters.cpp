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

#include "uniadapt/adapters.hpp"

#include <algorithm>
#include <cmath>

namespace uniadapt {

Param& ParamStore::create(const std::string& name, int rows, int cols,
                          bool trainable) {
  UA_CHECK(find(name) == nullptr, "duplicate parameter name: ", name);
  params_.push_back(std::make_unique<Param>(name, rows, cols, trainable));
  return *params_.back();
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

bool ParamStore::erase_prefix(const std::string& name_prefix) {
  const size_t before = params_.size();
  std::erase_if(params_, [&](const std::unique_ptr<Param>& p) {
    return p->name.rfind(name_prefix, 0) == 0;
  });
  return params_.size() != before;
}

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::all() const {
  std::vector<const Param*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::int64_t ParamStore::total_count(const std::string& name_prefix) const {
  std::int64_t n = 0;
  for (const auto& p : params_)
    if (p->name.rfind(name_prefix, 0) == 0) n += p->numel();
  return n;
}

AdapterParams make_adapter_params(ParamStore& store, const std::string& prefix,
                                  int d, int r) {
  AdapterParams a;
  a.ln_g = &store.create(prefix + ".ln.g", 1, d);
  a.ln_b = &store.create(prefix + ".ln.b", 1, d);
  a.down_w = &store.create(prefix + ".down.w", d, r);
  a.down_b = &store.create(prefix + ".down.b", 1, r);
  a.up_w = &store.create(prefix + ".up.w", r, d);
  a.up_b = &store.create(prefix + ".up.b", 1, d);
  return a;
}

void init_adapter(AdapterParams& a, Rng& rng, bool zero_init_up) {
  std::fill(a.ln_g->value.begin(), a.ln_g->value.end(), 1.0);
  const int d = a.down_w->rows, r = a.down_w->cols;
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  for (double& v : a.down_w->value) v = nd(rng);
  if (!zero_init_up) {
    std::normal_distribution<double> nu(0.0, 1.0 / std::sqrt(static_cast<double>(r)));
    for (double& v : a.up_w->value) v = nu(rng);
  }
}

AdapterWeights leaf_adapter(Tape& tape, const AdapterParams& a) {
  return AdapterWeights{tape.leaf(*a.ln_g),   tape.leaf(*a.ln_b),
                        tape.leaf(*a.down_w), tape.leaf(*a.down_b),
                        tape.leaf(*a.up_w),   tape.leaf(*a.up_b)};
}

Tensor adapter_delta(Tensor x, const AdapterWeights& a) {
  Tensor h = layernorm_rows(x, a.ln_g, a.ln_b);
  h = relu(add_row(matmul(h, a.down_w), a.down_b));
  return add_row(matmul(h, a.up_w), a.up_b);
}

Tensor adapter_forward(Tensor x, const AdapterWeights& a) {
  return add(x, adapter_delta(x, a));
}

Tensor lua_distill_view(Tensor x, const AdapterWeights& lua, Tensor bridge_w,
                        Tensor bridge_b, BridgeMode mode) {
  if (mode == BridgeMode::kBeforeAdapter)
    return adapter_forward(add_row(matmul(x, bridge_w), bridge_b), lua);
  return add_row(matmul(adapter_forward(x, lua), bridge_w), bridge_b);
}

const AdapterParams& LsaBank::route(int lid, int position) const {
  UA_CHECK(lid >= 0 && lid < n_languages(), "unknown language id ", lid,
           " (bank holds ", n_languages(), " languages)");
  UA_CHECK(position >= 0 && position < n_positions(),
           "adapter position ", position, " out of range");
  return per_language[static_cast<size_t>(lid)][static_cast<size_t>(position)];
}

std::int64_t adapter_param_count(int d, int r) {
  return 2LL * d + (static_cast<std::int64_t>(d) * r + r) +
         (static_cast<std::int64_t>(r) * d + d);
}

}  // namespace uniadapt
