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

#include "uniadapt/model.hpp"
#include "uniadapt/toy_data.hpp"

namespace uniadapt {

struct LossWeights {
  double alpha = 0.1;
  double beta = 0.1;
  bool detach_teacher = false;
};

struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  int warmup_steps = 100;
  int max_updates = 2000;
  int batch_size = 8;
  int eval_interval = 200;
  std::uint64_t seed = 1;
};

// Whether training distills LSA into LUA (two forwards) or sums the two
// adapter outputs in a single forward.
enum class AdapterTrainMode { kKd, kSum };

// Everything needed to reproduce a run bit-for-bit.
struct ExperimentConfig {
  ModelConfig model;
  DataConfig data;
  LossWeights loss;
  OptimizerConfig opt;
  AdapterTrainMode adapter_mode = AdapterTrainMode::kKd;
  std::string decode_path = "auto";  // auto|plain|lsa|lua|sum
  std::string out_dir = "runs/default";
  int log_every = 10;

  // resolves "auto" against the model flags
  ForwardPath resolve_decode_path() const;
};

// Flat key-value text with [sections]; '#' starts a comment. Unknown keys are
// rejected so typos fail fast.
std::string to_ini(const ExperimentConfig& cfg);
ExperimentConfig config_from_ini_text(const std::string& text);
ExperimentConfig config_from_ini_file(const std::string& path);
// Applies a single "section.key=value" override.
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// Named experiment presets (the system ladder of the ablation harness).
std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

}  // namespace uniadapt
