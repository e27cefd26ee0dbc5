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

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "uniadapt/config.hpp"
#include "uniadapt/model.hpp"
#include "uniadapt/toy_data.hpp"

namespace uniadapt {

// The four terms of the multi-task loss plus the combined scalar. The
// recomposition is exact with this summation order:
//   total == ((ctc_lsa + ctc_lua) + alpha * l_ad) + beta * l_out
struct LossBreakdown {
  double ctc_lsa = 0.0;
  double ctc_lua = 0.0;  // also holds the single CTC term of one-pass variants
  double l_ad = 0.0;
  double l_out = 0.0;
  double total = 0.0;
};

class Adam {
 public:
  Adam(double beta1, double beta2, double eps)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  // One update over the given params (trainable only), at learning rate lr.
  void step(const std::vector<Param*>& params, double lr);
  int updates_done() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  std::map<const Param*, Moments> state_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

double warmup_lr(const OptimizerConfig& opt, int step);

// Adapter distillation term for one utterance: the positional mean of
// MSE(teacher adapter output, bridge view of the student adapter), computed
// across the position-matched traces of the two forward passes.
Tensor adapter_distill_loss(Tape& tape, Model& model,
                            const ForwardTrace& lsa_pass,
                            const ForwardTrace& lua_pass, bool detach_teacher);

// Logit distillation term: MSE between the two passes' output logits.
Tensor output_distill_loss(Tensor teacher_logits, Tensor student_logits,
                           bool detach_teacher);

// One optimization step on one padded batch: the LSA-activated and
// LUA-activated forward passes share a tape, one backward runs on the
// combined loss, one optimizer update touches every trainable parameter.
LossBreakdown train_step(Model& model, const Vocab& vocab, const Batch& batch,
                         const LossWeights& weights, AdapterTrainMode mode,
                         Adam& adam, double lr, int step,
                         Rng* dropout_rng = nullptr);

struct EvalResult {
  std::vector<double> per_lang_cer;  // edits / ref length, per language
  std::vector<std::int64_t> per_lang_refs;
  double avg_cer = 0.0;              // mean over languages with data
  std::vector<std::pair<std::string, std::string>> transcripts;  // (ref, hyp)
};

EvalResult evaluate(Model& model, const Vocab& vocab,
                    std::span<const Utterance> utts, ForwardPath path,
                    bool keep_transcripts = false);

struct TrainSummary {
  std::string checkpoint_stem;
  double best_dev_avg_cer = 0.0;
  EvalResult dev;   // at the best checkpoint
  EvalResult test;  // at the best checkpoint
  int updates = 0;
  LossBreakdown last;
};

// Full run: seeded batches, periodic dev evaluation, best-dev checkpointing,
// JSONL metrics log, final test evaluation of the best checkpoint.
TrainSummary train(const ExperimentConfig& cfg, const ToyDataset& ds,
                   std::ostream* console = nullptr);

}  // namespace uniadapt
