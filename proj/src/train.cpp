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

#include "uniadapt/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace uniadapt {

void Adam::step(const std::vector<Param*>& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (Param* p : params) {
    if (!p->trainable) continue;
    Moments& mo = state_[p];
    if (mo.m.empty()) {
      mo.m.assign(p->value.size(), 0.0);
      mo.v.assign(p->value.size(), 0.0);
    }
    for (size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
      mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
      const double mhat = mo.m[i] / bc1;
      const double vhat = mo.v[i] / bc2;
      p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double warmup_lr(const OptimizerConfig& opt, int step) {
  if (opt.warmup_steps <= 0) return opt.lr;
  const double f = static_cast<double>(step + 1) / opt.warmup_steps;
  return opt.lr * std::min(1.0, f);
}

Tensor adapter_distill_loss(Tape& tape, Model& model,
                            const ForwardTrace& lsa_pass,
                            const ForwardTrace& lua_pass, bool detach_teacher) {
  const int P = model.cfg.n_positions();
  UA_CHECK(static_cast<int>(lsa_pass.adapter_outputs.size()) == P &&
               static_cast<int>(lua_pass.adapter_inputs.size()) == P,
           "adapter_distill_loss: adapter trace length mismatch");
  UA_CHECK(static_cast<int>(model.bridges.size()) == P,
           "adapter_distill_loss: model has no bridge linears");
  std::vector<Tensor> pos_terms;
  for (int i = 0; i < P; ++i) {
    Tensor teacher = lsa_pass.adapter_outputs[static_cast<size_t>(i)];
    if (detach_teacher) teacher = detach(teacher);
    AdapterWeights lua_w = leaf_adapter(tape, model.lua[static_cast<size_t>(i)]);
    Tensor view = lua_distill_view(
        lua_pass.adapter_inputs[static_cast<size_t>(i)], lua_w,
        tape.leaf(*model.bridges[static_cast<size_t>(i)].w),
        tape.leaf(*model.bridges[static_cast<size_t>(i)].b),
        model.cfg.bridge_mode);
    pos_terms.push_back(mse(teacher, view));
  }
  return mean_of(pos_terms);
}

Tensor output_distill_loss(Tensor teacher_logits, Tensor student_logits,
                           bool detach_teacher) {
  if (detach_teacher) teacher_logits = detach(teacher_logits);
  return mse(teacher_logits, student_logits);
}

LossBreakdown train_step(Model& model, const Vocab& vocab, const Batch& batch,
                         const LossWeights& weights, AdapterTrainMode mode,
                         Adam& adam, double lr, int step, Rng* dropout_rng) {
  UA_CHECK(batch.size > 0, "train_step: empty batch");
  UA_CHECK(!model.pruned, "train_step: model is pruned");
  const ModelConfig& mc = model.cfg;
  const bool two_pass = mode == AdapterTrainMode::kKd && mc.use_lsa && mc.use_lua;
  const int blank = vocab.blank();

  for (Param* p : model.store.all()) p->zero_grad();
  Tape tape;
  std::vector<Tensor> ctc_lsa_terms, ctc_lua_terms, l_ad_terms, l_out_terms;

  for (int b = 0; b < batch.size; ++b) {
    const std::vector<double> feats = batch.utterance_feats(b);
    const std::vector<int> labels = batch.utterance_labels(b);
    const int t_len = batch.lengths[static_cast<size_t>(b)];
    const int lid = batch.lids[static_cast<size_t>(b)];
    if (two_pass) {
      ForwardTrace lsa_pass = model_forward(model, tape, feats, t_len, lid,
                                            ForwardPath::kLsa, dropout_rng);
      ForwardTrace lua_pass = model_forward(model, tape, feats, t_len, lid,
                                            ForwardPath::kLua, dropout_rng);
      ctc_lsa_terms.push_back(ctc_loss(lsa_pass.logits, labels, blank));
      ctc_lua_terms.push_back(ctc_loss(lua_pass.logits, labels, blank));
      l_ad_terms.push_back(adapter_distill_loss(tape, model, lsa_pass, lua_pass,
                                                weights.detach_teacher));
      l_out_terms.push_back(output_distill_loss(lsa_pass.logits, lua_pass.logits,
                                                weights.detach_teacher));
    } else {
      ForwardPath path = ForwardPath::kPlain;
      if (mode == AdapterTrainMode::kSum && mc.use_lsa && mc.use_lua)
        path = ForwardPath::kSum;
      else if (mc.use_lua)
        path = ForwardPath::kLua;
      else if (mc.use_lsa)
        path = ForwardPath::kLsa;
      ForwardTrace pass =
          model_forward(model, tape, feats, t_len, lid, path, dropout_rng);
      Tensor loss_u = ctc_loss(pass.logits, labels, blank);
      if (path == ForwardPath::kLsa)
        ctc_lsa_terms.push_back(loss_u);
      else
        ctc_lua_terms.push_back(loss_u);
    }
  }

  Tensor zero = tape.full(1, 1, 0.0);
  Tensor ctc_lsa_b = ctc_lsa_terms.empty() ? zero : mean_of(ctc_lsa_terms);
  Tensor ctc_lua_b = ctc_lua_terms.empty() ? zero : mean_of(ctc_lua_terms);
  Tensor l_ad_b = l_ad_terms.empty() ? zero : mean_of(l_ad_terms);
  Tensor l_out_b = l_out_terms.empty() ? zero : mean_of(l_out_terms);

  Tensor total = add(add(ctc_lsa_b, ctc_lua_b), affine(l_ad_b, weights.alpha));
  total = add(total, affine(l_out_b, weights.beta));

  LossBreakdown out;
  out.ctc_lsa = ctc_lsa_b.item();
  out.ctc_lua = ctc_lua_b.item();
  out.l_ad = l_ad_b.item();
  out.l_out = l_out_b.item();
  out.total = total.item();
  if (!std::isfinite(out.total)) {
    fail("non-finite loss at step ", step, " (batch ", step,
         "): ctc_lsa=", out.ctc_lsa, " ctc_lua=", out.ctc_lua,
         " l_ad=", out.l_ad, " l_out=", out.l_out);
  }

  tape.backward(total);
  adam.step(model.store.all(), lr);
  return out;
}

EvalResult evaluate(Model& model, const Vocab& vocab,
                    std::span<const Utterance> utts, ForwardPath path,
                    bool keep_transcripts) {
  const int L = model.cfg.n_langs;
  std::vector<std::int64_t> edits(static_cast<size_t>(L), 0);
  std::vector<std::int64_t> ref_len(static_cast<size_t>(L), 0);
  EvalResult res;
  for (const Utterance& u : utts) {
    Tape tape(/*grad_enabled=*/false);
    ForwardTrace pass =
        model_forward(model, tape, u.feats, u.length, u.lid, path);
    std::vector<int> hyp = greedy_decode(pass.logits, vocab.blank());
    edits[static_cast<size_t>(u.lid)] += levenshtein(u.labels, hyp);
    ref_len[static_cast<size_t>(u.lid)] += static_cast<std::int64_t>(u.labels.size());
    if (keep_transcripts)
      res.transcripts.emplace_back(vocab.render(u.labels), vocab.render(hyp));
  }
  double sum = 0.0;
  int langs_with_data = 0;
  for (int l = 0; l < L; ++l) {
    const double c = ref_len[static_cast<size_t>(l)] > 0
                         ? static_cast<double>(edits[static_cast<size_t>(l)]) /
                               static_cast<double>(ref_len[static_cast<size_t>(l)])
                         : 0.0;
    res.per_lang_cer.push_back(c);
    res.per_lang_refs.push_back(ref_len[static_cast<size_t>(l)]);
    if (ref_len[static_cast<size_t>(l)] > 0) {
      sum += c;
      ++langs_with_data;
    }
  }
  res.avg_cer = langs_with_data > 0 ? sum / langs_with_data : 0.0;
  return res;
}

namespace {

nlohmann::json breakdown_json(int step, const LossBreakdown& b, double lr) {
  return {{"step", step},     {"ctc_lsa", b.ctc_lsa}, {"ctc_lua", b.ctc_lua},
          {"l_ad", b.l_ad},   {"l_out", b.l_out},     {"total", b.total},
          {"lr", lr}};
}

}  // namespace

TrainSummary train(const ExperimentConfig& cfg_in, const ToyDataset& ds,
                   std::ostream* console) {
  ExperimentConfig cfg = cfg_in;
  cfg.model.vocab_size = ds.vocab.size();
  cfg.model.n_langs = cfg.data.n_langs;
  cfg.model.d_in = ds.d_in;
  cfg.model.use_bridges = cfg.adapter_mode == AdapterTrainMode::kKd;
  for (const Utterance& u : ds.train)
    UA_CHECK(std::all_of(u.labels.begin(), u.labels.end(),
                         [&](int l) { return l >= 0 && l < ds.vocab.n_chars(); }),
             "train: dataset labels do not fit the vocab");

  std::filesystem::create_directories(cfg.out_dir);
  {
    std::ofstream snap(cfg.out_dir + "/config.ini", std::ios::trunc);
    UA_CHECK(snap.good(), "cannot write config snapshot in ", cfg.out_dir);
    snap << to_ini(cfg);
  }
  std::ofstream metrics(cfg.out_dir + "/metrics.jsonl", std::ios::trunc);
  UA_CHECK(metrics.good(), "cannot write metrics log in ", cfg.out_dir);

  Model model = build_model(cfg.model, cfg.opt.seed);
  Adam adam(cfg.opt.beta1, cfg.opt.beta2, cfg.opt.eps);
  Rng batch_rng(mix_seed(cfg.opt.seed, 0xb47c4));
  Rng dropout_rng(mix_seed(cfg.opt.seed, 0xd409));
  const ForwardPath decode_path = cfg.resolve_decode_path();
  const std::string ckpt_stem = cfg.out_dir + "/checkpoint";

  std::vector<int> order(ds.train.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();  // triggers a shuffle on first use

  TrainSummary summary;
  summary.best_dev_avg_cer = std::numeric_limits<double>::infinity();

  auto run_eval = [&](int step) {
    EvalResult dev = evaluate(model, ds.vocab, ds.dev, decode_path);
    nlohmann::json j{{"step", step}, {"event", "eval"}, {"split", "dev"},
                     {"avg_cer", dev.avg_cer}};
    j["per_lang_cer"] = dev.per_lang_cer;
    metrics << j.dump() << "\n";
    if (console)
      *console << "step " << step << " dev avg CER " << dev.avg_cer << "\n";
    if (dev.avg_cer < summary.best_dev_avg_cer) {
      summary.best_dev_avg_cer = dev.avg_cer;
      summary.dev = dev;
      save_checkpoint(model, ds.vocab, ckpt_stem,
                      {{"best_dev_avg_cer", strcat_msg(dev.avg_cer)},
                       {"step", strcat_msg(step)},
                       {"experiment_config", to_ini(cfg)}});
    }
  };

  const int B = cfg.opt.batch_size;
  UA_CHECK(B >= 1, "train: batch_size must be >= 1");
  UA_CHECK(static_cast<size_t>(B) <= order.size(),
           "train: batch_size larger than the training set");
  std::vector<Utterance> batch;
  for (int step = 0; step < cfg.opt.max_updates; ++step) {
    if (cursor + static_cast<size_t>(B) > order.size()) {
      // not enough left for a full batch: reshuffle (language-pooled order)
      std::shuffle(order.begin(), order.end(), batch_rng);
      cursor = 0;
    }
    batch.clear();
    for (int i = 0; i < B; ++i)
      batch.push_back(ds.train[static_cast<size_t>(order[cursor++])]);
    const double lr = warmup_lr(cfg.opt, step);
    LossBreakdown b =
        train_step(model, ds.vocab, make_batch(batch, ds.vocab.pad()), cfg.loss,
                   cfg.adapter_mode, adam, lr, step,
                   cfg.model.dropout > 0.0 ? &dropout_rng : nullptr);
    summary.last = b;
    if (step % cfg.log_every == 0 || step + 1 == cfg.opt.max_updates)
      metrics << breakdown_json(step, b, lr).dump() << "\n";
    if (cfg.opt.eval_interval > 0 && (step + 1) % cfg.opt.eval_interval == 0 &&
        step + 1 < cfg.opt.max_updates)
      run_eval(step + 1);
  }
  run_eval(cfg.opt.max_updates);
  summary.updates = cfg.opt.max_updates;
  summary.checkpoint_stem = ckpt_stem;

  // test evaluation of the best checkpoint
  LoadedCheckpoint best = load_checkpoint(ckpt_stem);
  summary.test = evaluate(best.model, best.vocab, ds.test, decode_path);
  nlohmann::json jt{{"step", cfg.opt.max_updates},
                    {"event", "eval"},
                    {"split", "test"},
                    {"avg_cer", summary.test.avg_cer}};
  jt["per_lang_cer"] = summary.test.per_lang_cer;
  metrics << jt.dump() << "\n";
  if (console)
    *console << "test avg CER " << summary.test.avg_cer << " (best dev "
             << summary.best_dev_avg_cer << ")\n";
  return summary;
}

}  // namespace uniadapt
