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

#include "uniadapt/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "uniadapt/train.hpp"

namespace uniadapt {

namespace {

struct CommonTrainArgs {
  std::string preset = "kd-base";
  std::string config_file;
  std::vector<std::string> overrides;  // section.key=value
  std::string out_dir;
  // convenience flags (negative values mean "not set")
  double alpha = -1.0, beta = -1.0;
  long long seed = -1, max_updates = -1;
  std::string lid_mode, adapter_mode;
  bool no_lsa = false, no_lua = false;
  bool post_norm = false, detach_teacher = false;
};

void add_common_train_options(CLI::App* cmd, CommonTrainArgs& a) {
  cmd->add_option("--preset", a.preset,
                  "experiment preset (multi|prefix|lua|lsa|lsa-lua|kd-ad|"
                  "kd-base|sum|kd-input|kd-topk|kd-attncat)");
  cmd->add_option("--config", a.config_file, "config file (overrides preset)");
  cmd->add_option("--set", a.overrides, "override: section.key=value")
      ->take_all();
  cmd->add_option("--out", a.out_dir, "run directory");
  cmd->add_option("--alpha", a.alpha, "adapter distillation weight");
  cmd->add_option("--beta", a.beta, "output distillation weight");
  cmd->add_option("--seed", a.seed, "optimizer/init seed");
  cmd->add_option("--max-updates", a.max_updates, "training updates");
  cmd->add_option("--lid-mode", a.lid_mode,
                  "none|prefixes|input|topk|attncat");
  cmd->add_option("--adapter-mode", a.adapter_mode, "kd|sum");
  cmd->add_flag("--no-lsa", a.no_lsa, "disable the language-specific bank");
  cmd->add_flag("--no-lua", a.no_lua, "disable the language-universal adapter");
  cmd->add_flag("--post-norm", a.post_norm, "post-norm transformer layers");
  cmd->add_flag("--detach-teacher", a.detach_teacher,
                "stop gradients into the teacher branch of the KD losses");
}

ExperimentConfig resolve_config(const CommonTrainArgs& a) {
  ExperimentConfig cfg = a.config_file.empty()
                             ? preset_config(a.preset)
                             : config_from_ini_file(a.config_file);
  for (const std::string& ov : a.overrides) {
    const size_t eq = ov.find('=');
    UA_CHECK(eq != std::string::npos, "--set expects section.key=value, got '",
             ov, "'");
    apply_override(cfg, ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (a.alpha >= 0.0) cfg.loss.alpha = a.alpha;
  if (a.beta >= 0.0) cfg.loss.beta = a.beta;
  if (a.seed >= 0) cfg.opt.seed = static_cast<std::uint64_t>(a.seed);
  if (a.max_updates >= 0) cfg.opt.max_updates = static_cast<int>(a.max_updates);
  if (!a.lid_mode.empty()) cfg.model.lid_mode = lid_mode_from_name(a.lid_mode);
  if (!a.adapter_mode.empty()) {
    UA_CHECK(a.adapter_mode == "kd" || a.adapter_mode == "sum",
             "--adapter-mode must be kd|sum");
    cfg.adapter_mode = a.adapter_mode == "kd" ? AdapterTrainMode::kKd
                                              : AdapterTrainMode::kSum;
  }
  if (a.no_lsa) cfg.model.use_lsa = false;
  if (a.no_lua) cfg.model.use_lua = false;
  if (a.post_norm) cfg.model.post_norm = true;
  if (a.detach_teacher) cfg.loss.detach_teacher = true;
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (const char* env = std::getenv("UNIADAPT_OUT_DIR");
      env && a.out_dir.empty() && a.config_file.empty())
    cfg.out_dir = std::string(env) + "/" + a.preset;
  return cfg;
}

std::string lang_header(int n_langs) {
  std::ostringstream os;
  for (int l = 0; l < n_langs; ++l)
    os << std::setw(9) << ("lang" + std::to_string(l));
  os << std::setw(9) << "avg";
  return os.str();
}

std::string cer_cells(const EvalResult& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  for (double c : r.per_lang_cer) os << std::setw(9) << c;
  os << std::setw(9) << r.avg_cer;
  return os.str();
}

nlohmann::json cer_json(const EvalResult& r) {
  return {{"per_lang_cer", r.per_lang_cer}, {"avg_cer", r.avg_cer}};
}

std::uintmax_t payload_size(const std::string& stem) {
  std::error_code ec;
  const auto n = std::filesystem::file_size(stem + ".bin", ec);
  return ec ? 0 : n;
}

// dataset split selector; regenerates from the embedded experiment config
struct EvalSource {
  ToyDataset dataset;
  ExperimentConfig cfg;
};

EvalSource dataset_for_checkpoint(const LoadedCheckpoint& ckpt,
                                  const std::string& config_override) {
  EvalSource src;
  if (!config_override.empty()) {
    src.cfg = config_from_ini_file(config_override);
  } else {
    auto it = ckpt.extra_meta.find("experiment_config");
    UA_CHECK(it != ckpt.extra_meta.end(),
             "checkpoint has no embedded experiment config; pass --config");
    src.cfg = config_from_ini_text(it->second);
  }
  src.dataset = build_toy_dataset(src.cfg.data);
  UA_CHECK(src.dataset.vocab.size() == ckpt.model.cfg.vocab_size,
           "dataset/checkpoint vocab mismatch");
  return src;
}

std::span<const Utterance> select_split(const ToyDataset& ds,
                                        const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "dev") return ds.dev;
  if (split == "test") return ds.test;
  fail("unknown split '", split, "' (expected train|dev|test)");
}

// ---- commands ------------------------------------------------------------

int cmd_train(const CommonTrainArgs& args, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(args);
  ToyDataset ds = build_toy_dataset(cfg.data);
  TrainSummary s = train(cfg, ds, &out);
  out << "\nrun dir: " << cfg.out_dir << "\n";
  out << "          " << lang_header(cfg.data.n_langs) << "\n";
  out << "dev  CER " << cer_cells(s.dev) << "\n";
  out << "test CER " << cer_cells(s.test) << "\n";
  nlohmann::json j{{"event", "train_done"},
                   {"out_dir", cfg.out_dir},
                   {"best_dev_avg_cer", s.best_dev_avg_cer},
                   {"dev", cer_json(s.dev)},
                   {"test", cer_json(s.test)}};
  out << j.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& split,
             const std::string& config_override, std::ostream& out) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  EvalSource src = dataset_for_checkpoint(loaded, config_override);
  const ForwardPath path = src.cfg.resolve_decode_path();
  EvalResult r = evaluate(loaded.model, loaded.vocab,
                          select_split(src.dataset, split), path);
  out << "         " << lang_header(loaded.model.cfg.n_langs) << "\n";
  out << std::setw(4) << split << " CER " << cer_cells(r) << "\n";
  nlohmann::json j = cer_json(r);
  j["event"] = "eval";
  j["split"] = split;
  j["decode_path"] = forward_path_name(path);
  out << j.dump() << "\n";
  return 0;
}

int cmd_decode(const std::string& ckpt, const std::string& split, int lang,
               int limit, const std::string& config_override,
               std::ostream& out) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  EvalSource src = dataset_for_checkpoint(loaded, config_override);
  if (lang >= 0)
    UA_CHECK(lang < loaded.model.cfg.n_langs, "unknown language id ", lang,
             " (model covers ", loaded.model.cfg.n_langs, ")");
  std::vector<Utterance> selected;
  for (const Utterance& u : select_split(src.dataset, split)) {
    if (lang >= 0 && u.lid != lang) continue;
    selected.push_back(u);
    if (limit > 0 && static_cast<int>(selected.size()) >= limit) break;
  }
  if (selected.empty()) {
    out << "(no utterances selected)\n";
    out << nlohmann::json{{"event", "decode"}, {"n", 0}}.dump() << "\n";
    return 0;
  }
  const ForwardPath path = src.cfg.resolve_decode_path();
  EvalResult r = evaluate(loaded.model, loaded.vocab, selected, path,
                          /*keep_transcripts=*/true);
  for (size_t i = 0; i < r.transcripts.size(); ++i)
    out << "ref " << r.transcripts[i].first << "\thyp "
        << r.transcripts[i].second << "\n";
  out << "decoded " << selected.size() << " utterances, CER per language:\n";
  out << "         " << lang_header(loaded.model.cfg.n_langs) << "\n";
  out << "     CER " << cer_cells(r) << "\n";
  nlohmann::json j = cer_json(r);
  j["event"] = "decode";
  j["n"] = selected.size();
  j["decode_path"] = forward_path_name(path);
  out << j.dump() << "\n";
  return 0;
}

int cmd_prune(const std::string& ckpt, const std::string& out_stem,
              bool export_prefix_store, std::ostream& out) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  if (loaded.model.pruned && (!export_prefix_store || loaded.model.prefixes_exported)) {
    out << "checkpoint is already pruned; nothing to do\n";
    return 0;
  }
  const std::uintmax_t before = payload_size(ckpt);
  prune_for_inference(loaded.model);
  if (export_prefix_store && loaded.model.cfg.lid_mode == LidMode::kPrefixes)
    export_prefixes(loaded.model);
  std::map<std::string, std::string> extra = {};
  for (const auto& [k, v] : loaded.extra_meta) extra[k] = v;
  save_checkpoint(loaded.model, loaded.vocab, out_stem, extra);
  const std::uintmax_t after = payload_size(out_stem);
  out << "payload bytes: " << before << " -> " << after << "\n";
  ParamsReport r = params_report(loaded.model);
  out << format_params_report(r);
  nlohmann::json j{{"event", "prune"},
                   {"bytes_before", before},
                   {"bytes_after", after},
                   {"out", out_stem}};
  out << j.dump() << "\n";
  return 0;
}

int cmd_params(const std::string& ckpt, const std::string& preset,
               const std::string& config_file, std::ostream& out) {
  ParamsReport r;
  if (!ckpt.empty()) {
    LoadedCheckpoint loaded = load_checkpoint(ckpt);
    r = params_report(loaded.model);
  } else {
    ExperimentConfig cfg =
        config_file.empty() ? preset_config(preset) : config_from_ini_file(config_file);
    cfg.model.vocab_size =
        cfg.data.n_langs * cfg.data.chars_per_lang + 4;  // disjoint charsets
    cfg.model.n_langs = cfg.data.n_langs;
    cfg.model.d_in = cfg.data.d_in;
    Model m = build_model(cfg.model, cfg.opt.seed);
    r = params_report(m);
  }
  out << format_params_report(r);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"component", row.component},
                    {"params", row.count},
                    {"ratio_vs_backbone", row.ratio_vs_backbone}});
  out << nlohmann::json{{"event", "params"}, {"rows", rows}, {"total", r.total}}
             .dump()
      << "\n";
  return 0;
}

int cmd_gen_data(const CommonTrainArgs& args, const std::string& out_stem,
                 std::ostream& out) {
  ExperimentConfig cfg = resolve_config(args);
  ToyDataset ds = build_toy_dataset(cfg.data);
  save_dataset(ds, out_stem);
  out << "wrote " << out_stem << ".json / .bin (" << ds.train.size()
      << " train, " << ds.dev.size() << " dev, " << ds.test.size()
      << " test utterances)\n";
  return 0;
}

struct AblateRow {
  std::string label;
  std::string preset;
};

int cmd_ablate(const CommonTrainArgs& args, int order_seeds, std::ostream& out,
               std::ostream& err) {
  ExperimentConfig base = resolve_config(args);
  const std::string grid_dir =
      args.out_dir.empty() ? "runs/ablate" : args.out_dir;
  std::filesystem::create_directories(grid_dir);
  std::ofstream results(grid_dir + "/results.jsonl", std::ios::trunc);

  ToyDataset ds = build_toy_dataset(base.data);

  // Table-2-style ladder, then the KD/Sum comparison, then LID placements.
  const std::vector<AblateRow> rows = {
      {"A1 Multi", "multi"},          {"A2 +Prefixes", "prefix"},
      {"A3 +LUA", "lua"},             {"A4 +LSA", "lsa"},
      {"A5 +LSA+LUA", "lsa-lua"},     {"A6 +L_ad", "kd-ad"},
      {"A7 +L_out (KD)", "kd-base"},  {"Sum", "sum"},
      {"LID Prefixes", "kd-base"},    {"LID Input", "kd-input"},
      {"LID Top-K", "kd-topk"},       {"LID AttnConcat", "kd-attncat"},
  };

  std::map<std::string, EvalResult> cache;  // preset -> test result (same seed)
  int failures = 0;
  out << std::left << std::setw(18) << "row"
      << lang_header(base.data.n_langs) << "\n";
  for (const AblateRow& row : rows) {
    try {
      EvalResult r;
      if (auto it = cache.find(row.preset); it != cache.end()) {
        r = it->second;
      } else {
        ExperimentConfig cfg = preset_config(row.preset);
        cfg.data = base.data;
        cfg.opt = base.opt;
        cfg.log_every = base.log_every;
        cfg.out_dir = grid_dir + "/rows/" + row.preset;
        TrainSummary s = train(cfg, ds, nullptr);
        r = s.test;
        cache[row.preset] = r;
      }
      out << std::left << std::setw(18) << row.label << cer_cells(r) << "\n";
      nlohmann::json j = cer_json(r);
      j["row"] = row.label;
      j["preset"] = row.preset;
      j["seed"] = base.opt.seed;
      results << j.dump() << "\n";
    } catch (const Error& e) {
      ++failures;
      out << std::left << std::setw(18) << row.label << "FAILED: " << e.what()
          << "\n";
      err << "row '" << row.label << "' failed: " << e.what() << "\n";
      results << nlohmann::json{{"row", row.label},
                                {"preset", row.preset},
                                {"error", e.what()}}
                     .dump()
              << "\n";
    }
  }

  // Paper-style ordering probe (A7 vs A4 vs A1) over several seeds; reported,
  // not asserted (single-seed toy-scale orderings are noisy).
  if (order_seeds > 0) {
    out << "\nordering report (avg test CER; paper order is A7 <= A4 <= A1):\n";
    for (int s = 0; s < order_seeds; ++s) {
      const std::uint64_t seed = base.opt.seed + static_cast<std::uint64_t>(s);
      std::map<std::string, double> avg;
      for (const std::string preset : {"kd-base", "lsa", "multi"}) {
        if (s == 0 && cache.count(preset)) {
          avg[preset] = cache[preset].avg_cer;
          continue;
        }
        ExperimentConfig cfg = preset_config(preset);
        cfg.data = base.data;
        cfg.opt = base.opt;
        cfg.opt.seed = seed;
        cfg.log_every = base.log_every;
        cfg.out_dir = grid_dir + "/order/" + preset + "-s" + std::to_string(s);
        try {
          avg[preset] = train(cfg, ds, nullptr).test.avg_cer;
        } catch (const Error& e) {
          ++failures;
          err << "ordering run " << preset << " seed " << seed
              << " failed: " << e.what() << "\n";
          avg[preset] = std::nan("");
        }
      }
      const bool matches = avg["kd-base"] <= avg["lsa"] + 1e-12 &&
                           avg["lsa"] <= avg["multi"] + 1e-12;
      out << "seed " << seed << ": A7=" << std::fixed << std::setprecision(4)
          << avg["kd-base"] << " A4=" << avg["lsa"] << " A1=" << avg["multi"]
          << "  paper ordering " << (matches ? "holds" : "does not hold")
          << "\n";
      results << nlohmann::json{{"event", "ordering"},
                                {"seed", seed},
                                {"A7", avg["kd-base"]},
                                {"A4", avg["lsa"]},
                                {"A1", avg["multi"]},
                                {"paper_order_holds", matches}}
                     .dump()
              << "\n";
    }
  }
  out << "\nresults: " << grid_dir << "/results.jsonl\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"language-universal adapter learning for multilingual CTC "
               "recognition (toy-scale harness)"};
  app.require_subcommand(1);

  CommonTrainArgs train_args;
  CLI::App* trainc = app.add_subcommand("train", "train a model");
  add_common_train_options(trainc, train_args);

  std::string ckpt, split = "dev", config_override;
  CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
  evalc->add_option("--ckpt", ckpt, "checkpoint stem")->required();
  evalc->add_option("--split", split, "train|dev|test");
  evalc->add_option("--config", config_override, "config file for the dataset");

  std::string d_ckpt, d_split = "test", d_config;
  int d_lang = -1, d_limit = 0;
  CLI::App* decodec = app.add_subcommand("decode", "print transcripts + CER");
  decodec->add_option("--ckpt", d_ckpt, "checkpoint stem")->required();
  decodec->add_option("--split", d_split, "train|dev|test");
  decodec->add_option("--lang", d_lang, "restrict to one language id");
  decodec->add_option("--limit", d_limit, "max utterances (0 = all)");
  decodec->add_option("--config", d_config, "config file for the dataset");

  std::string p_ckpt, p_out;
  bool p_export = false;
  CLI::App* prunec =
      app.add_subcommand("prune", "drop LSA bank + bridges for inference");
  prunec->add_option("--ckpt", p_ckpt, "checkpoint stem")->required();
  prunec->add_option("--out", p_out, "output checkpoint stem")->required();
  prunec->add_flag("--export-prefixes", p_export,
                   "also replace the prefix MLP with stored per-language "
                   "prefixes (re-rounds them to f32)");

  std::string pa_ckpt, pa_preset = "kd-base", pa_config;
  CLI::App* paramsc = app.add_subcommand("params", "parameter accounting");
  paramsc->add_option("--ckpt", pa_ckpt, "checkpoint stem");
  paramsc->add_option("--preset", pa_preset, "preset (when no checkpoint)");
  paramsc->add_option("--config", pa_config, "config file (when no checkpoint)");

  CommonTrainArgs gen_args;
  std::string gen_out = "dataset";
  CLI::App* genc = app.add_subcommand("gen-data", "dump the toy dataset");
  add_common_train_options(genc, gen_args);
  genc->add_option("--dump", gen_out, "output stem for the dataset dump");

  CommonTrainArgs ab_args;
  int order_seeds = 3;
  CLI::App* ablatec =
      app.add_subcommand("ablate", "run the full ablation grid");
  add_common_train_options(ablatec, ab_args);
  ablatec->add_option("--order-seeds", order_seeds,
                      "seeds for the A7/A4/A1 ordering report (0 = skip)");

  std::vector<const char*> argv;
  argv.push_back("uniadapt");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (trainc->parsed()) return cmd_train(train_args, out);
    if (evalc->parsed()) return cmd_eval(ckpt, split, config_override, out);
    if (decodec->parsed())
      return cmd_decode(d_ckpt, d_split, d_lang, d_limit, d_config, out);
    if (prunec->parsed()) return cmd_prune(p_ckpt, p_out, p_export, out);
    if (paramsc->parsed()) return cmd_params(pa_ckpt, pa_preset, pa_config, out);
    if (genc->parsed()) return cmd_gen_data(gen_args, gen_out, out);
    if (ablatec->parsed()) return cmd_ablate(ab_args, order_seeds, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  err << "no command given\n";
  return 1;
}

}  // namespace uniadapt
