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

#include "uniadapt/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace uniadapt {

ForwardPath ExperimentConfig::resolve_decode_path() const {
  if (decode_path != "auto") return forward_path_from_name(decode_path);
  if (adapter_mode == AdapterTrainMode::kSum && model.use_lsa && model.use_lua)
    return ForwardPath::kSum;
  if (model.use_lua) return ForwardPath::kLua;
  if (model.use_lsa) return ForwardPath::kLsa;
  return ForwardPath::kPlain;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    UA_CHECK(pos == s.size(), "trailing characters");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail("config: bad number '", s, "'");
  }
}

std::int64_t parse_int(const std::string& s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  UA_CHECK(ec == std::errc() && p == s.data() + s.size(),
           "config: bad integer '", s, "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail("config: bad boolean '", s, "' (expected true/false)");
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<int>(parse_int(item)));
  UA_CHECK(!out.empty(), "config: empty list");
  return out;
}

struct Field {
  std::string section, key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::vector<Field> field_table() {
  std::vector<Field> f;
  auto add = [&f](std::string section, std::string key, auto getter, auto setter) {
    f.push_back({std::move(section), std::move(key), getter, setter});
  };
  // [model]
  add("model", "d_model",
      [](const ExperimentConfig& c) { return std::to_string(c.model.d_model); },
      [](ExperimentConfig& c, const std::string& v) { c.model.d_model = static_cast<int>(parse_int(v)); });
  add("model", "n_heads",
      [](const ExperimentConfig& c) { return std::to_string(c.model.n_heads); },
      [](ExperimentConfig& c, const std::string& v) { c.model.n_heads = static_cast<int>(parse_int(v)); });
  add("model", "n_layers",
      [](const ExperimentConfig& c) { return std::to_string(c.model.n_layers); },
      [](ExperimentConfig& c, const std::string& v) { c.model.n_layers = static_cast<int>(parse_int(v)); });
  add("model", "d_ff",
      [](const ExperimentConfig& c) { return std::to_string(c.model.d_ff); },
      [](ExperimentConfig& c, const std::string& v) { c.model.d_ff = static_cast<int>(parse_int(v)); });
  add("model", "top_k",
      [](const ExperimentConfig& c) { return std::to_string(c.model.top_k); },
      [](ExperimentConfig& c, const std::string& v) { c.model.top_k = static_cast<int>(parse_int(v)); });
  add("model", "post_norm",
      [](const ExperimentConfig& c) { return c.model.post_norm ? "true" : "false"; },
      [](ExperimentConfig& c, const std::string& v) { c.model.post_norm = parse_bool(v); });
  add("model", "pos_enc",
      [](const ExperimentConfig& c) { return c.model.use_pos_enc ? "true" : "false"; },
      [](ExperimentConfig& c, const std::string& v) { c.model.use_pos_enc = parse_bool(v); });
  add("model", "dropout",
      [](const ExperimentConfig& c) { return fmt_double(c.model.dropout); },
      [](ExperimentConfig& c, const std::string& v) { c.model.dropout = parse_double(v); });
  add("model", "freeze_embed",
      [](const ExperimentConfig& c) { return c.model.freeze_embed ? "true" : "false"; },
      [](ExperimentConfig& c, const std::string& v) { c.model.freeze_embed = parse_bool(v); });
  // [adapters]
  add("adapters", "use_lsa",
      [](const ExperimentConfig& c) { return c.model.use_lsa ? "true" : "false"; },
      [](ExperimentConfig& c, const std::string& v) { c.model.use_lsa = parse_bool(v); });
  add("adapters", "use_lua",
      [](const ExperimentConfig& c) { return c.model.use_lua ? "true" : "false"; },
      [](ExperimentConfig& c, const std::string& v) { c.model.use_lua = parse_bool(v); });
  add("adapters", "r",
      [](const ExperimentConfig& c) { return std::to_string(c.model.adapter_r); },
      [](ExperimentConfig& c, const std::string& v) { c.model.adapter_r = static_cast<int>(parse_int(v)); });
  add("adapters", "zero_init",
      [](const ExperimentConfig& c) { return c.model.zero_init_adapters ? "true" : "false"; },
      [](ExperimentConfig& c, const std::string& v) { c.model.zero_init_adapters = parse_bool(v); });
  add("adapters", "bridge",
      [](const ExperimentConfig& c) {
        return c.model.bridge_mode == BridgeMode::kBeforeAdapter ? "before" : "after";
      },
      [](ExperimentConfig& c, const std::string& v) {
        if (v == "before") c.model.bridge_mode = BridgeMode::kBeforeAdapter;
        else if (v == "after") c.model.bridge_mode = BridgeMode::kAfterAdapter;
        else fail("config: bridge must be before|after, got '", v, "'");
      });
  add("adapters", "mode",
      [](const ExperimentConfig& c) {
        return c.adapter_mode == AdapterTrainMode::kKd ? "kd" : "sum";
      },
      [](ExperimentConfig& c, const std::string& v) {
        if (v == "kd") c.adapter_mode = AdapterTrainMode::kKd;
        else if (v == "sum") c.adapter_mode = AdapterTrainMode::kSum;
        else fail("config: adapters.mode must be kd|sum, got '", v, "'");
      });
  // [lid]
  add("lid", "mode",
      [](const ExperimentConfig& c) { return lid_mode_name(c.model.lid_mode); },
      [](ExperimentConfig& c, const std::string& v) { c.model.lid_mode = lid_mode_from_name(v); });
  add("lid", "prefix_len",
      [](const ExperimentConfig& c) { return std::to_string(c.model.prefix_len); },
      [](ExperimentConfig& c, const std::string& v) { c.model.prefix_len = static_cast<int>(parse_int(v)); });
  add("lid", "prefix_embed_dim",
      [](const ExperimentConfig& c) { return std::to_string(c.model.prefix_embed_dim); },
      [](ExperimentConfig& c, const std::string& v) { c.model.prefix_embed_dim = static_cast<int>(parse_int(v)); });
  add("lid", "prefix_hidden_dim",
      [](const ExperimentConfig& c) { return std::to_string(c.model.prefix_hidden_dim); },
      [](ExperimentConfig& c, const std::string& v) { c.model.prefix_hidden_dim = static_cast<int>(parse_int(v)); });
  add("lid", "share_layers",
      [](const ExperimentConfig& c) { return c.model.share_prefix_layers ? "true" : "false"; },
      [](ExperimentConfig& c, const std::string& v) { c.model.share_prefix_layers = parse_bool(v); });
  add("lid", "embed_dim",
      [](const ExperimentConfig& c) { return std::to_string(c.model.lid_embed_dim); },
      [](ExperimentConfig& c, const std::string& v) { c.model.lid_embed_dim = static_cast<int>(parse_int(v)); });
  // [loss]
  add("loss", "alpha",
      [](const ExperimentConfig& c) { return fmt_double(c.loss.alpha); },
      [](ExperimentConfig& c, const std::string& v) { c.loss.alpha = parse_double(v); });
  add("loss", "beta",
      [](const ExperimentConfig& c) { return fmt_double(c.loss.beta); },
      [](ExperimentConfig& c, const std::string& v) { c.loss.beta = parse_double(v); });
  add("loss", "detach_teacher",
      [](const ExperimentConfig& c) { return c.loss.detach_teacher ? "true" : "false"; },
      [](ExperimentConfig& c, const std::string& v) { c.loss.detach_teacher = parse_bool(v); });
  // [optimizer]
  add("optimizer", "lr",
      [](const ExperimentConfig& c) { return fmt_double(c.opt.lr); },
      [](ExperimentConfig& c, const std::string& v) { c.opt.lr = parse_double(v); });
  add("optimizer", "beta1",
      [](const ExperimentConfig& c) { return fmt_double(c.opt.beta1); },
      [](ExperimentConfig& c, const std::string& v) { c.opt.beta1 = parse_double(v); });
  add("optimizer", "beta2",
      [](const ExperimentConfig& c) { return fmt_double(c.opt.beta2); },
      [](ExperimentConfig& c, const std::string& v) { c.opt.beta2 = parse_double(v); });
  add("optimizer", "eps",
      [](const ExperimentConfig& c) { return fmt_double(c.opt.eps); },
      [](ExperimentConfig& c, const std::string& v) { c.opt.eps = parse_double(v); });
  add("optimizer", "warmup",
      [](const ExperimentConfig& c) { return std::to_string(c.opt.warmup_steps); },
      [](ExperimentConfig& c, const std::string& v) { c.opt.warmup_steps = static_cast<int>(parse_int(v)); });
  add("optimizer", "max_updates",
      [](const ExperimentConfig& c) { return std::to_string(c.opt.max_updates); },
      [](ExperimentConfig& c, const std::string& v) { c.opt.max_updates = static_cast<int>(parse_int(v)); });
  add("optimizer", "batch_size",
      [](const ExperimentConfig& c) { return std::to_string(c.opt.batch_size); },
      [](ExperimentConfig& c, const std::string& v) { c.opt.batch_size = static_cast<int>(parse_int(v)); });
  add("optimizer", "eval_interval",
      [](const ExperimentConfig& c) { return std::to_string(c.opt.eval_interval); },
      [](ExperimentConfig& c, const std::string& v) { c.opt.eval_interval = static_cast<int>(parse_int(v)); });
  add("optimizer", "seed",
      [](const ExperimentConfig& c) { return std::to_string(c.opt.seed); },
      [](ExperimentConfig& c, const std::string& v) { c.opt.seed = static_cast<std::uint64_t>(parse_int(v)); });
  // [data]
  add("data", "n_langs",
      [](const ExperimentConfig& c) { return std::to_string(c.data.n_langs); },
      [](ExperimentConfig& c, const std::string& v) {
        c.data.n_langs = static_cast<int>(parse_int(v));
        c.model.n_langs = c.data.n_langs;
      });
  add("data", "chars_per_lang",
      [](const ExperimentConfig& c) { return std::to_string(c.data.chars_per_lang); },
      [](ExperimentConfig& c, const std::string& v) { c.data.chars_per_lang = static_cast<int>(parse_int(v)); });
  add("data", "train_utts",
      [](const ExperimentConfig& c) { return fmt_int_list(c.data.train_utts); },
      [](ExperimentConfig& c, const std::string& v) { c.data.train_utts = parse_int_list(v); });
  add("data", "dev_utts",
      [](const ExperimentConfig& c) { return std::to_string(c.data.dev_utts); },
      [](ExperimentConfig& c, const std::string& v) { c.data.dev_utts = static_cast<int>(parse_int(v)); });
  add("data", "test_utts",
      [](const ExperimentConfig& c) { return std::to_string(c.data.test_utts); },
      [](ExperimentConfig& c, const std::string& v) { c.data.test_utts = static_cast<int>(parse_int(v)); });
  add("data", "u_min",
      [](const ExperimentConfig& c) { return std::to_string(c.data.u_min); },
      [](ExperimentConfig& c, const std::string& v) { c.data.u_min = static_cast<int>(parse_int(v)); });
  add("data", "u_max",
      [](const ExperimentConfig& c) { return std::to_string(c.data.u_max); },
      [](ExperimentConfig& c, const std::string& v) { c.data.u_max = static_cast<int>(parse_int(v)); });
  add("data", "frames_min",
      [](const ExperimentConfig& c) { return std::to_string(c.data.frames_min); },
      [](ExperimentConfig& c, const std::string& v) { c.data.frames_min = static_cast<int>(parse_int(v)); });
  add("data", "frames_max",
      [](const ExperimentConfig& c) { return std::to_string(c.data.frames_max); },
      [](ExperimentConfig& c, const std::string& v) { c.data.frames_max = static_cast<int>(parse_int(v)); });
  add("data", "sigma",
      [](const ExperimentConfig& c) { return fmt_double(c.data.sigma); },
      [](ExperimentConfig& c, const std::string& v) { c.data.sigma = parse_double(v); });
  add("data", "d_in",
      [](const ExperimentConfig& c) { return std::to_string(c.data.d_in); },
      [](ExperimentConfig& c, const std::string& v) {
        c.data.d_in = static_cast<int>(parse_int(v));
        c.model.d_in = c.data.d_in;
      });
  add("data", "twin_chars",
      [](const ExperimentConfig& c) { return std::to_string(c.data.twin_chars); },
      [](ExperimentConfig& c, const std::string& v) { c.data.twin_chars = static_cast<int>(parse_int(v)); });
  add("data", "twin_source",
      [](const ExperimentConfig& c) { return std::to_string(c.data.twin_source); },
      [](ExperimentConfig& c, const std::string& v) { c.data.twin_source = static_cast<int>(parse_int(v)); });
  add("data", "seed",
      [](const ExperimentConfig& c) { return std::to_string(c.data.seed); },
      [](ExperimentConfig& c, const std::string& v) { c.data.seed = static_cast<std::uint64_t>(parse_int(v)); });
  // [run]
  add("run", "out_dir",
      [](const ExperimentConfig& c) { return c.out_dir; },
      [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; });
  add("run", "decode_path",
      [](const ExperimentConfig& c) { return c.decode_path; },
      [](ExperimentConfig& c, const std::string& v) {
        if (v != "auto") forward_path_from_name(v);  // validate
        c.decode_path = v;
      });
  add("run", "log_every",
      [](const ExperimentConfig& c) { return std::to_string(c.log_every); },
      [](ExperimentConfig& c, const std::string& v) { c.log_every = static_cast<int>(parse_int(v)); });
  return f;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_ini(const ExperimentConfig& cfg) {
  std::ostringstream os;
  std::string current;
  for (const Field& f : field_table()) {
    if (f.section != current) {
      if (!current.empty()) os << "\n";
      os << "[" << f.section << "]\n";
      current = f.section;
    }
    os << f.key << " = " << f.get(cfg) << "\n";
  }
  return os.str();
}

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  const size_t dot = key.find('.');
  UA_CHECK(dot != std::string::npos, "config override '", key,
           "' must be section.key");
  const std::string section = key.substr(0, dot);
  const std::string k = key.substr(dot + 1);
  for (const Field& f : field_table()) {
    if (f.section == section && f.key == k) {
      f.set(cfg, value);
      return;
    }
  }
  fail("unknown config key '", key, "'");
}

ExperimentConfig config_from_ini_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      UA_CHECK(line.back() == ']', "config line ", line_no, ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    UA_CHECK(eq != std::string::npos, "config line ", line_no,
             ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    UA_CHECK(!section.empty(), "config line ", line_no, ": key before section");
    apply_override(cfg, section + "." + key, value);
  }
  return cfg;
}

ExperimentConfig config_from_ini_file(const std::string& path) {
  std::ifstream in(path);
  UA_CHECK(in.good(), "cannot open config file ", path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_ini_text(ss.str());
}

// ---- presets ---------------------------------------------------------------

std::vector<std::string> preset_names() {
  return {"multi", "prefix", "lua",     "lsa",     "lsa-lua", "kd-ad",
          "kd-base", "sum",   "kd-input", "kd-topk", "kd-attncat"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;  // baseline defaults: no adapters, no conditioning
  c.model.use_lsa = false;
  c.model.use_lua = false;
  c.model.lid_mode = LidMode::kNone;
  c.loss.alpha = 0.0;
  c.loss.beta = 0.0;
  c.out_dir = "runs/" + name;

  auto with_prefixes = [&] { c.model.lid_mode = LidMode::kPrefixes; };
  if (name == "multi") {
  } else if (name == "prefix") {
    with_prefixes();
  } else if (name == "lua") {
    with_prefixes();
    c.model.use_lua = true;
  } else if (name == "lsa") {
    with_prefixes();
    c.model.use_lsa = true;
  } else if (name == "lsa-lua") {
    with_prefixes();
    c.model.use_lsa = true;
    c.model.use_lua = true;
  } else if (name == "kd-ad") {
    with_prefixes();
    c.model.use_lsa = true;
    c.model.use_lua = true;
    c.loss.alpha = 0.1;
  } else if (name == "kd-base" || name == "kd-input" || name == "kd-topk" ||
             name == "kd-attncat") {
    with_prefixes();
    c.model.use_lsa = true;
    c.model.use_lua = true;
    c.loss.alpha = 0.1;
    c.loss.beta = 0.1;
    if (name == "kd-input") c.model.lid_mode = LidMode::kInput;
    if (name == "kd-topk") c.model.lid_mode = LidMode::kTopK;
    if (name == "kd-attncat") c.model.lid_mode = LidMode::kAttentionConcat;
  } else if (name == "sum") {
    with_prefixes();
    c.model.use_lsa = true;
    c.model.use_lua = true;
    c.adapter_mode = AdapterTrainMode::kSum;
  } else {
    fail("unknown preset '", name, "'");
  }
  return c;
}

}  // namespace uniadapt
