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

#include "uniadapt/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uniadapt/array_file.hpp"

namespace uniadapt {

namespace {

// y = M x + b for row-major n x n M
void transform_vec(const std::vector<double>& m, const std::vector<double>& b,
                   const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) {
    double acc = b.empty() ? 0.0 : b[i];
    const double* row = m.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

// y = M^T (x - b); exact inverse of transform_vec for orthogonal M
void inverse_transform_vec(const std::vector<double>& m,
                           const std::vector<double>& b, const double* x,
                           double* y, int n) {
  std::vector<double> shifted(n);
  for (int i = 0; i < n; ++i) shifted[i] = x[i] - (b.empty() ? 0.0 : b[i]);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += m[static_cast<size_t>(j) * n + i] * shifted[j];
    y[i] = acc;
  }
}

std::vector<std::string> default_charset(int lang, int n_chars, int per_lang) {
  std::vector<std::string> out;
  for (int c = 0; c < n_chars; ++c) {
    const int global = lang * per_lang + c;
    if (global < 26) {
      out.push_back(std::string(1, static_cast<char>('a' + global)));
    } else {
      out.push_back(strcat_msg("u", global));
    }
  }
  return out;
}

}  // namespace

std::vector<double> random_orthogonal(int n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> a(static_cast<size_t>(n) * n);
  for (double& v : a) v = nd(rng);
  // modified Gram-Schmidt over rows, diagonal sign fixed positive
  std::vector<double> q(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(a.begin() + static_cast<size_t>(i) * n,
                          a.begin() + static_cast<size_t>(i + 1) * n);
    for (int k = 0; k < i; ++k) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += q[static_cast<size_t>(k) * n + j] * v[j];
      for (int j = 0; j < n; ++j) v[j] -= dot * q[static_cast<size_t>(k) * n + j];
    }
    double norm = 0.0;
    for (int j = 0; j < n; ++j) norm += v[j] * v[j];
    norm = std::sqrt(norm);
    UA_CHECK(norm > 1e-10, "degenerate draw in random_orthogonal");
    const double sign = v[i] >= 0.0 ? 1.0 : -1.0;
    for (int j = 0; j < n; ++j)
      q[static_cast<size_t>(i) * n + j] = sign * v[j] / norm;
  }
  return q;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& charsets) {
  UA_CHECK(!charsets.empty(), "build_vocab: need at least one language");
  std::vector<std::string> chars;
  for (const auto& cs : charsets)
    for (const auto& c : cs)
      if (std::find(chars.begin(), chars.end(), c) == chars.end())
        chars.push_back(c);
  return Vocab(std::move(chars));
}

std::vector<Utterance> gen_language(const ToyLanguageSpec& spec, int n_utts,
                                    std::uint64_t seed) {
  UA_CHECK(n_utts > 0, "gen_language: n_utts must be positive");
  UA_CHECK(spec.sigma >= 0.0, "gen_language: sigma must be >= 0");
  UA_CHECK(!spec.charset.empty() && spec.char_ids.size() == spec.charset.size(),
           "gen_language: malformed charset");
  // the shortest possible utterance must still admit a CTC alignment
  UA_CHECK(spec.frames_min * spec.u_min >= 2 * spec.u_min + 1,
           "gen_language: frames-per-symbol range [", spec.frames_min, ",",
           spec.frames_max, "] violates T >= 2U+1");
  UA_CHECK(spec.frames_min >= 1 && spec.frames_max >= spec.frames_min &&
               spec.u_min >= 1 && spec.u_max >= spec.u_min,
           "gen_language: bad length ranges");
  const int d = spec.d_in;
  Rng rng(seed);
  std::uniform_int_distribution<int> u_dist(spec.u_min, spec.u_max);
  std::uniform_int_distribution<int> f_dist(spec.frames_min, spec.frames_max);
  std::uniform_int_distribution<int> c_dist(0, static_cast<int>(spec.charset.size()) - 1);
  std::normal_distribution<double> noise(0.0, 1.0);

  // pre-transform each prototype once
  const int n_chars = static_cast<int>(spec.charset.size());
  std::vector<double> rendered(static_cast<size_t>(n_chars) * d);
  for (int c = 0; c < n_chars; ++c)
    transform_vec(spec.transform, spec.bias,
                  spec.prototypes.data() + static_cast<size_t>(c) * d,
                  rendered.data() + static_cast<size_t>(c) * d, d);

  std::vector<Utterance> out;
  out.reserve(static_cast<size_t>(n_utts));
  for (int u = 0; u < n_utts; ++u) {
    Utterance utt;
    utt.lid = spec.lid;
    const int n_sym = u_dist(rng);
    std::vector<int> frame_counts(n_sym);
    std::vector<int> char_idx(n_sym);
    int total = 0;
    for (int s = 0; s < n_sym; ++s) {
      char_idx[s] = c_dist(rng);
      frame_counts[s] = f_dist(rng);
      total += frame_counts[s];
      utt.labels.push_back(spec.char_ids[char_idx[s]]);
    }
    utt.length = total;
    utt.feats.resize(static_cast<size_t>(total) * d);
    double* frame = utt.feats.data();
    for (int s = 0; s < n_sym; ++s) {
      const double* proto = rendered.data() + static_cast<size_t>(char_idx[s]) * d;
      for (int f = 0; f < frame_counts[s]; ++f) {
        for (int j = 0; j < d; ++j)
          frame[j] = proto[j] + (spec.sigma > 0.0 ? spec.sigma * noise(rng) : 0.0);
        frame += d;
      }
    }
    UA_CHECK(utt.length >= 2 * static_cast<int>(utt.labels.size()) + 1,
             "generated utterance violates T >= 2U+1");
    out.push_back(std::move(utt));
  }
  return out;
}

SplitResult split(const std::vector<Utterance>& utts,
                  const std::array<double, 3>& ratios, std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  UA_CHECK(std::abs(sum - 1.0) < 1e-9, "split: ratios must sum to 1, got ", sum);
  // group per language so proportions are preserved within each
  int max_lid = -1;
  for (const Utterance& u : utts) max_lid = std::max(max_lid, u.lid);
  SplitResult out;
  for (int lid = 0; lid <= max_lid; ++lid) {
    std::vector<int> idx;
    for (size_t i = 0; i < utts.size(); ++i)
      if (utts[i].lid == lid) idx.push_back(static_cast<int>(i));
    if (idx.empty()) continue;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(lid)));
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n = static_cast<int>(idx.size());
    int n_train = static_cast<int>(std::floor(ratios[0] * n + 0.5));
    int n_dev = static_cast<int>(std::floor(ratios[1] * n + 0.5));
    n_train = std::min(n_train, n);
    n_dev = std::min(n_dev, n - n_train);
    for (int i = 0; i < n; ++i) {
      const Utterance& u = utts[static_cast<size_t>(idx[i])];
      if (i < n_train)
        out.train.push_back(u);
      else if (i < n_train + n_dev)
        out.dev.push_back(u);
      else
        out.test.push_back(u);
    }
  }
  UA_CHECK(ratios[0] <= 0.0 || !out.train.empty(), "split: empty train split");
  UA_CHECK(ratios[1] <= 0.0 || !out.dev.empty(), "split: empty dev split");
  return out;
}

ToyDataset build_toy_dataset(const DataConfig& cfg) {
  UA_CHECK(cfg.n_langs >= 1, "data: need at least one language");
  UA_CHECK(static_cast<int>(cfg.train_utts.size()) == cfg.n_langs,
           "data: train_utts must list one count per language (got ",
           cfg.train_utts.size(), " for ", cfg.n_langs, " languages)");
  UA_CHECK(cfg.twin_chars == 0 ||
               (cfg.n_langs >= 2 && cfg.twin_source != cfg.n_langs - 1 &&
                cfg.twin_source >= 0 && cfg.twin_source < cfg.n_langs &&
                cfg.twin_chars <= cfg.chars_per_lang),
           "data: invalid twin configuration");

  ToyDataset ds;
  ds.d_in = cfg.d_in;
  std::vector<std::vector<std::string>> charsets;
  for (int l = 0; l < cfg.n_langs; ++l)
    charsets.push_back(default_charset(l, cfg.chars_per_lang, cfg.chars_per_lang));
  ds.vocab = build_vocab(charsets);

  for (int l = 0; l < cfg.n_langs; ++l) {
    ToyLanguageSpec spec;
    spec.lid = l;
    spec.charset = charsets[static_cast<size_t>(l)];
    for (const auto& c : spec.charset) spec.char_ids.push_back(ds.vocab.id_of(c));
    spec.sigma = cfg.sigma;
    spec.frames_min = cfg.frames_min;
    spec.frames_max = cfg.frames_max;
    spec.u_min = cfg.u_min;
    spec.u_max = cfg.u_max;
    spec.d_in = cfg.d_in;
    Rng rng(mix_seed(cfg.seed, 101, static_cast<std::uint64_t>(l)));
    spec.transform = random_orthogonal(cfg.d_in, rng);
    spec.bias.assign(static_cast<size_t>(cfg.d_in), 0.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (double& b : spec.bias) b = 0.25 * nd(rng);
    spec.prototypes.resize(static_cast<size_t>(cfg.chars_per_lang) * cfg.d_in);
    for (int c = 0; c < cfg.chars_per_lang; ++c) {
      double norm = 0.0;
      double* p = spec.prototypes.data() + static_cast<size_t>(c) * cfg.d_in;
      for (int j = 0; j < cfg.d_in; ++j) {
        p[j] = nd(rng);
        norm += p[j] * p[j];
      }
      norm = std::sqrt(norm);
      for (int j = 0; j < cfg.d_in; ++j) p[j] /= norm;
    }
    ds.specs.push_back(std::move(spec));
  }

  // acoustic twins: the last language's first twin_chars characters collide
  // exactly with the source language's rendering
  if (cfg.twin_chars > 0 && cfg.n_langs >= 2) {
    ToyLanguageSpec& twin = ds.specs.back();
    const ToyLanguageSpec& src = ds.specs[static_cast<size_t>(cfg.twin_source)];
    const int d = cfg.d_in;
    for (int c = 0; c < cfg.twin_chars; ++c) {
      std::vector<double> rendered(d);
      transform_vec(src.transform, src.bias,
                    src.prototypes.data() + static_cast<size_t>(c) * d,
                    rendered.data(), d);
      inverse_transform_vec(twin.transform, twin.bias, rendered.data(),
                            twin.prototypes.data() + static_cast<size_t>(c) * d,
                            d);
    }
  }

  auto gen_into = [](std::vector<Utterance>& out, const ToyLanguageSpec& spec,
                     int n, std::uint64_t seed) {
    if (n == 0) return;  // empty splits are allowed (e.g. ratio 0)
    auto utts = gen_language(spec, n, seed);
    out.insert(out.end(), utts.begin(), utts.end());
  };
  for (int l = 0; l < cfg.n_langs; ++l) {
    const ToyLanguageSpec& spec = ds.specs[static_cast<size_t>(l)];
    gen_into(ds.train, spec, cfg.train_utts[static_cast<size_t>(l)],
             mix_seed(cfg.seed, 1, static_cast<std::uint64_t>(l)));
    gen_into(ds.dev, spec, cfg.dev_utts,
             mix_seed(cfg.seed, 2, static_cast<std::uint64_t>(l)));
    gen_into(ds.test, spec, cfg.test_utts,
             mix_seed(cfg.seed, 3, static_cast<std::uint64_t>(l)));
  }
  return ds;
}

std::vector<double> Batch::utterance_feats(int i) const {
  const int t = lengths[static_cast<size_t>(i)];
  const double* base = feats.data() + static_cast<size_t>(i) * t_max * d_in;
  return std::vector<double>(base, base + static_cast<size_t>(t) * d_in);
}

std::vector<int> Batch::utterance_labels(int i) const {
  const int u = target_lengths[static_cast<size_t>(i)];
  const int* base = targets.data() + static_cast<size_t>(i) * u_max;
  return std::vector<int>(base, base + u);
}

Batch make_batch(std::span<const Utterance> utts, int pad_id) {
  UA_CHECK(!utts.empty(), "make_batch: empty batch");
  Batch b;
  b.size = static_cast<int>(utts.size());
  b.d_in = static_cast<int>(utts[0].feats.size()) / utts[0].length;
  for (const Utterance& u : utts) {
    b.t_max = std::max(b.t_max, u.length);
    b.u_max = std::max(b.u_max, static_cast<int>(u.labels.size()));
  }
  b.feats.assign(static_cast<size_t>(b.size) * b.t_max * b.d_in, 0.0);
  b.targets.assign(static_cast<size_t>(b.size) * b.u_max, pad_id);
  for (int i = 0; i < b.size; ++i) {
    const Utterance& u = utts[static_cast<size_t>(i)];
    UA_CHECK(u.length >= 2 * static_cast<int>(u.labels.size()) + 1,
             "make_batch: utterance violates T >= 2U+1");
    std::copy(u.feats.begin(), u.feats.end(),
              b.feats.begin() + static_cast<size_t>(i) * b.t_max * b.d_in);
    std::copy(u.labels.begin(), u.labels.end(),
              b.targets.begin() + static_cast<size_t>(i) * b.u_max);
    b.lengths.push_back(u.length);
    b.target_lengths.push_back(static_cast<int>(u.labels.size()));
    b.lids.push_back(u.lid);
  }
  return b;
}

// ---- dataset dump -------------------------------------------------------------

namespace {

void append_split(std::vector<NamedArray>& arrays, const std::string& name,
                  const std::vector<Utterance>& utts, int d_in) {
  NamedArray feats{name + ".feats", 0, d_in, {}};
  NamedArray lengths{name + ".lengths", static_cast<int>(utts.size()), 1, {}};
  NamedArray labels{name + ".labels", 0, 1, {}};
  NamedArray label_lengths{name + ".label_lengths", static_cast<int>(utts.size()), 1, {}};
  NamedArray lids{name + ".lids", static_cast<int>(utts.size()), 1, {}};
  for (const Utterance& u : utts) {
    feats.rows += u.length;
    feats.data.insert(feats.data.end(), u.feats.begin(), u.feats.end());
    lengths.data.push_back(u.length);
    for (int l : u.labels) labels.data.push_back(l);
    labels.rows += static_cast<int>(u.labels.size());
    label_lengths.data.push_back(static_cast<double>(u.labels.size()));
    lids.data.push_back(u.lid);
  }
  arrays.push_back(std::move(feats));
  arrays.push_back(std::move(lengths));
  arrays.push_back(std::move(labels));
  arrays.push_back(std::move(label_lengths));
  arrays.push_back(std::move(lids));
}

std::vector<Utterance> read_split(const ArrayFile& f, const std::string& name,
                                  int d_in) {
  const NamedArray* feats = f.find(name + ".feats");
  const NamedArray* lengths = f.find(name + ".lengths");
  const NamedArray* labels = f.find(name + ".labels");
  const NamedArray* label_lengths = f.find(name + ".label_lengths");
  const NamedArray* lids = f.find(name + ".lids");
  UA_CHECK(feats && lengths && labels && label_lengths && lids,
           "dataset dump: missing arrays for split ", name);
  std::vector<Utterance> out;
  size_t f_off = 0, l_off = 0;
  for (size_t i = 0; i < lengths->data.size(); ++i) {
    Utterance u;
    u.length = static_cast<int>(lengths->data[i]);
    u.lid = static_cast<int>(lids->data[i]);
    const int n_lab = static_cast<int>(label_lengths->data[i]);
    u.feats.assign(feats->data.begin() + f_off,
                   feats->data.begin() + f_off + static_cast<size_t>(u.length) * d_in);
    for (int j = 0; j < n_lab; ++j)
      u.labels.push_back(static_cast<int>(labels->data[l_off + j]));
    f_off += static_cast<size_t>(u.length) * d_in;
    l_off += static_cast<size_t>(n_lab);
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace

void save_dataset(const ToyDataset& ds, const std::string& path_stem) {
  nlohmann::json meta;
  meta["kind"] = "toy-dataset";
  meta["d_in"] = ds.d_in;
  nlohmann::json chars = nlohmann::json::array();
  for (const auto& s : ds.vocab.symbols()) chars.push_back(s);
  meta["vocab"] = chars;
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& s : ds.specs) {
    specs.push_back({{"lid", s.lid},
                     {"charset", s.charset},
                     {"sigma", s.sigma},
                     {"frames_min", s.frames_min},
                     {"frames_max", s.frames_max},
                     {"u_min", s.u_min},
                     {"u_max", s.u_max}});
  }
  meta["languages"] = specs;
  std::vector<NamedArray> arrays;
  for (size_t l = 0; l < ds.specs.size(); ++l) {
    const ToyLanguageSpec& s = ds.specs[l];
    const std::string p = strcat_msg("lang", l);
    arrays.push_back({p + ".prototypes",
                      static_cast<int>(s.charset.size()), s.d_in, s.prototypes});
    arrays.push_back({p + ".transform", s.d_in, s.d_in, s.transform});
    arrays.push_back({p + ".bias", 1, s.d_in, s.bias});
  }
  append_split(arrays, "train", ds.train, ds.d_in);
  append_split(arrays, "dev", ds.dev, ds.d_in);
  append_split(arrays, "test", ds.test, ds.d_in);
  write_array_file(path_stem, meta, arrays);
}

ToyDataset load_dataset(const std::string& path_stem) {
  ArrayFile f = read_array_file(path_stem);
  UA_CHECK(f.meta.value("kind", "") == "toy-dataset", path_stem,
           ": not a dataset dump");
  ToyDataset ds;
  ds.d_in = f.meta.at("d_in").get<int>();
  std::vector<std::string> symbols =
      f.meta.at("vocab").get<std::vector<std::string>>();
  UA_CHECK(symbols.size() >= 4, "dataset dump: malformed vocab");
  ds.vocab = Vocab(std::vector<std::string>(symbols.begin(), symbols.end() - 4));
  size_t lang_idx = 0;
  for (const auto& sj : f.meta.at("languages")) {
    ToyLanguageSpec s;
    s.lid = sj.at("lid").get<int>();
    s.charset = sj.at("charset").get<std::vector<std::string>>();
    for (const auto& c : s.charset) s.char_ids.push_back(ds.vocab.id_of(c));
    s.sigma = sj.at("sigma").get<double>();
    s.frames_min = sj.at("frames_min").get<int>();
    s.frames_max = sj.at("frames_max").get<int>();
    s.u_min = sj.at("u_min").get<int>();
    s.u_max = sj.at("u_max").get<int>();
    s.d_in = ds.d_in;
    const std::string p = strcat_msg("lang", lang_idx);
    const NamedArray* proto = f.find(p + ".prototypes");
    const NamedArray* tr = f.find(p + ".transform");
    const NamedArray* bias = f.find(p + ".bias");
    UA_CHECK(proto && tr && bias, "dataset dump: missing arrays for ", p);
    s.prototypes = proto->data;
    s.transform = tr->data;
    s.bias = bias->data;
    ds.specs.push_back(std::move(s));
    ++lang_idx;
  }
  ds.train = read_split(f, "train", ds.d_in);
  ds.dev = read_split(f, "dev", ds.d_in);
  ds.test = read_split(f, "test", ds.d_in);
  return ds;
}

}  // namespace uniadapt
