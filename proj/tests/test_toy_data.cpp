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

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "test_util.hpp"
#include "uniadapt/toy_data.hpp"

using namespace uniadapt;
using namespace uniadapt::testutil;

TEST_SUITE_BEGIN("toy_data");

namespace {

ToyLanguageSpec tiny_spec(Rng& rng, int d_in = 6, double sigma = 0.0) {
  ToyLanguageSpec s;
  s.lid = 0;
  s.charset = {"a", "b", "c"};
  s.char_ids = {0, 1, 2};
  s.d_in = d_in;
  s.sigma = sigma;
  s.prototypes = random_vec(rng, static_cast<size_t>(3) * d_in);
  s.transform = random_orthogonal(d_in, rng);
  s.bias = random_vec(rng, static_cast<size_t>(d_in), 0.3);
  return s;
}

}  // namespace

TEST_CASE("random_orthogonal produces an orthogonal matrix") {
  Rng rng(90);
  const int n = 8;
  auto q = random_orthogonal(n, rng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int k = 0; k < n; ++k)
        dot += q[static_cast<size_t>(i) * n + k] * q[static_cast<size_t>(j) * n + k];
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
}

TEST_CASE("noiseless repetition: frames within a symbol are identical") {
  Rng rng(91);
  ToyLanguageSpec s = tiny_spec(rng);
  s.u_min = s.u_max = 1;
  s.frames_min = s.frames_max = 3;
  auto utts = gen_language(s, 4, 123);
  for (const Utterance& u : utts) {
    CHECK(u.length == 3);
    CHECK(u.labels.size() == 1);
    for (int f = 1; f < 3; ++f)
      for (int j = 0; j < s.d_in; ++j)
        CHECK(u.feats[static_cast<size_t>(f) * s.d_in + j] ==
              u.feats[static_cast<size_t>(j)]);
  }
}

TEST_CASE("same seed reproduces the dataset") {
  Rng rng(92);
  ToyLanguageSpec s = tiny_spec(rng, 6, 0.2);
  auto a = gen_language(s, 10, 7);
  auto b = gen_language(s, 10, 7);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].labels == b[i].labels);
    CHECK(bitwise_equal(a[i].feats, b[i].feats));
  }
  auto c = gen_language(s, 10, 8);
  bool any_diff = false;
  for (size_t i = 0; i < a.size() && !any_diff; ++i)
    any_diff = a[i].labels != c[i].labels || !bitwise_equal(a[i].feats, c[i].feats);
  CHECK(any_diff);
}

TEST_CASE("infeasible frames-per-symbol range is a config error") {
  Rng rng(93);
  ToyLanguageSpec s = tiny_spec(rng);
  s.frames_min = 2;
  s.frames_max = 4;
  s.u_min = 1;
  CHECK_THROWS_AS(gen_language(s, 1, 1), Error);
}

TEST_CASE("inverse transform + nearest prototype classifies perfectly at sigma 0") {
  DataConfig cfg;
  cfg.train_utts = {40, 40, 40};
  cfg.dev_utts = 5;
  cfg.test_utts = 5;
  cfg.sigma = 0.0;
  ToyDataset ds = build_toy_dataset(cfg);
  const int d = ds.d_in;
  int frames_checked = 0;
  for (const Utterance& u : ds.train) {
    const ToyLanguageSpec& spec = ds.specs[static_cast<size_t>(u.lid)];
    // reconstruct per-frame symbols by expanding labels is not possible from
    // the utterance alone (frame counts vary), so classify frame-wise and
    // check the collapsed sequence instead.
    std::vector<int> frame_syms;
    for (int f = 0; f < u.length; ++f) {
      std::vector<double> undone(static_cast<size_t>(d));
      for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j)
          acc += spec.transform[static_cast<size_t>(j) * d + i] *
                 (u.feats[static_cast<size_t>(f) * d + j] - spec.bias[static_cast<size_t>(j)]);
        undone[static_cast<size_t>(i)] = acc;
      }
      int best = -1;
      double best_d = 1e300;
      for (size_t c = 0; c < spec.charset.size(); ++c) {
        double dist = 0.0;
        for (int i = 0; i < d; ++i) {
          const double diff = undone[static_cast<size_t>(i)] -
                              spec.prototypes[c * static_cast<size_t>(d) + i];
          dist += diff * diff;
        }
        if (dist < best_d) {
          best_d = dist;
          best = static_cast<int>(c);
        }
      }
      CHECK(best_d < 1e-12);
      frame_syms.push_back(spec.char_ids[static_cast<size_t>(best)]);
      ++frames_checked;
    }
    // collapse consecutive duplicates; must equal the labels up to repeats
    std::vector<int> collapsed;
    for (int sym : frame_syms)
      if (collapsed.empty() || collapsed.back() != sym) collapsed.push_back(sym);
    // adjacent repeated labels merge in this collapse; verify subsequence-wise
    size_t li = 0;
    for (int sym : collapsed) {
      bool matched = false;
      while (li < u.labels.size()) {
        if (u.labels[li] == sym) {
          matched = true;
          ++li;
          break;
        }
        ++li;
      }
      CHECK(matched);
    }
  }
  CHECK(frames_checked > 100);
}

TEST_CASE("build_vocab: disjoint charsets count and dedup") {
  std::vector<std::vector<std::string>> three = {
      {"a", "b", "c", "d", "e"}, {"f", "g", "h", "i", "j"},
      {"k", "l", "m", "n", "o"}};
  Vocab v = build_vocab(three);
  CHECK(v.size() == 19);  // 15 chars + 4 specials

  Vocab dedup = build_vocab({{"a", "b"}, {"b", "c"}});
  CHECK(dedup.size() == 3 + 4);
  CHECK(dedup.id_of("b") == 1);

  Vocab again = build_vocab(three);
  CHECK(again.symbols() == v.symbols());
}

TEST_CASE("split: ratios partition the set per language, seeded") {
  Rng rng(94);
  ToyLanguageSpec s0 = tiny_spec(rng);
  ToyLanguageSpec s1 = tiny_spec(rng);
  s1.lid = 1;
  auto utts = gen_language(s0, 100, 1);
  auto more = gen_language(s1, 50, 2);
  utts.insert(utts.end(), more.begin(), more.end());

  SplitResult r = split(utts, {0.9, 0.1, 0.0}, 42);
  CHECK(r.train.size() == 135);  // 90 + 45
  CHECK(r.dev.size() == 15);
  CHECK(r.test.empty());
  CHECK(r.train.size() + r.dev.size() + r.test.size() == utts.size());

  SplitResult r2 = split(utts, {0.9, 0.1, 0.0}, 42);
  CHECK(r2.train.size() == r.train.size());
  for (size_t i = 0; i < r.train.size(); ++i)
    CHECK(bitwise_equal(r.train[i].feats, r2.train[i].feats));

  CHECK_THROWS_AS(split(utts, {0.5, 0.2, 0.2}, 1), Error);
}

TEST_CASE("default dataset: feasibility, imbalance, per-utterance lids") {
  DataConfig cfg;
  cfg.train_utts = {60, 60, 30};
  cfg.dev_utts = 10;
  cfg.test_utts = 10;
  ToyDataset ds = build_toy_dataset(cfg);
  std::vector<int> counts(3, 0);
  for (const Utterance& u : ds.train) {
    CHECK(u.length >= 2 * static_cast<int>(u.labels.size()) + 1);
    ++counts[static_cast<size_t>(u.lid)];
  }
  CHECK(counts == std::vector<int>{60, 60, 30});
  CHECK(ds.dev.size() == 30);
  CHECK(ds.test.size() == 30);

  Batch b = make_batch(std::span<const Utterance>(ds.train.data(), 8),
                       ds.vocab.pad());
  CHECK(b.size == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(b.lids[static_cast<size_t>(i)] == ds.train[static_cast<size_t>(i)].lid);
    CHECK(b.lengths[static_cast<size_t>(i)] == ds.train[static_cast<size_t>(i)].length);
    CHECK(b.utterance_labels(i) == ds.train[static_cast<size_t>(i)].labels);
    CHECK(bitwise_equal(b.utterance_feats(i), ds.train[static_cast<size_t>(i)].feats));
  }
  // padding beyond the true length is zero
  if (b.lengths[0] < b.t_max)
    CHECK(b.feats[static_cast<size_t>(b.lengths[0]) * b.d_in] == 0.0);
}

TEST_CASE("twin characters collide exactly; non-twins do not") {
  DataConfig cfg;
  cfg.train_utts = {10, 10, 10};
  cfg.dev_utts = 2;
  cfg.test_utts = 2;
  cfg.sigma = 0.0;
  cfg.twin_chars = 2;
  cfg.twin_source = 0;
  ToyDataset ds = build_toy_dataset(cfg);
  const int d = ds.d_in;
  auto render = [&](const ToyLanguageSpec& s, int c) {
    std::vector<double> out(static_cast<size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
      double acc = s.bias[static_cast<size_t>(i)];
      for (int j = 0; j < d; ++j)
        acc += s.transform[static_cast<size_t>(i) * d + j] *
               s.prototypes[static_cast<size_t>(c) * d + j];
      out[static_cast<size_t>(i)] = acc;
    }
    return out;
  };
  const ToyLanguageSpec& src = ds.specs[0];
  const ToyLanguageSpec& twin = ds.specs[2];
  for (int c = 0; c < 2; ++c)
    CHECK(max_abs_diff(render(src, c), render(twin, c)) < 1e-12);
  for (int c = 2; c < 5; ++c)
    CHECK(max_abs_diff(render(src, c), render(twin, c)) > 1e-3);
  // labels stay distinct even where acoustics collide
  CHECK(src.char_ids[0] != twin.char_ids[0]);
}

TEST_CASE("dataset dump round trip is stable") {
  DataConfig cfg;
  cfg.train_utts = {5, 5, 5};
  cfg.dev_utts = 2;
  cfg.test_utts = 2;
  ToyDataset ds = build_toy_dataset(cfg);
  const std::string stem = "/tmp/uniadapt_test_dataset";
  save_dataset(ds, stem);
  ToyDataset loaded = load_dataset(stem);
  CHECK(loaded.train.size() == ds.train.size());
  CHECK(loaded.vocab.symbols() == ds.vocab.symbols());
  CHECK(loaded.train[0].labels == ds.train[0].labels);
  // second dump of the loaded dataset is byte-identical
  save_dataset(loaded, stem + "_2");
  auto bytes = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  };
  CHECK(bytes(stem + ".bin") == bytes(stem + "_2.bin"));
}

TEST_SUITE_END();
