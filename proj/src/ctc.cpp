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

#include "uniadapt/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace uniadapt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Blank-augmented target: blank, y1, blank, y2, ..., blank.
int aug_label(const std::vector<int>& y, int blank, int s) {
  return (s % 2 == 0) ? blank : y[static_cast<size_t>(s) / 2];
}

struct CtcDp {
  double log_z = kNegInf;
  std::vector<double> alpha;  // T x S
  std::vector<double> beta;   // T x S, suffix mass excluding frame t emission
};

// Forward(/backward) DP over log-probs lp (T x V). `need_beta` controls the
// beta recursion (only needed for gradients).
CtcDp ctc_dp(const double* lp, int T, int V, const std::vector<int>& y,
             int blank, bool need_beta) {
  const int U = static_cast<int>(y.size());
  const int S = 2 * U + 1;
  CtcDp dp;
  dp.alpha.assign(static_cast<size_t>(T) * S, kNegInf);
  auto a = [&](int t, int s) -> double& {
    return dp.alpha[static_cast<size_t>(t) * S + s];
  };
  a(0, 0) = lp[blank];
  if (S > 1) a(0, 1) = lp[y[0]];
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      const int lab = aug_label(y, blank, s);
      double acc = a(t - 1, s);
      if (s >= 1) acc = log_add(acc, a(t - 1, s - 1));
      if (s >= 2 && lab != blank && lab != aug_label(y, blank, s - 2))
        acc = log_add(acc, a(t - 1, s - 2));
      if (acc != kNegInf) a(t, s) = acc + lp[static_cast<size_t>(t) * V + lab];
    }
  }
  dp.log_z = a(T - 1, S - 1);
  if (S > 1) dp.log_z = log_add(dp.log_z, a(T - 1, S - 2));
  if (!need_beta) return dp;

  dp.beta.assign(static_cast<size_t>(T) * S, kNegInf);
  auto b = [&](int t, int s) -> double& {
    return dp.beta[static_cast<size_t>(t) * S + s];
  };
  b(T - 1, S - 1) = 0.0;
  if (S > 1) b(T - 1, S - 2) = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      const int lab = aug_label(y, blank, s);
      double acc = b(t + 1, s) == kNegInf
                       ? kNegInf
                       : b(t + 1, s) + lp[static_cast<size_t>(t + 1) * V + lab];
      if (s + 1 < S) {
        const int lab1 = aug_label(y, blank, s + 1);
        if (b(t + 1, s + 1) != kNegInf)
          acc = log_add(acc, b(t + 1, s + 1) + lp[static_cast<size_t>(t + 1) * V + lab1]);
      }
      if (s + 2 < S) {
        const int lab2 = aug_label(y, blank, s + 2);
        if (lab2 != blank && lab2 != lab && b(t + 1, s + 2) != kNegInf)
          acc = log_add(acc, b(t + 1, s + 2) + lp[static_cast<size_t>(t + 1) * V + lab2]);
      }
      b(t, s) = acc;
    }
  }
  return dp;
}

void check_labels(const std::vector<int>& y, int V, int blank, int T) {
  UA_CHECK(blank >= 0 && blank < V, "ctc: blank index ", blank,
           " out of vocab range ", V);
  int min_T = static_cast<int>(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    UA_CHECK(y[i] >= 0 && y[i] < V, "ctc: label ", y[i], " out of vocab range ", V);
    UA_CHECK(y[i] != blank, "ctc: target contains the blank symbol");
    if (i > 0 && y[i] == y[i - 1]) ++min_T;  // repeats force a separating blank
  }
  UA_CHECK(T >= min_T && T >= 1, "ctc: infeasible input length T=", T,
           " for target of effective length ", min_T);
}

std::vector<double> log_softmax_all(const double* z, int T, int V) {
  std::vector<double> lp(static_cast<size_t>(T) * V);
  for (int t = 0; t < T; ++t) {
    const double* row = z + static_cast<size_t>(t) * V;
    double mx = row[0];
    for (int v = 1; v < V; ++v) mx = std::max(mx, row[v]);
    double sum = 0.0;
    for (int v = 0; v < V; ++v) sum += std::exp(row[v] - mx);
    const double lse = mx + std::log(sum);
    for (int v = 0; v < V; ++v) lp[static_cast<size_t>(t) * V + v] = row[v] - lse;
  }
  return lp;
}

}  // namespace

// ---- Vocab ------------------------------------------------------------------

Vocab::Vocab(std::vector<std::string> chars) {
  symbols_ = std::move(chars);
  symbols_.push_back("<unk>");
  symbols_.push_back("<pad>");
  symbols_.push_back("<blank>");
  symbols_.push_back("<mask>");
}

int Vocab::id_of(const std::string& symbol) const {
  for (size_t i = 0; i < symbols_.size(); ++i)
    if (symbols_[i] == symbol) return static_cast<int>(i);
  return -1;
}

std::string Vocab::render(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) out += symbol(id);
  return out;
}

// ---- loss ---------------------------------------------------------------------

Tensor ctc_loss(Tensor logits, const std::vector<int>& labels, int blank) {
  const int T = logits.rows(), V = logits.cols();
  check_labels(labels, V, blank, T);
  Tensor lp = log_softmax_rows(logits);
  Tape& t = *lp.tape();
  CtcDp dp = ctc_dp(lp.value().data(), T, V, labels, blank,
                    t.requires_grad(lp.id()));
  UA_CHECK(std::isfinite(dp.log_z), "ctc: no feasible alignment (T=", T, ")");
  const int ilp = lp.id();
  auto y = std::make_shared<std::vector<int>>(labels);
  auto cached = std::make_shared<CtcDp>(std::move(dp));
  Tensor inputs[] = {lp};
  return t.emit(1, 1, std::vector<double>{-cached->log_z}, inputs,
                [ilp, y, cached, T, V, blank](Tape& tp, int self) {
                  const double g = tp.grad_of(self)[0];
                  auto glp = tp.grad_of(ilp);
                  const int S = 2 * static_cast<int>(y->size()) + 1;
                  for (int tt = 0; tt < T; ++tt) {
                    for (int s = 0; s < S; ++s) {
                      const double as = cached->alpha[static_cast<size_t>(tt) * S + s];
                      const double bs = cached->beta[static_cast<size_t>(tt) * S + s];
                      if (as == kNegInf || bs == kNegInf) continue;
                      const int lab = aug_label(*y, blank, s);
                      // d(-logZ)/d lp[t,lab] = -P(path passes (t,s))
                      glp[static_cast<size_t>(tt) * V + lab] -=
                          g * std::exp(as + bs - cached->log_z);
                    }
                  }
                });
}

double ctc_loss_value(const std::vector<double>& logits, int T, int V,
                      const std::vector<int>& labels, int blank) {
  UA_CHECK(static_cast<int>(logits.size()) == T * V,
           "ctc: logits size mismatch");
  check_labels(labels, V, blank, T);
  std::vector<double> lp = log_softmax_all(logits.data(), T, V);
  CtcDp dp = ctc_dp(lp.data(), T, V, labels, blank, false);
  UA_CHECK(std::isfinite(dp.log_z), "ctc: no feasible alignment (T=", T, ")");
  return -dp.log_z;
}

// ---- decoding / metrics ----------------------------------------------------------

std::vector<int> greedy_decode(const std::vector<double>& logits, int T, int V,
                               int blank) {
  UA_CHECK(static_cast<int>(logits.size()) == T * V,
           "greedy_decode: logits size mismatch");
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < T; ++t) {
    const double* row = logits.data() + static_cast<size_t>(t) * V;
    int best = 0;
    for (int v = 1; v < V; ++v)
      if (row[v] > row[best]) best = v;
    if (best != blank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

std::vector<int> greedy_decode(Tensor logits, int blank) {
  auto v = logits.value();
  return greedy_decode(std::vector<double>(v.begin(), v.end()), logits.rows(),
                       logits.cols(), blank);
}

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double cer(const std::vector<int>& ref, const std::vector<int>& hyp) {
  UA_CHECK(!ref.empty(), "cer: empty reference");
  return static_cast<double>(levenshtein(ref, hyp)) /
         static_cast<double>(ref.size());
}

}  // namespace uniadapt
