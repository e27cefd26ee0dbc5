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

#include "uniadapt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace uniadapt {

namespace {

std::string shape_str(int r, int c) { return strcat_msg(r, "x", c); }

// C[m x n] (+)= A[m x k] . B[k x n]; accumulation order is ascending p, so
// repeated runs are bitwise identical.
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    const double* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[k x n] (+)= A[m x k]^T . B[m x n]
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(k) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    const double* brow = b + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      double* crow = c + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] (+)= A[m x k] . B[n x k]^T, via an explicit transpose of B so the
// inner loops stay unit-stride.
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n,
           bool accumulate) {
  std::vector<double> bt(static_cast<size_t>(k) * n);
  for (int j = 0; j < n; ++j)
    for (int p = 0; p < k; ++p)
      bt[static_cast<size_t>(p) * n + j] = b[static_cast<size_t>(j) * k + p];
  mm_nn(a, bt.data(), c, m, k, n, accumulate);
}

void check_same_shape(Tensor a, Tensor b, const char* op) {
  UA_CHECK(a.rows() == b.rows() && a.cols() == b.cols(), op,
           ": shape mismatch ", shape_str(a.rows(), a.cols()), " vs ",
           shape_str(b.rows(), b.cols()));
}

void axpy(std::span<double> out, std::span<const double> in, double s = 1.0) {
  for (size_t i = 0; i < out.size(); ++i) out[i] += s * in[i];
}

}  // namespace

// ---- Tensor accessors -------------------------------------------------------

int Tensor::rows() const { return tape_->rows_of(id_); }
int Tensor::cols() const { return tape_->cols_of(id_); }
std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(rows()) * cols();
}
std::span<const double> Tensor::value() const { return tape_->value_of(id_); }
std::span<const double> Tensor::grad() const { return tape_->grad_of(id_); }
double Tensor::at(int i, int j) const {
  return value()[static_cast<size_t>(i) * cols() + j];
}
double Tensor::item() const {
  UA_CHECK(rows() == 1 && cols() == 1, "item() requires a 1x1 tensor, got ",
           shape_str(rows(), cols()));
  return value()[0];
}

// ---- Tape -------------------------------------------------------------------

Tape::Node& Tape::node(int id) { return nodes_[static_cast<size_t>(id)]; }
const Tape::Node& Tape::node(int id) const {
  return nodes_[static_cast<size_t>(id)];
}

std::span<const double> Tape::value_of(int id) const { return node(id).value; }
std::span<double> Tape::grad_of(int id) {
  Node& n = node(id);
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}
bool Tape::requires_grad(int id) const { return node(id).requires_grad; }
int Tape::rows_of(int id) const { return node(id).rows; }
int Tape::cols_of(int id) const { return node(id).cols; }

Tensor Tape::leaf(Param& p) {
  Node n;
  n.rows = p.rows;
  n.cols = p.cols;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = grad_enabled_ && p.trainable;
  if (n.requires_grad) {
    Param* param = &p;
    n.backward = [param](Tape& t, int self) {
      auto g = t.grad_of(self);
      for (size_t i = 0; i < g.size(); ++i) param->grad[i] += g[i];
    };
  }
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::input(int rows, int cols, std::vector<double> data) {
  UA_CHECK(static_cast<std::int64_t>(data.size()) ==
               static_cast<std::int64_t>(rows) * cols,
           "input size ", data.size(), " does not match shape ",
           shape_str(rows, cols));
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(data);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::input(int rows, int cols, std::span<const double> data) {
  return input(rows, cols, std::vector<double>(data.begin(), data.end()));
}

Tensor Tape::full(int rows, int cols, double fill) {
  return input(rows, cols,
               std::vector<double>(static_cast<size_t>(rows) * cols, fill));
}

Tensor Tape::emit(int rows, int cols, std::vector<double> value,
                  std::span<const Tensor> inputs, BackwardFn bw) {
  UA_CHECK(static_cast<std::int64_t>(value.size()) ==
               static_cast<std::int64_t>(rows) * cols,
           "emit size mismatch for shape ", shape_str(rows, cols));
  bool rg = false;
  for (const Tensor& t : inputs) {
    UA_CHECK(t.tape() == this, "op inputs must live on the same tape");
    rg = rg || node(t.id()).requires_grad;
  }
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && rg;
  if (n.requires_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Tensor loss) {
  UA_CHECK(loss.tape() == this, "loss lives on a different tape");
  UA_CHECK(grad_enabled_, "backward on a grad-disabled tape");
  UA_CHECK(!nodes_.empty(), "backward on an empty tape");
  UA_CHECK(loss.rows() == 1 && loss.cols() == 1,
           "backward requires a scalar loss, got ",
           shape_str(loss.rows(), loss.cols()));
  grad_of(loss.id())[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = node(id);
    if (n.requires_grad && n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

void Tape::clear() { nodes_.clear(); }

// ---- elementwise ops --------------------------------------------------------

Tensor add(Tensor a, Tensor b) {
  check_same_shape(a, b, "add");
  Tape& t = *a.tape();
  auto av = a.value();
  auto bv = b.value();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const int ia = a.id(), ib = b.id();
  Tensor inputs[] = {a, b};
  return t.emit(a.rows(), a.cols(), std::move(out), inputs,
                [ia, ib](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  if (tp.requires_grad(ia)) axpy(tp.grad_of(ia), g);
                  if (tp.requires_grad(ib)) axpy(tp.grad_of(ib), g);
                });
}

Tensor sub(Tensor a, Tensor b) {
  check_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  auto av = a.value();
  auto bv = b.value();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const int ia = a.id(), ib = b.id();
  Tensor inputs[] = {a, b};
  return t.emit(a.rows(), a.cols(), std::move(out), inputs,
                [ia, ib](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  if (tp.requires_grad(ia)) axpy(tp.grad_of(ia), g);
                  if (tp.requires_grad(ib)) axpy(tp.grad_of(ib), g, -1.0);
                });
}

Tensor mul(Tensor a, Tensor b) {
  check_same_shape(a, b, "mul");
  Tape& t = *a.tape();
  auto av = a.value();
  auto bv = b.value();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  Tensor inputs[] = {a, b};
  return t.emit(a.rows(), a.cols(), std::move(out), inputs,
                [ia, ib](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  if (tp.requires_grad(ia)) {
                    auto ga = tp.grad_of(ia);
                    auto vb = tp.value_of(ib);
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
                  }
                  if (tp.requires_grad(ib)) {
                    auto gb = tp.grad_of(ib);
                    auto va = tp.value_of(ia);
                    for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
                  }
                });
}

Tensor affine(Tensor a, double scale, double shift) {
  Tape& t = *a.tape();
  auto av = a.value();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = scale * av[i] + shift;
  const int ia = a.id();
  Tensor inputs[] = {a};
  return t.emit(a.rows(), a.cols(), std::move(out), inputs,
                [ia, scale](Tape& tp, int self) {
                  axpy(tp.grad_of(ia), tp.grad_of(self), scale);
                });
}

Tensor add_row(Tensor a, Tensor row) {
  UA_CHECK(row.rows() == 1 && row.cols() == a.cols(),
           "add_row: shape mismatch ", shape_str(a.rows(), a.cols()), " vs ",
           shape_str(row.rows(), row.cols()));
  Tape& t = *a.tape();
  auto av = a.value();
  auto rv = row.value();
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(av.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(i) * c + j] = av[static_cast<size_t>(i) * c + j] + rv[j];
  const int ia = a.id(), ir = row.id();
  Tensor inputs[] = {a, row};
  return t.emit(r, c, std::move(out), inputs, [ia, ir, r, c](Tape& tp, int self) {
    auto g = tp.grad_of(self);
    if (tp.requires_grad(ia)) axpy(tp.grad_of(ia), g);
    if (tp.requires_grad(ir)) {
      auto gr = tp.grad_of(ir);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gr[j] += g[static_cast<size_t>(i) * c + j];
    }
  });
}

// ---- matmul -----------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b) {
  UA_CHECK(a.cols() == b.rows(), "matmul: inner dims disagree ",
           shape_str(a.rows(), a.cols()), " . ", shape_str(b.rows(), b.cols()));
  Tape& t = *a.tape();
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<size_t>(m) * n);
  mm_nn(a.value().data(), b.value().data(), out.data(), m, k, n, false);
  const int ia = a.id(), ib = b.id();
  Tensor inputs[] = {a, b};
  return t.emit(m, n, std::move(out), inputs, [ia, ib, m, k, n](Tape& tp, int self) {
    auto g = tp.grad_of(self);
    if (tp.requires_grad(ia))  // dA += dC . B^T
      mm_nt(g.data(), tp.value_of(ib).data(), tp.grad_of(ia).data(), m, n, k, true);
    if (tp.requires_grad(ib))  // dB += A^T . dC
      mm_tn(tp.value_of(ia).data(), g.data(), tp.grad_of(ib).data(), m, k, n, true);
  });
}

Tensor matmul_nt(Tensor a, Tensor b) {
  UA_CHECK(a.cols() == b.cols(), "matmul_nt: inner dims disagree ",
           shape_str(a.rows(), a.cols()), " . ", shape_str(b.rows(), b.cols()),
           "^T");
  Tape& t = *a.tape();
  const int m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(static_cast<size_t>(m) * n);
  mm_nt(a.value().data(), b.value().data(), out.data(), m, k, n, false);
  const int ia = a.id(), ib = b.id();
  Tensor inputs[] = {a, b};
  return t.emit(m, n, std::move(out), inputs, [ia, ib, m, k, n](Tape& tp, int self) {
    auto g = tp.grad_of(self);
    if (tp.requires_grad(ia))  // dA += dC . B
      mm_nn(g.data(), tp.value_of(ib).data(), tp.grad_of(ia).data(), m, n, k, true);
    if (tp.requires_grad(ib))  // dB += dC^T . A
      mm_tn(g.data(), tp.value_of(ia).data(), tp.grad_of(ib).data(), m, n, k, true);
  });
}

// ---- nonlinearities ----------------------------------------------------------

Tensor relu(Tensor a) {
  Tape& t = *a.tape();
  auto av = a.value();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  const int ia = a.id();
  Tensor inputs[] = {a};
  return t.emit(a.rows(), a.cols(), std::move(out), inputs,
                [ia](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  auto ga = tp.grad_of(ia);
                  auto va = tp.value_of(ia);
                  for (size_t i = 0; i < g.size(); ++i)
                    if (va[i] > 0.0) ga[i] += g[i];
                });
}

Tensor tanh_op(Tensor a) {
  Tape& t = *a.tape();
  auto av = a.value();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  const int ia = a.id();
  Tensor inputs[] = {a};
  return t.emit(a.rows(), a.cols(), std::move(out), inputs,
                [ia](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  auto y = tp.value_of(self);
                  auto ga = tp.grad_of(ia);
                  for (size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * (1.0 - y[i] * y[i]);
                });
}

// ---- softmax family -----------------------------------------------------------

Tensor softmax_rows(Tensor a, int valid_cols) {
  Tape& t = *a.tape();
  const int r = a.rows(), c = a.cols();
  const int v = valid_cols < 0 ? c : valid_cols;
  UA_CHECK(v >= 1 && v <= c, "softmax_rows: valid_cols ", valid_cols,
           " out of range for ", shape_str(r, c));
  auto av = a.value();
  std::vector<double> out(av.size(), 0.0);
  for (int i = 0; i < r; ++i) {
    const double* x = av.data() + static_cast<size_t>(i) * c;
    double* y = out.data() + static_cast<size_t>(i) * c;
    double mx = x[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < v; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (int j = 0; j < v; ++j) y[j] /= sum;
  }
  const int ia = a.id();
  Tensor inputs[] = {a};
  return t.emit(r, c, std::move(out), inputs, [ia, r, c, v](Tape& tp, int self) {
    auto g = tp.grad_of(self);
    auto y = tp.value_of(self);
    auto ga = tp.grad_of(ia);
    for (int i = 0; i < r; ++i) {
      const double* gr = g.data() + static_cast<size_t>(i) * c;
      const double* yr = y.data() + static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < v; ++j) dot += gr[j] * yr[j];
      double* gar = ga.data() + static_cast<size_t>(i) * c;
      for (int j = 0; j < v; ++j) gar[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Tensor log_softmax_rows(Tensor a) {
  Tape& t = *a.tape();
  const int r = a.rows(), c = a.cols();
  auto av = a.value();
  std::vector<double> out(av.size());
  for (int i = 0; i < r; ++i) {
    const double* x = av.data() + static_cast<size_t>(i) * c;
    double* y = out.data() + static_cast<size_t>(i) * c;
    double mx = x[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(x[j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < c; ++j) y[j] = x[j] - lse;
  }
  const int ia = a.id();
  Tensor inputs[] = {a};
  return t.emit(r, c, std::move(out), inputs, [ia, r, c](Tape& tp, int self) {
    auto g = tp.grad_of(self);
    auto y = tp.value_of(self);
    auto ga = tp.grad_of(ia);
    for (int i = 0; i < r; ++i) {
      const double* gr = g.data() + static_cast<size_t>(i) * c;
      const double* yr = y.data() + static_cast<size_t>(i) * c;
      double gsum = 0.0;
      for (int j = 0; j < c; ++j) gsum += gr[j];
      double* gar = ga.data() + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; ++j) gar[j] += gr[j] - std::exp(yr[j]) * gsum;
    }
  });
}

// ---- layer norm ----------------------------------------------------------------

Tensor layernorm_rows(Tensor x, Tensor gain, Tensor bias, double eps) {
  const int r = x.rows(), c = x.cols();
  UA_CHECK(gain.rows() == 1 && gain.cols() == c && bias.rows() == 1 &&
               bias.cols() == c,
           "layernorm_rows: gain/bias must be 1x", c);
  Tape& t = *x.tape();
  auto xv = x.value();
  auto gv = gain.value();
  auto bv = bias.value();
  std::vector<double> out(xv.size());
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_sd = std::make_shared<std::vector<double>>(r);
  for (int i = 0; i < r; ++i) {
    const double* xr = xv.data() + static_cast<size_t>(i) * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += xr[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= c;
    const double isd = 1.0 / std::sqrt(var + eps);
    (*inv_sd)[i] = isd;
    double* xh = xhat->data() + static_cast<size_t>(i) * c;
    double* y = out.data() + static_cast<size_t>(i) * c;
    for (int j = 0; j < c; ++j) {
      xh[j] = (xr[j] - mean) * isd;
      y[j] = xh[j] * gv[j] + bv[j];
    }
  }
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  Tensor inputs[] = {x, gain, bias};
  return t.emit(r, c, std::move(out), inputs,
                [ix, ig, ib, r, c, xhat, inv_sd](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  auto gv = tp.value_of(ig);
                  for (int i = 0; i < r; ++i) {
                    const double* gr = g.data() + static_cast<size_t>(i) * c;
                    const double* xh = xhat->data() + static_cast<size_t>(i) * c;
                    if (tp.requires_grad(ig)) {
                      auto gg = tp.grad_of(ig);
                      for (int j = 0; j < c; ++j) gg[j] += gr[j] * xh[j];
                    }
                    if (tp.requires_grad(ib)) {
                      auto gb = tp.grad_of(ib);
                      for (int j = 0; j < c; ++j) gb[j] += gr[j];
                    }
                    if (tp.requires_grad(ix)) {
                      auto gx = tp.grad_of(ix);
                      double* gxr = gx.data() + static_cast<size_t>(i) * c;
                      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                      for (int j = 0; j < c; ++j) {
                        const double dxh = gr[j] * gv[j];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[j];
                      }
                      mean_dxh /= c;
                      mean_dxh_xh /= c;
                      const double isd = (*inv_sd)[i];
                      for (int j = 0; j < c; ++j) {
                        const double dxh = gr[j] * gv[j];
                        gxr[j] += isd * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                      }
                    }
                  }
                });
}

// ---- structural ops -------------------------------------------------------------

Tensor slice_cols(Tensor a, int start, int width) {
  const int r = a.rows(), c = a.cols();
  UA_CHECK(start >= 0 && width >= 1 && start + width <= c,
           "slice_cols: [", start, ", ", start + width, ") out of range for ",
           shape_str(r, c));
  Tape& t = *a.tape();
  auto av = a.value();
  std::vector<double> out(static_cast<size_t>(r) * width);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < width; ++j)
      out[static_cast<size_t>(i) * width + j] =
          av[static_cast<size_t>(i) * c + start + j];
  const int ia = a.id();
  Tensor inputs[] = {a};
  return t.emit(r, width, std::move(out), inputs,
                [ia, r, c, start, width](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  auto ga = tp.grad_of(ia);
                  for (int i = 0; i < r; ++i)
                    for (int j = 0; j < width; ++j)
                      ga[static_cast<size_t>(i) * c + start + j] +=
                          g[static_cast<size_t>(i) * width + j];
                });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  UA_CHECK(!parts.empty(), "concat_cols: empty input list");
  const int r = parts[0].rows();
  int total = 0;
  for (const Tensor& p : parts) {
    UA_CHECK(p.rows() == r, "concat_cols: row mismatch");
    total += p.cols();
  }
  Tape& t = *parts[0].tape();
  std::vector<double> out(static_cast<size_t>(r) * total);
  std::vector<int> ids, widths, offsets;
  int off = 0;
  for (const Tensor& p : parts) {
    const int w = p.cols();
    auto pv = p.value();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < w; ++j)
        out[static_cast<size_t>(i) * total + off + j] =
            pv[static_cast<size_t>(i) * w + j];
    ids.push_back(p.id());
    widths.push_back(w);
    offsets.push_back(off);
    off += w;
  }
  return t.emit(r, total, std::move(out), parts,
                [ids, widths, offsets, r, total](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  for (size_t k = 0; k < ids.size(); ++k) {
                    if (!tp.requires_grad(ids[k])) continue;
                    auto gp = tp.grad_of(ids[k]);
                    const int w = widths[k], o = offsets[k];
                    for (int i = 0; i < r; ++i)
                      for (int j = 0; j < w; ++j)
                        gp[static_cast<size_t>(i) * w + j] +=
                            g[static_cast<size_t>(i) * total + o + j];
                  }
                });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  UA_CHECK(!parts.empty(), "concat_rows: empty input list");
  const int c = parts[0].cols();
  int total = 0;
  for (const Tensor& p : parts) {
    UA_CHECK(p.cols() == c, "concat_rows: column mismatch");
    total += p.rows();
  }
  Tape& t = *parts[0].tape();
  std::vector<double> out;
  out.reserve(static_cast<size_t>(total) * c);
  std::vector<int> ids, heights, offsets;
  int off = 0;
  for (const Tensor& p : parts) {
    auto pv = p.value();
    out.insert(out.end(), pv.begin(), pv.end());
    ids.push_back(p.id());
    heights.push_back(p.rows());
    offsets.push_back(off);
    off += p.rows();
  }
  return t.emit(total, c, std::move(out), parts,
                [ids, heights, offsets, c](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  for (size_t k = 0; k < ids.size(); ++k) {
                    if (!tp.requires_grad(ids[k])) continue;
                    auto gp = tp.grad_of(ids[k]);
                    const size_t n = static_cast<size_t>(heights[k]) * c;
                    const size_t base = static_cast<size_t>(offsets[k]) * c;
                    for (size_t i = 0; i < n; ++i) gp[i] += g[base + i];
                  }
                });
}

Tensor gather_row(Tensor table, int row_index) {
  const int r = table.rows(), c = table.cols();
  UA_CHECK(row_index >= 0 && row_index < r, "gather_row: index ", row_index,
           " out of range for ", shape_str(r, c));
  Tape& t = *table.tape();
  auto tv = table.value();
  std::vector<double> out(tv.begin() + static_cast<size_t>(row_index) * c,
                          tv.begin() + static_cast<size_t>(row_index + 1) * c);
  const int it = table.id();
  Tensor inputs[] = {table};
  return t.emit(1, c, std::move(out), inputs,
                [it, row_index, c](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  auto gt = tp.grad_of(it);
                  for (int j = 0; j < c; ++j)
                    gt[static_cast<size_t>(row_index) * c + j] += g[j];
                });
}

Tensor broadcast_row(Tensor row, int n_rows) {
  UA_CHECK(row.rows() == 1, "broadcast_row: expected 1xN input, got ",
           shape_str(row.rows(), row.cols()));
  UA_CHECK(n_rows >= 1, "broadcast_row: n_rows must be positive");
  Tape& t = *row.tape();
  const int c = row.cols();
  auto rv = row.value();
  std::vector<double> out(static_cast<size_t>(n_rows) * c);
  for (int i = 0; i < n_rows; ++i)
    std::copy(rv.begin(), rv.end(), out.begin() + static_cast<size_t>(i) * c);
  const int ir = row.id();
  Tensor inputs[] = {row};
  return t.emit(n_rows, c, std::move(out), inputs,
                [ir, n_rows, c](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  auto gr = tp.grad_of(ir);
                  for (int i = 0; i < n_rows; ++i)
                    for (int j = 0; j < c; ++j)
                      gr[j] += g[static_cast<size_t>(i) * c + j];
                });
}

Tensor mul_col(Tensor a, Tensor col) {
  const int r = a.rows(), c = a.cols();
  UA_CHECK(col.rows() == r && col.cols() == 1, "mul_col: expected ", r,
           "x1 column, got ", shape_str(col.rows(), col.cols()));
  Tape& t = *a.tape();
  auto av = a.value();
  auto cv = col.value();
  std::vector<double> out(av.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(i) * c + j] = av[static_cast<size_t>(i) * c + j] * cv[i];
  const int ia = a.id(), ic = col.id();
  Tensor inputs[] = {a, col};
  return t.emit(r, c, std::move(out), inputs, [ia, ic, r, c](Tape& tp, int self) {
    auto g = tp.grad_of(self);
    if (tp.requires_grad(ia)) {
      auto ga = tp.grad_of(ia);
      auto cv2 = tp.value_of(ic);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          ga[static_cast<size_t>(i) * c + j] += g[static_cast<size_t>(i) * c + j] * cv2[i];
    }
    if (tp.requires_grad(ic)) {
      auto gc = tp.grad_of(ic);
      auto av2 = tp.value_of(ia);
      for (int i = 0; i < r; ++i) {
        double dot = 0.0;
        for (int j = 0; j < c; ++j)
          dot += g[static_cast<size_t>(i) * c + j] * av2[static_cast<size_t>(i) * c + j];
        gc[i] += dot;
      }
    }
  });
}

Tensor mse(Tensor a, Tensor b) {
  check_same_shape(a, b, "mse");
  Tape& t = *a.tape();
  auto av = a.value();
  auto bv = b.value();
  const double n = static_cast<double>(av.size());
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  const int ia = a.id(), ib = b.id();
  Tensor inputs[] = {a, b};
  return t.emit(1, 1, {acc / n}, inputs, [ia, ib, n](Tape& tp, int self) {
    const double g = tp.grad_of(self)[0] * 2.0 / n;
    auto av2 = tp.value_of(ia);
    auto bv2 = tp.value_of(ib);
    if (tp.requires_grad(ia)) {
      auto ga = tp.grad_of(ia);
      for (size_t i = 0; i < av2.size(); ++i) ga[i] += g * (av2[i] - bv2[i]);
    }
    if (tp.requires_grad(ib)) {
      auto gb = tp.grad_of(ib);
      for (size_t i = 0; i < av2.size(); ++i) gb[i] -= g * (av2[i] - bv2[i]);
    }
  });
}

Tensor detach(Tensor a) {
  return a.tape()->input(a.rows(), a.cols(), a.value());
}

Tensor dropout(Tensor a, double rate, Rng& rng) {
  UA_CHECK(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1), got ", rate);
  if (rate == 0.0) return a;
  Tape& t = *a.tape();
  auto av = a.value();
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(av.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) {
    (*mask)[i] = u(rng) < keep ? 1.0 / keep : 0.0;
    out[i] = av[i] * (*mask)[i];
  }
  const int ia = a.id();
  Tensor inputs[] = {a};
  return t.emit(a.rows(), a.cols(), std::move(out), inputs,
                [ia, mask](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  auto ga = tp.grad_of(ia);
                  for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*mask)[i];
                });
}

Tensor gamma_rows(Tensor prefix_logits, Tensor content_logits, int valid_c) {
  const int r = prefix_logits.rows();
  UA_CHECK(content_logits.rows() == r, "gamma_rows: row mismatch ",
           shape_str(r, prefix_logits.cols()), " vs ",
           shape_str(content_logits.rows(), content_logits.cols()));
  const int lp = prefix_logits.cols(), tc = content_logits.cols();
  const int vc = valid_c < 0 ? tc : valid_c;
  UA_CHECK(lp >= 1, "gamma_rows: need at least one prefix column");
  UA_CHECK(vc >= 1 && vc <= tc, "gamma_rows: invalid content length ", valid_c);
  Tape& t = *prefix_logits.tape();
  auto pv = prefix_logits.value();
  auto cv = content_logits.value();
  std::vector<double> out(r);
  auto wp = std::make_shared<std::vector<double>>(static_cast<size_t>(r) * lp);
  auto wc = std::make_shared<std::vector<double>>(static_cast<size_t>(r) * tc, 0.0);
  for (int i = 0; i < r; ++i) {
    const double* pr = pv.data() + static_cast<size_t>(i) * lp;
    const double* cr = cv.data() + static_cast<size_t>(i) * tc;
    double mx = pr[0];
    for (int j = 1; j < lp; ++j) mx = std::max(mx, pr[j]);
    for (int j = 0; j < vc; ++j) mx = std::max(mx, cr[j]);
    double sp = 0.0, sc = 0.0;
    for (int j = 0; j < lp; ++j) sp += std::exp(pr[j] - mx);
    for (int j = 0; j < vc; ++j) sc += std::exp(cr[j] - mx);
    const double gamma = sp / (sp + sc);
    out[i] = gamma;
    // cache normalized within-group weights for the backward pass
    for (int j = 0; j < lp; ++j)
      (*wp)[static_cast<size_t>(i) * lp + j] = std::exp(pr[j] - mx) / sp;
    for (int j = 0; j < vc; ++j)
      (*wc)[static_cast<size_t>(i) * tc + j] = std::exp(cr[j] - mx) / sc;
  }
  const int ip = prefix_logits.id(), ic = content_logits.id();
  Tensor inputs[] = {prefix_logits, content_logits};
  return t.emit(r, 1, std::move(out), inputs,
                [ip, ic, r, lp, tc, vc, wp, wc](Tape& tp, int self) {
                  auto g = tp.grad_of(self);
                  auto y = tp.value_of(self);
                  for (int i = 0; i < r; ++i) {
                    const double d = g[i] * y[i] * (1.0 - y[i]);
                    if (tp.requires_grad(ip)) {
                      auto gp = tp.grad_of(ip);
                      for (int j = 0; j < lp; ++j)
                        gp[static_cast<size_t>(i) * lp + j] +=
                            d * (*wp)[static_cast<size_t>(i) * lp + j];
                    }
                    if (tp.requires_grad(ic)) {
                      auto gc = tp.grad_of(ic);
                      for (int j = 0; j < vc; ++j)
                        gc[static_cast<size_t>(i) * tc + j] -=
                            d * (*wc)[static_cast<size_t>(i) * tc + j];
                    }
                  }
                });
}

Tensor mean_of(std::span<const Tensor> scalars) {
  UA_CHECK(!scalars.empty(), "mean_of: empty input list");
  Tensor acc = scalars[0];
  for (size_t i = 1; i < scalars.size(); ++i) acc = add(acc, scalars[i]);
  return affine(acc, 1.0 / static_cast<double>(scalars.size()));
}

}  // namespace uniadapt
