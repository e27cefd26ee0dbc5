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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uniadapt/common.hpp"

namespace uniadapt {

// A named trainable (or frozen) array. Parameters live outside the tape and
// persist across steps; leaf nodes accumulate into `grad` during backward.
struct Param {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string name_, int rows_, int cols_, bool trainable_ = true)
      : name(std::move(name_)),
        rows(rows_),
        cols(cols_),
        value(static_cast<size_t>(rows_) * cols_, 0.0),
        grad(static_cast<size_t>(rows_) * cols_, 0.0),
        trainable(trainable_) {}

  std::int64_t numel() const { return static_cast<std::int64_t>(rows) * cols; }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

class Tape;

// Lightweight handle to a node on a tape. Everything is a row-major matrix;
// vectors are 1xN rows and scalars are 1x1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  int rows() const;
  int cols() const;
  std::int64_t numel() const;
  std::span<const double> value() const;
  std::span<const double> grad() const;
  double at(int i, int j) const;
  double item() const;  // requires 1x1

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Dynamic tape of recorded operations. Rebuilt per training step; replaying
// the backward rules in reverse id order yields exact analytic gradients of
// the recorded forward. A tape constructed with grad_enabled=false records
// values only (used for evaluation).
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Leaf bound to a parameter; backward accumulates into p.grad. The param
  // must outlive the tape.
  Tensor leaf(Param& p);
  // Untracked constant.
  Tensor input(int rows, int cols, std::vector<double> data);
  Tensor input(int rows, int cols, std::span<const double> data);
  Tensor full(int rows, int cols, double fill);

  // Custom op entry point: creates a node whose backward rule is `bw`,
  // invoked as bw(tape, out_id). `bw` runs only if at least one input
  // requires grad (and grads are on).
  using BackwardFn = std::function<void(Tape&, int)>;
  Tensor emit(int rows, int cols, std::vector<double> value,
              std::span<const Tensor> inputs, BackwardFn bw);

  // Populates grads of every ancestor of `loss` (a 1x1 tensor) that is
  // reachable through differentiable ops, and flushes leaf grads into their
  // params.
  void backward(Tensor loss);

  // Frees all nodes; outstanding tensor handles become invalid.
  void clear();

  // Node access (used by op implementations and backward closures).
  std::span<const double> value_of(int id) const;
  std::span<double> grad_of(int id);
  bool requires_grad(int id) const;
  int rows_of(int id) const;
  int cols_of(int id) const;

 private:
  friend class Tensor;
  struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on demand during backward
    BackwardFn backward;
    Param* param = nullptr;  // set for leaves bound to a Param
    bool requires_grad = false;
  };
  Node& node(int id);
  const Node& node(int id) const;
  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

// ---- Operations -----------------------------------------------------------
// All ops validate shapes and throw Error with both shapes on mismatch.

Tensor add(Tensor a, Tensor b);        // elementwise, same shape
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);        // Hadamard
Tensor affine(Tensor a, double scale, double shift = 0.0);
Tensor add_row(Tensor a, Tensor row);  // a: TxD, row: 1xD (bias broadcast)
Tensor matmul(Tensor a, Tensor b);     // [m x k] . [k x n]
Tensor matmul_nt(Tensor a, Tensor b);  // [m x k] . [n x k]^T -> [m x n]
Tensor relu(Tensor a);
Tensor tanh_op(Tensor a);
// Row softmax; columns >= valid_cols get probability 0 (length masking).
// valid_cols < 0 means all columns are valid.
Tensor softmax_rows(Tensor a, int valid_cols = -1);
Tensor log_softmax_rows(Tensor a);
Tensor layernorm_rows(Tensor x, Tensor gain, Tensor bias, double eps = 1e-5);
Tensor slice_cols(Tensor a, int start, int width);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor gather_row(Tensor table, int row_index);    // -> 1xD
Tensor broadcast_row(Tensor row, int n_rows);      // 1xD -> TxD
Tensor mul_col(Tensor a, Tensor col);              // a: TxD, col: Tx1
Tensor mse(Tensor a, Tensor b);                    // mean over all elements -> 1x1
Tensor detach(Tensor a);                           // value copy, no grad flow
Tensor dropout(Tensor a, double rate, Rng& rng);   // inverted dropout
// Prefix attention gate (per query row): gamma = Sp / (Sp + Sc) where Sp/Sc
// are the exponential sums of prefix/content logits. Content columns
// >= valid_c are masked out. Returns Tx1, values strictly in (0, 1).
Tensor gamma_rows(Tensor prefix_logits, Tensor content_logits, int valid_c = -1);

// Fixed-order mean of 1x1 tensors (sum in argument order, then scale).
Tensor mean_of(std::span<const Tensor> scalars);

}  // namespace uniadapt
