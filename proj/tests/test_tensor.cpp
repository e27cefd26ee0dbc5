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

#include "test_util.hpp"
#include "uniadapt/tensor.hpp"

using namespace uniadapt;
using namespace uniadapt::testutil;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity and scalar cases") {
  Tape t;
  Tensor eye = t.input(2, 2, {1, 0, 0, 1});
  Tensor b = t.input(2, 2, {3, 4, 5, 6});
  Tensor c = matmul(eye, b);
  CHECK(bitwise_equal(c.value(), b.value()));

  Tensor s = matmul(t.input(1, 1, {2.0}), t.input(1, 1, {3.0}));
  CHECK(s.item() == 6.0);
}

TEST_CASE("matmul matches a naive triple-loop oracle") {
  Rng rng(11);
  auto a = random_vec(rng, 3 * 4);
  auto b = random_vec(rng, 4 * 2);
  std::vector<double> expect(3 * 2, 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 4; ++k)
        expect[i * 2 + j] += a[i * 4 + k] * b[k * 2 + j];
  Tape t;
  Tensor c = matmul(t.input(3, 4, a), t.input(4, 2, b));
  CHECK(max_abs_diff(c.value(), expect) < 1e-12);
}

TEST_CASE("matmul shape mismatch reports both shapes") {
  Tape t;
  Tensor a = t.full(2, 3, 1.0);
  Tensor b = t.full(2, 3, 1.0);
  try {
    matmul(a, b);
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
}

TEST_CASE("softmax trivial and oracle cases") {
  Tape t;
  Tensor flat = softmax_rows(t.input(1, 2, {0.0, 0.0}));
  CHECK(flat.value()[0] == doctest::Approx(0.5).epsilon(1e-15));

  Tensor big = softmax_rows(t.input(1, 2, {1000.0, 1000.0}));
  CHECK(big.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::isfinite(big.value()[1]));

  // extended-precision exp/normalize oracle
  Tensor sm = softmax_rows(t.input(1, 3, {1.0, 2.0, 3.0}));
  long double z = 0.0L;
  for (double x : {1.0, 2.0, 3.0}) z += expl(static_cast<long double>(x));
  for (int j = 0; j < 3; ++j) {
    const double expect = static_cast<double>(expl(1.0L + j) / z);
    CHECK(std::abs(sm.value()[j] - expect) < 1e-12);
  }
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const int r = 1 + static_cast<int>(rng() % 4);
    const int c = 1 + static_cast<int>(rng() % 6);
    auto x = random_vec(rng, static_cast<size_t>(r) * c, 3.0);
    Tape t;
    Tensor y = softmax_rows(t.input(r, c, x));
    for (int i = 0; i < r; ++i) {
      double sum = 0.0;
      for (int j = 0; j < c; ++j) sum += y.at(i, j);
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    auto shifted = x;
    for (double& v : shifted) v += 100.0;
    Tensor y2 = softmax_rows(t.input(r, c, shifted));
    CHECK(max_abs_diff(y.value(), y2.value()) < 1e-12);
  }
}

TEST_CASE("masked softmax zeroes invalid columns and their grads") {
  Tape t;
  Param p("x", 2, 4);
  p.value = {1, 2, 3, 99, 0, 0, 0, 99};
  Tensor y = softmax_rows(t.leaf(p), 3);
  for (int i = 0; i < 2; ++i) {
    CHECK(y.at(i, 3) == 0.0);
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) sum += y.at(i, j);
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  Tensor loss = mse(y, t.full(2, 4, 0.0));
  t.backward(loss);
  CHECK(p.grad[3] == 0.0);
  CHECK(p.grad[7] == 0.0);
}

TEST_CASE("backward on sum gives all-ones gradient") {
  Param w("w", 1, 4);
  w.value = {1, 2, 3, 4};
  Tape t;
  Tensor leaf = t.leaf(w);
  // sum(w) through matmul with a ones column
  Tensor loss = matmul(leaf, t.full(4, 1, 1.0));
  t.backward(loss);
  for (double g : w.grad) CHECK(g == 1.0);
}

TEST_CASE("mse mean convention: d/dw mse([2], 0) = 4") {
  Param w("w", 1, 1);
  w.value = {2.0};
  Tape t;
  Tensor loss = mse(t.leaf(w), t.full(1, 1, 0.0));
  CHECK(loss.item() == 4.0);
  t.backward(loss);
  CHECK(w.grad[0] == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("backward requires a scalar loss") {
  Param w("w", 2, 2);
  Tape t;
  Tensor leaf = t.leaf(w);
  CHECK_THROWS_AS(t.backward(leaf), Error);
}

namespace {

// FD gradient check of a scalar-valued builder over every entry of `p`.
template <class Builder>
void gradcheck(Param& p, Builder&& build, double rtol = 1e-4) {
  p.zero_grad();
  {
    Tape t;
    Tensor loss = build(t);
    t.backward(loss);
  }
  for (size_t i = 0; i < p.value.size(); ++i) {
    const double fd = finite_diff(p, i, [&] {
      Tape t(false);
      return build(t).item();
    });
    CAPTURE(i);
    CHECK(grads_close(p.grad[i], fd, rtol));
  }
}

}  // namespace

TEST_CASE("gradient check: every primitive op") {
  Rng rng(21);
  Param p("p", 3, 4);
  p.value = random_vec(rng, 12);
  const std::vector<double> other = random_vec(rng, 12);
  const std::vector<double> row = random_vec(rng, 4);
  const std::vector<double> col = random_vec(rng, 3);
  const std::vector<double> m42 = random_vec(rng, 8);
  const std::vector<double> m24len3 = random_vec(rng, 2 * 4);

  gradcheck(p, [&](Tape& t) {
    return mse(add(t.leaf(p), t.input(3, 4, other)), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(sub(t.leaf(p), t.input(3, 4, other)), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(mul(t.leaf(p), t.input(3, 4, other)), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(affine(t.leaf(p), -1.7, 0.3), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(add_row(t.leaf(p), t.input(1, 4, row)), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(matmul(t.leaf(p), t.input(4, 2, m42)), t.full(3, 2, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(matmul_nt(t.leaf(p), t.input(2, 4, m24len3)), t.full(3, 2, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(tanh_op(t.leaf(p)), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(relu(t.leaf(p)), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(softmax_rows(t.leaf(p)), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(softmax_rows(t.leaf(p), 3), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(log_softmax_rows(t.leaf(p)), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(slice_cols(t.leaf(p), 1, 2), t.full(3, 2, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    Tensor parts[] = {slice_cols(t.leaf(p), 0, 2), slice_cols(t.leaf(p), 2, 2)};
    return mse(concat_cols(parts), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    Tensor leaf = t.leaf(p);
    Tensor parts[] = {leaf, leaf};
    return mse(concat_rows(parts), t.full(6, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(gather_row(t.leaf(p), 1), t.full(1, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(mul_col(t.leaf(p), t.input(3, 1, col)), t.full(3, 4, 0.1));
  });
  gradcheck(p, [&](Tape& t) {
    return mse(broadcast_row(gather_row(t.leaf(p), 0), 5), t.full(5, 4, 0.1));
  });

  Param gains("g", 1, 4), biases("b", 1, 4);
  gains.value = random_vec(rng, 4, 0.5);
  for (double& g : gains.value) g += 1.0;
  biases.value = random_vec(rng, 4, 0.5);
  gradcheck(p, [&](Tape& t) {
    return mse(layernorm_rows(t.leaf(p), t.leaf(gains), t.leaf(biases)),
               t.full(3, 4, 0.1));
  });
  gradcheck(gains, [&](Tape& t) {
    return mse(layernorm_rows(t.leaf(p), t.leaf(gains), t.leaf(biases)),
               t.full(3, 4, 0.1));
  });
  gradcheck(biases, [&](Tape& t) {
    return mse(layernorm_rows(t.leaf(p), t.leaf(gains), t.leaf(biases)),
               t.full(3, 4, 0.1));
  });

  Param plog("plog", 2, 3), clog("clog", 2, 5);
  plog.value = random_vec(rng, 6);
  clog.value = random_vec(rng, 10);
  auto gamma_loss = [&](Tape& t) {
    return mse(gamma_rows(t.leaf(plog), t.leaf(clog), 4), t.full(2, 1, 0.25));
  };
  gradcheck(plog, gamma_loss);
  gradcheck(clog, gamma_loss);
}

TEST_CASE("gradient check: tiny two-layer composite") {
  Rng rng(31);
  const int d = 8, t_len = 4;
  Param w1("w1", d, d), b1("b1", 1, d), w2("w2", d, d), b2("b2", 1, d);
  w1.value = random_vec(rng, static_cast<size_t>(d) * d, 0.4);
  w2.value = random_vec(rng, static_cast<size_t>(d) * d, 0.4);
  b1.value = random_vec(rng, d, 0.2);
  b2.value = random_vec(rng, d, 0.2);
  const auto x = random_vec(rng, static_cast<size_t>(t_len) * d);
  const auto target = random_vec(rng, static_cast<size_t>(t_len) * d);

  auto build = [&](Tape& t) {
    Tensor h = tanh_op(add_row(matmul(t.input(t_len, d, x), t.leaf(w1)), t.leaf(b1)));
    Tensor y = add_row(matmul(h, t.leaf(w2)), t.leaf(b2));
    return mse(y, t.input(t_len, d, target));
  };
  for (Param* p : {&w1, &b1, &w2, &b2}) {
    p->zero_grad();
    {
      Tape t;
      t.backward(build(t));
    }
    for (size_t i = 0; i < p->value.size(); i += 7) {
      const double fd = finite_diff(*p, i, [&] {
        Tape t(false);
        return build(t).item();
      });
      CHECK(grads_close(p->grad[i], fd));
    }
  }
}

TEST_CASE("replaying the same forward is bitwise identical") {
  Rng rng(41);
  Param w("w", 6, 6);
  w.value = random_vec(rng, 36);
  const auto x = random_vec(rng, 4 * 6);
  auto run = [&] {
    Tape t;
    Tensor y = softmax_rows(matmul(t.input(4, 6, x), t.leaf(w)));
    auto v = y.value();
    return std::vector<double>(v.begin(), v.end());
  };
  const auto a = run();
  const auto b = run();
  CHECK(bitwise_equal(a, b));
}

TEST_CASE("cleared tape frees nodes; params persist") {
  Param w("w", 2, 2);
  w.value = {1, 2, 3, 4};
  Tape t;
  t.leaf(w);
  CHECK(t.size() == 1);
  t.clear();
  CHECK(t.size() == 0);
  CHECK(w.value[3] == 4.0);
}

TEST_CASE("dropout: rate zero is the identity, mask reused in backward") {
  Rng rng(55);
  Param p("p", 4, 8);
  p.value = random_vec(rng, 32);
  Tape t;
  Tensor leaf = t.leaf(p);
  CHECK(dropout(leaf, 0.0, rng).id() == leaf.id());

  Rng drng(7);
  Tensor y = dropout(leaf, 0.5, drng);
  int kept = 0;
  for (size_t i = 0; i < 32; ++i) {
    const double v = y.value()[i];
    CHECK((v == 0.0 || v == doctest::Approx(2.0 * p.value[i])));
    if (v != 0.0) ++kept;
  }
  CHECK(kept > 0);
  t.backward(mse(y, t.full(4, 8, 0.0)));
  for (size_t i = 0; i < 32; ++i)
    if (y.value()[i] == 0.0 && p.value[i] != 0.0) CHECK(p.grad[i] == 0.0);
}

TEST_SUITE_END();
