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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "uniadapt/cli.hpp"
#include "uniadapt/train.hpp"

namespace py = pybind11;
using namespace uniadapt;

namespace {

std::vector<double> to_vec(const py::array_t<double, py::array::c_style |
                                                          py::array::forcecast>& a,
                           int& rows, int& cols) {
  if (a.ndim() != 2) throw Error("expected a 2-D array of logits");
  rows = static_cast<int>(a.shape(0));
  cols = static_cast<int>(a.shape(1));
  const double* p = a.data();
  return std::vector<double>(p, p + static_cast<size_t>(rows) * cols);
}

double py_ctc_loss(const py::array_t<double, py::array::c_style |
                                                 py::array::forcecast>& logits,
                   const std::vector<int>& labels, int blank) {
  int t = 0, v = 0;
  std::vector<double> z = to_vec(logits, t, v);
  return ctc_loss_value(z, t, v, labels, blank);
}

py::tuple py_ctc_loss_grad(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& logits,
    const std::vector<int>& labels, int blank) {
  int t = 0, v = 0;
  std::vector<double> z = to_vec(logits, t, v);
  Tape tape;
  Param p("logits", t, v);
  p.value = z;
  Tensor loss = ctc_loss(tape.leaf(p), labels, blank);
  const double value = loss.item();
  tape.backward(loss);
  py::array_t<double> grad({t, v});
  std::copy(p.grad.begin(), p.grad.end(), grad.mutable_data());
  return py::make_tuple(value, grad);
}

std::vector<int> py_greedy_decode(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& logits,
    int blank) {
  int t = 0, v = 0;
  std::vector<double> z = to_vec(logits, t, v);
  return greedy_decode(z, t, v, blank);
}

double py_cer_str(const std::string& ref, const std::string& hyp) {
  std::vector<int> r(ref.begin(), ref.end()), h(hyp.begin(), hyp.end());
  return cer(r, h);
}

py::dict py_train_toy(const std::string& preset,
                      const std::map<std::string, std::string>& overrides) {
  ExperimentConfig cfg = preset_config(preset);
  for (const auto& [k, v] : overrides) apply_override(cfg, k, v);
  ToyDataset ds = build_toy_dataset(cfg.data);
  TrainSummary s = train(cfg, ds, nullptr);
  py::dict out;
  out["best_dev_avg_cer"] = s.best_dev_avg_cer;
  out["test_avg_cer"] = s.test.avg_cer;
  out["test_per_lang_cer"] = s.test.per_lang_cer;
  out["updates"] = s.updates;
  out["checkpoint"] = s.checkpoint_stem;
  out["last_total_loss"] = s.last.total;
  return out;
}

py::dict py_params_report(const std::string& preset,
                          const std::map<std::string, std::string>& overrides) {
  ExperimentConfig cfg = preset_config(preset);
  for (const auto& [k, v] : overrides) apply_override(cfg, k, v);
  cfg.model.vocab_size = cfg.data.n_langs * cfg.data.chars_per_lang + 4;
  cfg.model.n_langs = cfg.data.n_langs;
  cfg.model.d_in = cfg.data.d_in;
  Model m = build_model(cfg.model, cfg.opt.seed);
  ParamsReport r = params_report(m);
  py::dict out;
  for (const auto& row : r.rows) out[row.component.c_str()] = row.count;
  out["total"] = r.total;
  return out;
}

int py_run_cli(const std::vector<std::string>& args) {
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace

PYBIND11_MODULE(_uniadapt, m) {
  m.doc() = "language-universal adapter learning for multilingual CTC "
            "recognition: core operations";
  py::register_exception<Error>(m, "UniadaptError");

  m.def("ctc_loss", &py_ctc_loss, py::arg("logits"), py::arg("labels"),
        py::arg("blank"),
        "-log p_ctc(labels | logits) for one utterance (logits: T x V, "
        "pre-softmax)");
  m.def("ctc_loss_grad", &py_ctc_loss_grad, py::arg("logits"),
        py::arg("labels"), py::arg("blank"),
        "returns (loss, dloss/dlogits)");
  m.def("greedy_decode", &py_greedy_decode, py::arg("logits"), py::arg("blank"),
        "per-frame argmax, collapse repeats, strip blanks");
  m.def("levenshtein", &levenshtein, py::arg("a"), py::arg("b"));
  m.def("cer",
        static_cast<double (*)(const std::vector<int>&, const std::vector<int>&)>(&cer),
        py::arg("ref"), py::arg("hyp"));
  m.def("cer_str", &py_cer_str, py::arg("ref"), py::arg("hyp"));
  m.def("prefix_equivalence_max_abs_diff",
        [](std::uint64_t seed, int t, int d, int n_heads, int prefix_len) {
          return prefix_equivalence_max_abs_diff(seed, t, d, n_heads, prefix_len);
        },
        py::arg("seed"), py::arg("t"), py::arg("d"), py::arg("n_heads") = 2,
        py::arg("prefix_len") = 1,
        "max |direct - gated| over one random prefixed-attention instance");
  m.def("train_toy", &py_train_toy, py::arg("preset") = "kd-base",
        py::arg("overrides") = std::map<std::string, std::string>{},
        "run a (typically small) training job; returns summary metrics");
  m.def("params_report", &py_params_report, py::arg("preset") = "kd-base",
        py::arg("overrides") = std::map<std::string, std::string>{});
  m.def("run_cli", &py_run_cli, py::arg("args"),
        "invoke the command-line surface; returns the exit code");
}
