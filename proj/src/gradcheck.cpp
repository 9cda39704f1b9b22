// Copyright 2026 The gsp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gsp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gsp/rng.hpp"

namespace gsp {

namespace {

constexpr int kMaxRestarts = 25;

struct Evaluation {
  double value;
  std::uint64_t fingerprint;
};

Evaluation evaluate(const ScalarFn& fn, const Tensor<double>& x) {
  BranchRecorder::Scope scope;
  Tape<double> tape(false);
  const Tensor<double> y = fn(tape, x);
  if (!y.defined() || y.numel() != 1) throw ContractError("grad_check: function must return a scalar");
  return {y[0], scope.fingerprint()};
}

}  // namespace

GradCheckReport grad_check_report(const ScalarFn& fn, const Tensor<double>& input, double step, std::uint64_t seed) {
  if (!(step > 0.0)) throw ContractError("grad_check: step must be positive");
  Rng rng(seed);
  Tensor<double> x = input.clone();
  GradCheckReport report;

  for (int attempt = 0; attempt <= kMaxRestarts; ++attempt) {
    report = GradCheckReport{};
    report.restarts = attempt;

    Tensor<double> leaf = x.clone();
    leaf.set_requires_grad(true);
    std::uint64_t base_fp = 0;
    double base_value = 0.0;
    {
      BranchRecorder::Scope scope;
      Tape<double> tape;
      const Tensor<double> y = fn(tape, leaf);
      if (!y.defined() || y.numel() != 1) throw ContractError("grad_check: function must return a scalar");
      base_fp = scope.fingerprint();
      base_value = y[0];
      // A leaf result means fn ignored its input: the gradient is zero.
      if (!y.is_leaf()) tape.backward(y);
    }
    const Tensor<double> analytic = leaf.grad_tensor();
    for (std::size_t i = 0; i < analytic.numel(); ++i) {
      if (std::isnan(analytic[i])) {
        throw RangeError("grad_check: analytic gradient is NaN at index " + std::to_string(i));
      }
    }

    const Evaluation replay = evaluate(fn, x);
    if (replay.value != base_value && !(std::isnan(replay.value) && std::isnan(base_value))) {
      throw ContractError("grad_check: function is not deterministic under a fixed seed");
    }

    bool crossed = false;
    for (std::size_t i = 0; i < x.numel() && !crossed; ++i) {
      const double orig = x[i];
      double f[4];
      const double offsets[4] = {-2.0 * step, -step, step, 2.0 * step};
      for (int k = 0; k < 4 && !crossed; ++k) {
        x[i] = orig + offsets[k];
        const Evaluation e = evaluate(fn, x);
        f[k] = e.value;
        crossed = e.fingerprint != base_fp;
      }
      x[i] = orig;
      if (crossed) break;
      const double numeric = (8.0 * (f[2] - f[1]) - (f[3] - f[0])) / (12.0 * step);
      if (std::isnan(numeric)) {
        throw RangeError("grad_check: finite-difference gradient is NaN at index " + std::to_string(i));
      }
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (i == 0 || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
    if (!crossed) return report;

    // A perturbation crossed a kink: move the whole input a little and retry.
    for (auto& v : x.data()) v += rng.uniform(-1.0, 1.0) * 50.0 * step;
  }
  throw ContractError("grad_check: could not move the input away from activation kinks after " +
                      std::to_string(kMaxRestarts) + " restarts");
}

double grad_check(const ScalarFn& fn, const Tensor<double>& input, double step, std::uint64_t seed) {
  return grad_check_report(fn, input, step, seed).max_rel_error;
}

}  // namespace gsp
