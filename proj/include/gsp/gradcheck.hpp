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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "gsp/tape.hpp"
#include "gsp/tensor.hpp"

namespace gsp {

/// Scalar-valued function of one tensor, recorded on the given tape.
using ScalarFn = std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;   // at worst_index
  double numeric = 0.0;    // at worst_index
  int restarts = 0;        // input perturbations needed to avoid kinks
};

/// Compares reverse-mode gradients of `fn` at `input` with fourth-order
/// central differences (evaluations at +/-step and +/-2 step). The error per element is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
///
/// When a +/- step evaluation takes a different branch of a piecewise op than
/// the base point (relu mask, norm clamp), the whole input is nudged by a
/// seeded random offset and the check restarts.
///
/// Throws ContractError if `fn` is not scalar-valued or not deterministic,
/// and RangeError naming the index when either gradient is NaN.
GradCheckReport grad_check_report(const ScalarFn& fn, const Tensor<double>& input, double step, std::uint64_t seed);

/// Maximum relative error only.
double grad_check(const ScalarFn& fn, const Tensor<double>& input, double step, std::uint64_t seed);

}  // namespace gsp
