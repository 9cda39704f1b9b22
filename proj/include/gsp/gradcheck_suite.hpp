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
#include <string>
#include <vector>

namespace gsp {

inline constexpr double kGradCheckTolerance = 1e-5;

struct GradSuiteResult {
  std::string op;
  double max_rel_error = 0.0;
  std::size_t checks = 0;  // grad_check calls (inputs x seeds)
  int restarts = 0;        // summed kink-avoidance restarts
};

/// Runs grad_check in 64-bit over every differentiable operation, each with
/// respect to its data input and its parameters, for `seeds` random draws.
std::vector<GradSuiteResult> run_gradcheck_suite(std::size_t seeds = 10, double step = 1e-3);

}  // namespace gsp
