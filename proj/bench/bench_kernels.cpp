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


// Parallel kernels against their serial reference versions.
//
//   ./bench_kernels --benchmark_filter=Conv

#include <benchmark/benchmark.h>

#include <vector>

#include "gsp/kernels.hpp"
#include "gsp/pose.hpp"
#include "gsp/rng.hpp"

namespace {

using namespace gsp;

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

template <bool Parallel>
void BM_GemmNN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::gemm_nn(n, n, n, a.data(), b.data(), c.data(), false);
    } else {
      kernels::reference::gemm_nn(n, n, n, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}
BENCHMARK(BM_GemmNN<true>)->Name("GemmNN/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_GemmNN<false>)->Name("GemmNN/reference")->Arg(64)->Arg(256);

// First backbone stage on a 4 x 16-frame batch at 32x32.
kernels::ConvGeometry stem_geometry() {
  kernels::ConvGeometry g;
  g.batch = 64;
  g.in_channels = 3;
  g.in_h = g.in_w = 32;
  g.out_channels = 16;
  g.k_h = g.k_w = 3;
  g.stride_h = g.stride_w = 2;
  g.pad_h = g.pad_w = 1;
  return g;
}

// GSF gate on [N=4, C=16, T=16, 16, 16].
kernels::ConvGeometry gate_geometry() {
  kernels::ConvGeometry g;
  g.batch = 4;
  g.in_channels = 8;
  g.in_t = 16;
  g.in_h = g.in_w = 16;
  g.out_channels = 1;
  g.k_t = g.k_h = g.k_w = 3;
  g.pad_t = g.pad_h = g.pad_w = 1;
  return g;
}

template <bool Parallel, bool Backward>
void BM_Conv(benchmark::State& state) {
  const auto g = state.range(0) == 0 ? stem_geometry() : gate_geometry();
  const auto x = random_vec(g.batch * g.in_channels * g.in_volume(), 3);
  const auto w = random_vec(g.out_channels * g.col_rows(), 4);
  const auto dy = random_vec(g.batch * g.out_channels * g.out_volume(), 5);
  std::vector<float> y(dy.size()), dx(x.size()), dw(w.size());
  for (auto _ : state) {
    if constexpr (Backward) {
      if constexpr (Parallel) {
        kernels::conv_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), static_cast<float*>(nullptr));
      } else {
        kernels::reference::conv_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(),
                                          static_cast<float*>(nullptr));
      }
      benchmark::DoNotOptimize(dx.data());
    } else {
      if constexpr (Parallel) {
        kernels::conv_forward(g, x.data(), w.data(), static_cast<const float*>(nullptr), y.data());
      } else {
        kernels::reference::conv_forward(g, x.data(), w.data(), static_cast<const float*>(nullptr), y.data());
      }
      benchmark::DoNotOptimize(y.data());
    }
  }
}
BENCHMARK(BM_Conv<true, false>)->Name("ConvForward/parallel")->Arg(0)->Arg(1);
BENCHMARK(BM_Conv<false, false>)->Name("ConvForward/reference")->Arg(0)->Arg(1);
BENCHMARK(BM_Conv<true, true>)->Name("ConvBackward/parallel")->Arg(0)->Arg(1);
BENCHMARK(BM_Conv<false, true>)->Name("ConvBackward/reference")->Arg(0)->Arg(1);

template <bool Parallel>
void BM_Heatmap(benchmark::State& state) {
  Rng rng(6);
  KeypointFrame f;
  for (auto& kp : f.points) kp = {rng.uniform(), rng.uniform(), true};
  const auto side = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(rasterize_heatmap<float>(f, side, side, {2.0}));
    } else {
      benchmark::DoNotOptimize(reference::rasterize_heatmap<float>(f, side, side, 2.0));
    }
  }
}
BENCHMARK(BM_Heatmap<true>)->Name("Heatmap/parallel")->Arg(32)->Arg(128);
BENCHMARK(BM_Heatmap<false>)->Name("Heatmap/reference")->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
