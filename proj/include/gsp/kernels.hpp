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

// Raw compute kernels over contiguous row-major buffers.
//
// gsp::kernels holds the OpenMP-parallel versions used by the differentiable
// ops. Every parallel loop partitions *output* elements so each value is
// produced by exactly one thread in a fixed summation order: results are
// bit-identical for any thread count.
//
// gsp::kernels::reference holds plain serial loops kept for testing and
// benchmarking the parallel versions.

namespace gsp::kernels {

/// Shape of a 3D cross-correlation on [N, Cin, T, H, W] input with a
/// [Cout, Cin, kT, kH, kW] kernel. A 2D convolution is the T = kT = 1 case.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_t = 1, in_h = 1, in_w = 1;
  std::size_t out_channels = 1;
  std::size_t k_t = 1, k_h = 1, k_w = 1;
  std::size_t stride_t = 1, stride_h = 1, stride_w = 1;
  std::size_t pad_t = 0, pad_h = 0, pad_w = 0;

  // Throws ShapeError when an output extent would be < 1.
  std::size_t out_t() const;
  std::size_t out_h() const;
  std::size_t out_w() const;
  void validate() const;

  std::size_t in_volume() const { return in_t * in_h * in_w; }
  std::size_t out_volume() const { return out_t() * out_h() * out_w(); }
  std::size_t kernel_volume() const { return k_t * k_h * k_w; }
  /// Rows of the unfolded input.
  std::size_t col_rows() const { return in_channels * kernel_volume(); }
  /// Columns of the unfolded input (all batch items side by side).
  std::size_t col_cols() const { return batch * out_volume(); }
};

template <typename T>
T dot(const T* a, const T* b, std::size_t n);

/// C[M,N] (+)= A[M,K] * B[K,N]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

/// C[M,N] (+)= A[M,K] * B[N,K]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

/// C[M,N] (+)= A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

/// y = conv(x, weight) + bias. `bias` may be null.
template <typename T>
void conv_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y);

/// Accumulates input, weight and bias gradients. Any output pointer may be null.
template <typename T>
void conv_backward(const ConvGeometry& g, const T* x, const T* weight, const T* dy, T* dx, T* dweight,
                   T* dbias);

namespace reference {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

template <typename T>
void conv_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y);

template <typename T>
void conv_backward(const ConvGeometry& g, const T* x, const T* weight, const T* dy, T* dx, T* dweight,
                   T* dbias);

}  // namespace reference

/// Threads the parallel kernels will use (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace gsp::kernels
