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
#include <vector>

#include "gsp/tape.hpp"
#include "gsp/tensor.hpp"

// Differentiable operations. Each takes the tape it records onto as its first
// argument; a non-recording tape runs the same forward math without a graph.

namespace gsp {

enum class Mode { Train, Eval };

enum class ActivationKind { Relu, Tanh };

enum class PoolKind {
  SpatialMean,  // mean over the trailing H, W axes
  SegmentMean,  // mean over axis 1 (segments / time)
};

// ---------------------------------------------------------------- structural

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Elementwise product. `b` has the same rank as `a` and every axis of `b`
/// is either 1 (broadcast) or equal to the matching axis of `a`.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor);

/// Sum of all elements, shape [1].
template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

/// Mean of all elements, shape [1].
template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

/// Axis permutation: output axis i is input axis `axes[i]`.
template <typename T>
Tensor<T> permute(Tape<T>& tape, const Tensor<T>& x, const std::vector<std::size_t>& axes);

/// Half-open range [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(Tape<T>& tape, const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts, std::size_t axis);

/// Mean over one axis; the axis is removed (a rank-1 input yields shape [1]).
template <typename T>
Tensor<T> mean_axis(Tape<T>& tape, const Tensor<T>& x, std::size_t axis);

// ---------------------------------------------------------------- activations

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> activation(Tape<T>& tape, const Tensor<T>& x, ActivationKind kind);

/// Softmax over the last axis.
template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x);

// ---------------------------------------------------------------- linear algebra

/// y = x W^T + b with x [N, din], W [dout, din], b [dout] (may be undefined).
template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Batched product of [B, M, K] and [B, K, N] (or [B, N, K] when transpose_b).
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

// ---------------------------------------------------------------- convolution

template <typename T>
struct ConvParams {
  Tensor<T> weight;  // [outC, inC, (kT,) kH, kW]
  Tensor<T> bias;    // [outC] or undefined
  std::vector<std::size_t> stride;   // one entry per spatial (and temporal) axis
  std::vector<std::size_t> padding;  // zero padding, same layout as stride
};

/// Cross-correlation of x [N, C, H, W].
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const ConvParams<T>& p);

/// Cross-correlation of x [N, C, T, H, W].
template <typename T>
Tensor<T> conv3d(Tape<T>& tape, const Tensor<T>& x, const ConvParams<T>& p);

// ---------------------------------------------------------------- normalization & regularization

template <typename T>
struct BatchNormState {
  Tensor<T> gamma;  // [C], trainable
  Tensor<T> beta;   // [C], trainable
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double momentum = 0.1;  // weight of the newest batch in the running averages
  double eps = 1e-5;
  Mode mode = Mode::Train;

  static BatchNormState make(std::size_t channels);
};

/// Per-channel normalization of x [N, C, ...] over every non-channel axis.
/// Train mode uses batch statistics and updates the running averages
/// (unbiased variance); eval mode reads the running averages only.
template <typename T>
Tensor<T> batch_norm(Tape<T>& tape, const Tensor<T>& x, BatchNormState<T>& state);

/// Inverted dropout; identity in eval mode. Deterministic under `seed`.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, Mode mode, std::uint64_t seed);

/// Each row of x [N, d] divided by max(||row||_2, eps).
template <typename T>
Tensor<T> l2_normalize(Tape<T>& tape, const Tensor<T>& x, double eps = 1e-12);

// ---------------------------------------------------------------- temporal & pooling

/// Shifts channels [channel_begin, channel_end) of x [N, T, C, H, W] one step
/// along T (`direction` +1: frame t receives frame t-1; -1: frame t+1). The
/// vacated boundary frame is zero.
template <typename T>
Tensor<T> temporal_shift(Tape<T>& tape, const Tensor<T>& x, std::size_t channel_begin, std::size_t channel_end,
                         int direction);

template <typename T>
Tensor<T> pool(Tape<T>& tape, const Tensor<T>& x, PoolKind kind);

// ---------------------------------------------------------------- attention

template <typename T>
struct AttentionParams {
  std::size_t num_heads = 4;
  std::size_t model_dim = 128;
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;  // [D, D] weights, [D] biases

  std::size_t head_dim() const { return model_dim / num_heads; }

  /// Fan-in uniform weights, zero biases. Throws ConfigError when model_dim is
  /// not divisible by num_heads.
  static AttentionParams make(std::size_t model_dim, std::size_t num_heads, Rng& rng);
};

/// Scaled dot-product self-attention over tokens [N, L, D], heads
/// concatenated and output-projected. When `weights_out` is non-null it
/// receives the attention weights [N, heads, L, L].
template <typename T>
Tensor<T> multi_head_attention(Tape<T>& tape, const Tensor<T>& tokens, const AttentionParams<T>& p,
                               Tensor<T>* weights_out = nullptr);

// ---------------------------------------------------------------- loss

/// Mean over the batch of -log softmax(logits)[label].
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits, const std::vector<int>& labels);

// ---------------------------------------------------------------- init helpers

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
template <typename T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace gsp
