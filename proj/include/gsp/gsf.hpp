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

#include "gsp/ops.hpp"
#include "gsp/params.hpp"

namespace gsp {

/// Gate-shift-fuse block parameters.
///
/// Channels split into a forward group (the first C - floor(C/2) channels,
/// shifted toward later frames) and a backward group (the remaining
/// floor(C/2), shifted toward earlier frames). Each group has a single-output
/// 3x3x3 gate convolution and per-channel fusion weights.
template <typename T>
struct GsfBlockParams {
  std::size_t channels = 0;
  ConvParams<T> gate_forward;   // weight [1, Cf, 3, 3, 3], bias [1]
  ConvParams<T> gate_backward;  // weight [1, Cb, 3, 3, 3], bias [1]
  Tensor<T> alpha_forward, beta_forward;    // [Cf]
  Tensor<T> alpha_backward, beta_backward;  // [Cb]

  std::size_t forward_channels() const { return channels - channels / 2; }
  std::size_t backward_channels() const { return channels / 2; }

  /// Zero gates and unit fusion weights: the block starts as the identity.
  /// Throws ConfigError for C < 2.
  static GsfBlockParams make(std::size_t channels);

  void collect(TensorList<T>& out, const std::string& prefix) const;
};

/// x [N, T, C, H, W] -> same shape. Per group g with direction d:
///   gate     = tanh(conv3d(x_g))            broadcast over the group's channels
///   shifted  = temporal_shift(gate * x_g, d)
///   residual = x_g - gate * x_g
///   out_g    = alpha_g * shifted + beta_g * residual
template <typename T>
Tensor<T> gsf_block(Tape<T>& tape, const Tensor<T>& x, const GsfBlockParams<T>& p);

struct BackboneConfig {
  std::size_t input_channels = 3;
  std::vector<std::size_t> widths{16, 32, 64, 128};
  std::size_t segments = 16;
  bool use_gsf = true;

  std::size_t feature_dim() const { return widths.empty() ? 0 : widths.back(); }
  /// Smallest H and W that survive every stride-2 stage.
  std::size_t min_resolution() const { return std::size_t{1} << widths.size(); }
  void validate() const;
};

/// Small 2D CNN with one GSF block per stage:
///   conv2d(3x3, stride 2) -> batch_norm -> relu -> gsf_block
/// then spatial-mean and segment-mean pooling to [N, feature_dim].
template <typename T>
class Backbone {
 public:
  struct Stage {
    ConvParams<T> conv;
    BatchNormState<T> bn;
    GsfBlockParams<T> gsf;
  };

  Backbone() = default;

  /// Fan-in uniform conv kernels. Input channels beyond the first three get
  /// zero kernels and RGB kernels are drawn with the 3-channel fan-in, so an
  /// RGB+heatmap backbone draws the same RGB weights as an RGB-only one.
  Backbone(const BackboneConfig& cfg, Rng& rng);

  /// frames [N, S, Cin, H, W] -> features [N, feature_dim].
  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& frames) const;

  void set_mode(Mode mode);
  void collect(TensorList<T>& out, const std::string& prefix) const;

  const BackboneConfig& config() const { return cfg_; }
  std::vector<Stage>& stages() { return stages_; }
  const std::vector<Stage>& stages() const { return stages_; }

 private:
  BackboneConfig cfg_;
  // forward() updates running statistics in train mode.
  mutable std::vector<Stage> stages_;
};

/// Spec-level entry point: features of `frames` under `backbone`.
template <typename T>
Tensor<T> backbone_features(Tape<T>& tape, const Tensor<T>& frames, const Backbone<T>& backbone) {
  return backbone.forward(tape, frames);
}

}  // namespace gsp
