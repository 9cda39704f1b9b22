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

#include "gsp/gsf.hpp"

#include <string>

namespace gsp {

namespace {

template <typename T>
ConvParams<T> zero_gate(std::size_t group_channels) {
  ConvParams<T> p;
  p.weight = Tensor<T>::zeros({1, group_channels, 3, 3, 3});
  p.bias = Tensor<T>::zeros({1});
  p.stride = {1};
  p.padding = {1};
  return p;
}

template <typename T>
Tensor<T> gate_shift_fuse_group(Tape<T>& tape, const Tensor<T>& xg, const ConvParams<T>& gate,
                                const Tensor<T>& alpha, const Tensor<T>& beta, int direction) {
  const std::size_t n = xg.dim(0), t = xg.dim(1), cg = xg.dim(2), h = xg.dim(3), w = xg.dim(4);
  const Tensor<T> volume = permute(tape, xg, {0, 2, 1, 3, 4});  // [N, Cg, T, H, W]
  // The gate has one channel, so [N,1,T,H,W] and [N,T,1,H,W] share memory order.
  const Tensor<T> gate_map = tanh(tape, reshape(tape, conv3d(tape, volume, gate), {n, t, 1, h, w}));
  const Tensor<T> gated = mul(tape, xg, gate_map);
  const Tensor<T> shifted = temporal_shift(tape, gated, 0, cg, direction);
  const Tensor<T> residual = sub(tape, xg, gated);
  const Shape per_channel{1, 1, cg, 1, 1};
  return add(tape, mul(tape, shifted, reshape(tape, alpha, per_channel)),
             mul(tape, residual, reshape(tape, beta, per_channel)));
}

}  // namespace

template <typename T>
GsfBlockParams<T> GsfBlockParams<T>::make(std::size_t channels) {
  if (channels < 2) throw ConfigError("gsf_block: needs at least 2 channels, got " + std::to_string(channels));
  GsfBlockParams p;
  p.channels = channels;
  const std::size_t cf = p.forward_channels(), cb = p.backward_channels();
  p.gate_forward = zero_gate<T>(cf);
  p.gate_backward = zero_gate<T>(cb);
  p.alpha_forward = Tensor<T>::ones({cf});
  p.beta_forward = Tensor<T>::ones({cf});
  p.alpha_backward = Tensor<T>::ones({cb});
  p.beta_backward = Tensor<T>::ones({cb});
  return p;
}

template <typename T>
void GsfBlockParams<T>::collect(TensorList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + "gate_forward.weight", gate_forward.weight, true, true});
  out.push_back({prefix + "gate_forward.bias", gate_forward.bias, true, false});
  out.push_back({prefix + "gate_backward.weight", gate_backward.weight, true, true});
  out.push_back({prefix + "gate_backward.bias", gate_backward.bias, true, false});
  out.push_back({prefix + "alpha_forward", alpha_forward, true, false});
  out.push_back({prefix + "beta_forward", beta_forward, true, false});
  out.push_back({prefix + "alpha_backward", alpha_backward, true, false});
  out.push_back({prefix + "beta_backward", beta_backward, true, false});
}

template <typename T>
Tensor<T> gsf_block(Tape<T>& tape, const Tensor<T>& x, const GsfBlockParams<T>& p) {
  if (x.ndim() != 5) throw ShapeError("gsf_block: expected [N,T,C,H,W], got " + shape_str(x.shape()));
  const std::size_t c = x.dim(2);
  if (c < 2) throw ConfigError("gsf_block: needs at least 2 channels, got " + std::to_string(c));
  if (c != p.channels) {
    throw ShapeError("gsf_block: parameters built for " + std::to_string(p.channels) + " channels, input has " +
                     std::to_string(c));
  }
  const std::size_t cf = p.forward_channels();
  const Tensor<T> fwd = gate_shift_fuse_group(tape, slice(tape, x, 2, 0, cf), p.gate_forward, p.alpha_forward,
                                              p.beta_forward, +1);
  const Tensor<T> bwd = gate_shift_fuse_group(tape, slice(tape, x, 2, cf, c), p.gate_backward, p.alpha_backward,
                                              p.beta_backward, -1);
  return concat(tape, {fwd, bwd}, 2);
}

void BackboneConfig::validate() const {
  if (input_channels == 0) throw ConfigError("backbone: input_channels must be positive");
  if (widths.empty()) throw ConfigError("backbone: at least one stage width is required");
  for (auto w : widths) {
    if (w < 2) throw ConfigError("backbone: stage widths must be >= 2 (gsf channel split)");
  }
}

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  std::size_t in = cfg_.input_channels;
  for (std::size_t s = 0; s < cfg_.widths.size(); ++s) {
    const std::size_t out = cfg_.widths[s];
    Stage stage;
    stage.conv.stride = {2};
    stage.conv.padding = {1};
    if (s == 0 && in > 3) {
      const Tensor<T> rgb = fan_in_uniform<T>({out, 3, 3, 3}, 3 * 9, rng);
      stage.conv.weight = Tensor<T>::zeros({out, in, 3, 3});
      for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < 27; ++i) stage.conv.weight[(o * in) * 9 + i] = rgb[o * 27 + i];
      }
    } else {
      stage.conv.weight = fan_in_uniform<T>({out, in, 3, 3}, in * 9, rng);
    }
    stage.bn = BatchNormState<T>::make(out);
    stage.gsf = GsfBlockParams<T>::make(out);
    stages_.push_back(std::move(stage));
    in = out;
  }
}

template <typename T>
Tensor<T> Backbone<T>::forward(Tape<T>& tape, const Tensor<T>& frames) const {
  if (frames.ndim() != 5) throw ShapeError("backbone: expected frames [N,S,C,H,W], got " + shape_str(frames.shape()));
  const std::size_t n = frames.dim(0), s = frames.dim(1), c = frames.dim(2);
  if (c != cfg_.input_channels) {
    throw ShapeError("backbone: frames have " + std::to_string(c) + " channels, configured for " +
                     std::to_string(cfg_.input_channels));
  }
  const std::size_t minimum = cfg_.min_resolution();
  if (frames.dim(3) < minimum || frames.dim(4) < minimum) {
    throw ConfigError("backbone: resolution " + std::to_string(frames.dim(3)) + "x" + std::to_string(frames.dim(4)) +
                      " is too small for " + std::to_string(cfg_.widths.size()) + " stride-2 stages; minimum is " +
                      std::to_string(minimum) + "x" + std::to_string(minimum));
  }
  Tensor<T> x = reshape(tape, frames, {n * s, c, frames.dim(3), frames.dim(4)});
  for (auto& stage : stages_) {
    x = relu(tape, batch_norm(tape, conv2d(tape, x, stage.conv), stage.bn));
    if (cfg_.use_gsf) {
      const std::size_t ch = x.dim(1), h = x.dim(2), w = x.dim(3);
      x = reshape(tape, gsf_block(tape, reshape(tape, x, {n, s, ch, h, w}), stage.gsf), {n * s, ch, h, w});
    }
  }
  const std::size_t d = x.dim(1);
  const Tensor<T> per_frame = pool(tape, x, PoolKind::SpatialMean);  // [N*S, D]
  return pool(tape, reshape(tape, per_frame, {n, s, d}), PoolKind::SegmentMean);
}

template <typename T>
void Backbone<T>::set_mode(Mode mode) {
  for (auto& stage : stages_) stage.bn.mode = mode;
}

template <typename T>
void Backbone<T>::collect(TensorList<T>& out, const std::string& prefix) const {
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const std::string p = prefix + "stage" + std::to_string(s) + ".";
    const Stage& st = stages_[s];
    out.push_back({p + "conv.weight", st.conv.weight, true, true});
    out.push_back({p + "bn.gamma", st.bn.gamma, true, false});
    out.push_back({p + "bn.beta", st.bn.beta, true, false});
    out.push_back({p + "bn.running_mean", st.bn.running_mean, false, false});
    out.push_back({p + "bn.running_var", st.bn.running_var, false, false});
    st.gsf.collect(out, p + "gsf.");
  }
}

template struct GsfBlockParams<float>;
template struct GsfBlockParams<double>;
template Tensor<float> gsf_block(Tape<float>&, const Tensor<float>&, const GsfBlockParams<float>&);
template Tensor<double> gsf_block(Tape<double>&, const Tensor<double>&, const GsfBlockParams<double>&);
template class Backbone<float>;
template class Backbone<double>;

}  // namespace gsp
