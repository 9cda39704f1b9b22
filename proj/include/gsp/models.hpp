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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gsp/gsf.hpp"
#include "gsp/ops.hpp"
#include "gsp/params.hpp"
#include "gsp/pose.hpp"

namespace gsp {

enum class Variant { Baseline, Early, Late };

std::string_view variant_name(Variant v);
/// Throws ConfigError for anything but baseline / early / late.
Variant parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::Baseline;
  BackboneConfig backbone;
  std::size_t heads = 4;
  /// Alignment widths after attention; empty means halving from the fused
  /// width (2 * feature_dim -> feature_dim -> feature_dim / 2).
  std::vector<std::size_t> align;
  double dropout = 0.5;
  std::size_t num_classes = 2;
  std::vector<std::size_t> pose_hidden{64, 128};
  bool pose_relu3 = false;

  /// Input channels implied by the variant: 4 for early fusion, else 3.
  std::size_t input_channels() const { return variant == Variant::Early ? 4 : 3; }
  std::vector<std::size_t> alignment_dims() const;
  void validate() const;
};

/// Batched model inputs. Which fields are read depends on the variant.
template <typename T>
struct ModelInput {
  Tensor<T> frames;    // [N, S, 3, H, W]
  Tensor<T> heatmaps;  // [N, S, 1, H, W]  early fusion
  Tensor<T> poses;     // [N, S, 34]       late fusion
};

/// Intermediate late-fusion representation.
template <typename T>
struct FusedRepresentation {
  Tensor<T> rgb_feature;   // [N, D], L2-normalized
  Tensor<T> pose_feature;  // [N, D], L2-normalized
  Tensor<T> tokens;        // [N, 2, D]
};

/// RGB-only baseline, early-fusion and late-fusion classifiers.
template <typename T>
class FusionModel {
 public:
  /// Builds and initializes every parameter from `seed`. The backbone is drawn
  /// first, so all variants built from one seed share RGB backbone weights.
  FusionModel(ModelConfig cfg, std::uint64_t seed);

  /// Dispatches on the configured variant.
  Tensor<T> forward(Tape<T>& tape, const ModelInput<T>& in, std::uint64_t dropout_seed = 0) const;

  /// backbone -> linear(feature_dim -> classes).
  Tensor<T> baseline_forward(Tape<T>& tape, const Tensor<T>& frames) const;

  /// Channel-concatenates RGB and heatmap, then as baseline with a 4-channel stem.
  Tensor<T> early_fusion_forward(Tape<T>& tape, const Tensor<T>& frames, const Tensor<T>& heatmaps) const;

  /// Two streams, L2 normalization, attention over the two modality tokens
  /// with a residual connection, alignment layers, classifier.
  Tensor<T> late_fusion_forward(Tape<T>& tape, const Tensor<T>& frames, const Tensor<T>& poses,
                                std::uint64_t dropout_seed = 0, FusedRepresentation<T>* fused = nullptr) const;

  /// Late-fusion head over raw (unnormalized) stream features [N, D].
  Tensor<T> late_fusion_head(Tape<T>& tape, const Tensor<T>& rgb_raw, const Tensor<T>& pose_raw,
                             std::uint64_t dropout_seed = 0, FusedRepresentation<T>* fused = nullptr) const;

  void set_mode(Mode mode);
  Mode mode() const { return mode_; }

  /// Every named tensor, running statistics included.
  TensorList<T> tensors() const;
  /// Trainable tensors only.
  TensorList<T> parameters() const { return trainable_only(tensors()); }

  const ModelConfig& config() const { return cfg_; }
  Backbone<T>& backbone() { return backbone_; }
  const Backbone<T>& backbone() const { return backbone_; }
  PoseMlpParams<T>& pose_mlp() { return pose_; }
  AttentionParams<T>& attention() { return attn_; }

 private:
  ModelConfig cfg_;
  Mode mode_ = Mode::Train;
  Backbone<T> backbone_;
  PoseMlpParams<T> pose_;
  AttentionParams<T> attn_;
  std::vector<Tensor<T>> align_weights_;
  std::vector<Tensor<T>> align_biases_;
  mutable std::vector<BatchNormState<T>> align_norms_;
  Tensor<T> classifier_weight_;
  Tensor<T> classifier_bias_;
};

/// Row-wise argmax; ties resolve to the lower class index.
template <typename T>
std::vector<int> predict_label(const Tensor<T>& logits);

/// Checkpoint file: "GSPC" | u16 version | u32 count | count x (u32 name
/// length, name bytes, tensor record). Little-endian.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const FusionModel<T>& model);

/// Overwrites every model tensor from the file. Throws FormatError on bad
/// magic, unknown version, a missing or extra name, or a shape mismatch.
template <typename T>
void load_checkpoint(const std::filesystem::path& path, FusionModel<T>& model);

inline constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace gsp
