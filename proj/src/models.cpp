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


#include "gsp/models.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

#include "gsp/rng.hpp"
#include "gsp/tensor_io.hpp"

namespace gsp {

namespace {

constexpr char kCheckpointMagic[4] = {'G', 'S', 'P', 'C'};

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::Early: return "early";
    case Variant::Late: return "late";
  }
  return "baseline";
}

Variant parse_variant(std::string_view name) {
  if (name == "baseline") return Variant::Baseline;
  if (name == "early") return Variant::Early;
  if (name == "late") return Variant::Late;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected baseline, early or late)");
}

std::vector<std::size_t> ModelConfig::alignment_dims() const {
  if (!align.empty()) return align;
  const std::size_t d = backbone.feature_dim();
  return {d, d / 2};
}

void ModelConfig::validate() const {
  backbone.validate();
  if (backbone.input_channels != input_channels()) {
    throw ConfigError("variant " + std::string(variant_name(variant)) + " needs " + std::to_string(input_channels()) +
                      " input channels, backbone has " + std::to_string(backbone.input_channels));
  }
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (variant != Variant::Late) return;
  if (heads == 0 || backbone.feature_dim() % heads != 0) {
    throw ConfigError("attention heads (" + std::to_string(heads) + ") must divide the feature dim (" +
                      std::to_string(backbone.feature_dim()) + ")");
  }
  std::size_t prev = 2 * backbone.feature_dim();
  for (std::size_t d : alignment_dims()) {
    if (d == 0 || d >= prev) {
      throw ConfigError("alignment dims must be positive and strictly decreasing from the fused width " +
                        std::to_string(2 * backbone.feature_dim()));
    }
    prev = d;
  }
  if (pose_hidden.size() != 2) throw ConfigError("pose MLP needs exactly two hidden widths");
}

template <typename T>
FusionModel<T>::FusionModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.backbone.input_channels = cfg_.input_channels();
  cfg_.validate();
  Rng rng(seed);
  backbone_ = Backbone<T>(cfg_.backbone, rng);
  const std::size_t d = cfg_.backbone.feature_dim();
  std::size_t head_in = d;
  if (cfg_.variant == Variant::Late) {
    pose_ = PoseMlpParams<T>::make(d, cfg_.pose_relu3, rng, cfg_.pose_hidden);
    attn_ = AttentionParams<T>::make(d, cfg_.heads, rng);
    head_in = 2 * d;
    for (std::size_t width : cfg_.alignment_dims()) {
      align_weights_.push_back(fan_in_uniform<T>({width, head_in}, head_in, rng));
      align_biases_.push_back(Tensor<T>::zeros({width}));
      align_norms_.push_back(BatchNormState<T>::make(width));
      head_in = width;
    }
  }
  classifier_weight_ = fan_in_uniform<T>({cfg_.num_classes, head_in}, head_in, rng);
  classifier_bias_ = Tensor<T>::zeros({cfg_.num_classes});
  for (auto& t : tensors()) {
    if (t.trainable) t.value.set_requires_grad(true);
  }
  set_mode(Mode::Train);
}

template <typename T>
Tensor<T> FusionModel<T>::forward(Tape<T>& tape, const ModelInput<T>& in, std::uint64_t dropout_seed) const {
  switch (cfg_.variant) {
    case Variant::Baseline: return baseline_forward(tape, in.frames);
    case Variant::Early: return early_fusion_forward(tape, in.frames, in.heatmaps);
    case Variant::Late: return late_fusion_forward(tape, in.frames, in.poses, dropout_seed);
  }
  throw ContractError("unknown variant");
}

template <typename T>
Tensor<T> FusionModel<T>::baseline_forward(Tape<T>& tape, const Tensor<T>& frames) const {
  if (cfg_.variant != Variant::Baseline) throw ContractError("baseline_forward on a non-baseline model");
  return linear(tape, backbone_.forward(tape, frames), classifier_weight_, classifier_bias_);
}

template <typename T>
Tensor<T> FusionModel<T>::early_fusion_forward(Tape<T>& tape, const Tensor<T>& frames, const Tensor<T>& heatmaps) const {
  if (cfg_.variant != Variant::Early) throw ContractError("early_fusion_forward on a non-early model");
  if (frames.ndim() != 5 || heatmaps.ndim() != 5 || frames.dim(2) != 3 || heatmaps.dim(2) != 1) {
    throw ShapeError("early fusion: expected frames [N,S,3,H,W] and heatmaps [N,S,1,H,W], got " +
                     shape_str(frames.shape()) + " and " + shape_str(heatmaps.shape()));
  }
  if (frames.dim(0) != heatmaps.dim(0) || frames.dim(1) != heatmaps.dim(1) || frames.dim(3) != heatmaps.dim(3) ||
      frames.dim(4) != heatmaps.dim(4)) {
    throw ShapeError("early fusion: heatmaps " + shape_str(heatmaps.shape()) + " do not match frames " +
                     shape_str(frames.shape()));
  }
  const Tensor<T> x = concat(tape, {frames, heatmaps}, 2);
  return linear(tape, backbone_.forward(tape, x), classifier_weight_, classifier_bias_);
}

template <typename T>
Tensor<T> FusionModel<T>::late_fusion_forward(Tape<T>& tape, const Tensor<T>& frames, const Tensor<T>& poses,
                                              std::uint64_t dropout_seed, FusedRepresentation<T>* fused) const {
  if (cfg_.variant != Variant::Late) throw ContractError("late_fusion_forward on a non-late model");
  if (poses.ndim() != 3 || poses.dim(2) != kPoseFeatureDim) {
    throw ShapeError("late fusion: expected poses [N,S,34], got " + shape_str(poses.shape()));
  }
  if (frames.ndim() != 5 || frames.dim(0) != poses.dim(0) || frames.dim(1) != poses.dim(1)) {
    throw ShapeError("late fusion: frames " + shape_str(frames.shape()) + " and poses " + shape_str(poses.shape()) +
                     " disagree on batch or segments");
  }
  const Tensor<T> rgb = backbone_.forward(tape, frames);
  const Tensor<T> pose = mean_axis(tape, pose_embed(tape, poses, pose_), 1);
  return late_fusion_head(tape, rgb, pose, dropout_seed, fused);
}

template <typename T>
Tensor<T> FusionModel<T>::late_fusion_head(Tape<T>& tape, const Tensor<T>& rgb_raw, const Tensor<T>& pose_raw,
                                           std::uint64_t dropout_seed, FusedRepresentation<T>* fused) const {
  const std::size_t d = cfg_.backbone.feature_dim();
  if (rgb_raw.ndim() != 2 || rgb_raw.shape() != pose_raw.shape() || rgb_raw.dim(1) != d) {
    throw ShapeError("late fusion head: expected two [N," + std::to_string(d) + "] features, got " +
                     shape_str(rgb_raw.shape()) + " and " + shape_str(pose_raw.shape()));
  }
  const std::size_t n = rgb_raw.dim(0);
  const Tensor<T> rgb = l2_normalize(tape, rgb_raw);
  const Tensor<T> pose = l2_normalize(tape, pose_raw);
  const Tensor<T> tokens = concat(tape, {reshape(tape, rgb, {n, 1, d}), reshape(tape, pose, {n, 1, d})}, 1);
  if (fused != nullptr) *fused = {rgb, pose, tokens};
  const Tensor<T> attended = add(tape, tokens, multi_head_attention(tape, tokens, attn_));
  Tensor<T> h = reshape(tape, attended, {n, 2 * d});
  for (std::size_t l = 0; l < align_weights_.size(); ++l) {
    h = linear(tape, h, align_weights_[l], align_biases_[l]);
    h = batch_norm(tape, h, align_norms_[l]);
    h = relu(tape, h);
    h = dropout(tape, h, cfg_.dropout, mode_, derive_seed(dropout_seed, l + 1));
  }
  return linear(tape, h, classifier_weight_, classifier_bias_);
}

template <typename T>
void FusionModel<T>::set_mode(Mode mode) {
  mode_ = mode;
  backbone_.set_mode(mode);
  for (auto& bn : align_norms_) bn.mode = mode;
}

template <typename T>
TensorList<T> FusionModel<T>::tensors() const {
  TensorList<T> out;
  backbone_.collect(out, "backbone.");
  if (cfg_.variant == Variant::Late) {
    pose_.collect(out, "pose.");
    const std::pair<const char*, const Tensor<T>*> attn[] = {
        {"wq", &attn_.wq}, {"bq", &attn_.bq}, {"wk", &attn_.wk}, {"bk", &attn_.bk},
        {"wv", &attn_.wv}, {"bv", &attn_.bv}, {"wo", &attn_.wo}, {"bo", &attn_.bo}};
    for (const auto& [name, t] : attn) out.push_back({std::string("attention.") + name, *t, true, name[0] == 'w'});
    for (std::size_t l = 0; l < align_weights_.size(); ++l) {
      const std::string p = "align" + std::to_string(l + 1) + ".";
      out.push_back({p + "weight", align_weights_[l], true, true});
      out.push_back({p + "bias", align_biases_[l], true, false});
      out.push_back({p + "bn.gamma", align_norms_[l].gamma, true, false});
      out.push_back({p + "bn.beta", align_norms_[l].beta, true, false});
      out.push_back({p + "bn.running_mean", align_norms_[l].running_mean, false, false});
      out.push_back({p + "bn.running_var", align_norms_[l].running_var, false, false});
    }
  }
  out.push_back({"classifier.weight", classifier_weight_, true, true});
  out.push_back({"classifier.bias", classifier_bias_, true, false});
  return out;
}

template <typename T>
std::vector<int> predict_label(const Tensor<T>& logits) {
  if (logits.ndim() != 2 || logits.dim(1) == 0) {
    throw ShapeError("predict_label: expected [N,C] logits, got " + shape_str(logits.shape()));
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.ptr() + i * c;
    // max_element returns the first maximum, which is the tie rule.
    labels[i] = static_cast<int>(std::max_element(row, row + c) - row);
  }
  return labels;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const FusionModel<T>& model) {
  const auto all = model.tensors();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic, 4);
  le::write_u16(out, kCheckpointVersion);
  le::write_u32(out, static_cast<std::uint32_t>(all.size()));
  for (const auto& t : all) {
    le::write_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_tensor(out, t.value);
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, FusionModel<T>& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  const std::string what = path.string();
  std::uint64_t offset = 0;
  char magic[4];
  le::read_bytes(in, magic, 4, offset, what);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError(what + ": bad checkpoint magic at byte offset 0 (expected GSPC)");
  }
  const std::uint16_t version = le::read_u16(in, offset, what);
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version) + " at byte offset 4");
  }
  const std::uint32_t count = le::read_u32(in, offset, what);
  std::map<std::string, AnyTensor> stored;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = le::read_u32(in, offset, what);
    if (len > 4096) throw FormatError(what + ": implausible name length at byte offset " + std::to_string(offset - 4));
    std::string name(len, '\0');
    le::read_bytes(in, name.data(), len, offset, what);
    const std::uint64_t start = offset;
    AnyTensor t = read_tensor(in, start, what);
    offset += std::visit(
        [](const auto& r) { return 9 + 4 * r.ndim() + r.numel() * sizeof(typename std::decay_t<decltype(r)>::value_type); },
        t);
    if (!stored.emplace(name, std::move(t)).second) throw FormatError(what + ": duplicate tensor '" + name + "'");
  }
  const auto all = model.tensors();
  if (stored.size() != all.size()) {
    throw FormatError(what + ": checkpoint holds " + std::to_string(stored.size()) + " tensors, model has " +
                      std::to_string(all.size()));
  }
  for (const auto& t : all) {
    auto it = stored.find(t.name);
    if (it == stored.end()) throw FormatError(what + ": missing tensor '" + t.name + "'");
    const Tensor<T> src = as_precision<T>(it->second);
    if (src.shape() != t.value.shape()) {
      throw FormatError(what + ": tensor '" + t.name + "' has shape " + shape_str(src.shape()) + ", model expects " +
                        shape_str(t.value.shape()));
    }
  }
  for (const auto& t : all) {
    const Tensor<T> src = as_precision<T>(stored.at(t.name));
    Tensor<T> dst = t.value;
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
  }
}

template class FusionModel<float>;
template class FusionModel<double>;
template std::vector<int> predict_label(const Tensor<float>&);
template std::vector<int> predict_label(const Tensor<double>&);
template void save_checkpoint(const std::filesystem::path&, const FusionModel<float>&);
template void save_checkpoint(const std::filesystem::path&, const FusionModel<double>&);
template void load_checkpoint(const std::filesystem::path&, FusionModel<float>&);
template void load_checkpoint(const std::filesystem::path&, FusionModel<double>&);

}  // namespace gsp
