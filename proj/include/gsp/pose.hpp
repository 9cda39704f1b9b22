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

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gsp/ops.hpp"
#include "gsp/params.hpp"

namespace gsp {

inline constexpr std::size_t kNumKeypoints = 17;
inline constexpr std::size_t kPoseFeatureDim = 2 * kNumKeypoints;

/// COCO keypoint order.
enum class Joint : std::size_t {
  Nose, LeftEye, RightEye, LeftEar, RightEar,
  LeftShoulder, RightShoulder, LeftElbow, RightElbow, LeftWrist, RightWrist,
  LeftHip, RightHip, LeftKnee, RightKnee, LeftAnkle, RightAnkle,
};

constexpr std::size_t idx(Joint j) { return static_cast<std::size_t>(j); }

std::string_view joint_name(std::size_t k);

struct Keypoint {
  double x = 0.0;  // normalized to frame width
  double y = 0.0;  // normalized to frame height
  bool visible = false;
};

/// One frame of 17 keypoints. Invisible keypoints carry x = y = 0.
struct KeypointFrame {
  std::array<Keypoint, kNumKeypoints> points{};

  std::size_t visible_count() const;
  /// (x, y) interleaved in COCO order; invisible keypoints contribute (0, 0).
  std::array<double, kPoseFeatureDim> features() const;
};

struct PoseSequence {
  std::vector<KeypointFrame> frames;
  std::size_t frame_count() const { return frames.size(); }
};

/// Keypoint text format, one line per frame:
///   frame_index k0x k0y k0v ... k16x k16y k16v
/// Lines starting with '#' are comments. Coordinates are written in shortest
/// round-trip form, so write -> load is bit-exact.
void write_keypoints(const std::filesystem::path& path, const PoseSequence& poses);

/// Throws FormatError on frame-count mismatch (reporting both counts) or a
/// line without exactly 17 keypoints (reporting the frame), RangeError for a
/// coordinate outside [-0.5, 1.5], IoError when the file cannot be read.
PoseSequence load_keypoints(const std::filesystem::path& path, std::size_t expected_frames);

enum class HeatmapCombine { Max, Sum };

struct HeatmapOptions {
  double sigma = 2.0;  // pixels
  HeatmapCombine combine = HeatmapCombine::Max;
};

/// Gaussian keypoint heatmap [1, H, W]. Pixel (i, j) has its center at
/// continuous coordinates (j + 0.5, i + 0.5); a keypoint sits at
/// (x * W, y * H). Visible keypoints combine by per-pixel max (or a sum
/// clipped to 1). Throws ConfigError for sigma <= 0 or an empty raster.
template <typename T>
Tensor<T> rasterize_heatmap(const KeypointFrame& frame, std::size_t width, std::size_t height,
                            const HeatmapOptions& opts = {});

namespace reference {

/// Serial version of rasterize_heatmap (max combination), kept for testing.
template <typename T>
Tensor<T> rasterize_heatmap(const KeypointFrame& frame, std::size_t width, std::size_t height, double sigma);

}  // namespace reference

/// Three fully connected layers over 34 pose features.
template <typename T>
struct PoseMlpParams {
  std::vector<std::size_t> dims{kPoseFeatureDim, 64, 128, 128};
  std::vector<Tensor<T>> weights;  // [dims[i+1], dims[i]]
  std::vector<Tensor<T>> biases;   // [dims[i+1]]
  bool relu_after_last = false;    // relu after all three layers instead of the first two

  static PoseMlpParams make(std::size_t out_dim, bool relu_after_last, Rng& rng,
                            std::vector<std::size_t> hidden = {64, 128});
  std::size_t out_dim() const { return dims.back(); }
  void collect(TensorList<T>& out, const std::string& prefix) const;
};

/// poses [N, S, 34] -> embeddings [N, S, out_dim]:
/// linear -> relu -> linear -> relu -> linear (-> relu when relu_after_last).
template <typename T>
Tensor<T> pose_embed(Tape<T>& tape, const Tensor<T>& poses, const PoseMlpParams<T>& p);

}  // namespace gsp
