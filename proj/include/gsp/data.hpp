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
#include <utility>
#include <vector>

#include "gsp/pose.hpp"
#include "gsp/tensor.hpp"

namespace gsp {

enum class SegmentMode { Center, Random };

/// TSN-style sparse sampling: the clip is cut into S equal spans and one
/// index is taken per span. Center mode picks floor((i + 0.5) * T / S);
/// random mode draws uniformly inside span i, which is
/// [floor(i*T/S), max(floor((i+1)*T/S), floor(i*T/S) + 1)).
/// T < S repeats indices. Throws ConfigError for T == 0 or S == 0.
std::vector<std::size_t> sample_segment_indices(std::size_t frames, std::size_t segments, SegmentMode mode,
                                                std::uint64_t seed = 0);

enum class SynthMode { PoseDominant, AppearanceCorrelated };

std::string_view synth_mode_name(SynthMode m);
SynthMode parse_synth_mode(std::string_view name);

struct SyntheticConfig {
  std::size_t num_samples = 500;
  double fall_fraction = 0.5;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t frames = 103;
  SynthMode mode = SynthMode::PoseDominant;
  double noise = 0.3;  // per-pixel Gaussian noise std
  std::uint64_t seed = 7;

  void validate() const;
  /// Number of label-1 clips: round(num_samples * fall_fraction).
  std::size_t fall_count() const;
};

struct VideoSample {
  std::string id;
  Tensor<float> frames;  // [T, 3, H, W], values in [0, 1]
  PoseSequence poses;    // T frames
  int label = 0;         // 1 = fall
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path frames_path;     // relative to the manifest directory
  std::filesystem::path keypoints_path;  // relative to the manifest directory
  int label = 0;
};

enum class Split { All, Train, Val };

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Split split = Split::All;
  std::filesystem::path root;  // directory the entry paths are relative to

  std::size_t size() const { return entries.size(); }
  std::size_t count_label(int label) const;
};

/// Fall predicate over keypoints alone: some frame has hip-center y above
/// kFallHipY and some consecutive pair of frames rotates the torso (hip
/// center to shoulder center) by more than kFallAngularStep radians.
inline constexpr double kFallHipY = 0.75;
inline constexpr double kFallAngularStep = 0.15;
bool fall_predicate(const PoseSequence& poses);

/// Labels for every sample: fall_count() ones placed by a seeded shuffle.
std::vector<int> synthetic_labels(const SyntheticConfig& cfg);

/// Renders sample `index` with the given label. Pure function of
/// (cfg, index, label). Throws ContractError if the rendered keypoints
/// disagree with the fall predicate.
VideoSample render_synthetic_sample(const SyntheticConfig& cfg, std::size_t index, int label);

/// Writes clips/<id>.gspt, keypoints/<id>.txt and manifest.tsv under
/// out_dir. Deterministic: equal configs give byte-identical files.
DatasetManifest generate_synthetic_dataset(const SyntheticConfig& cfg, const std::filesystem::path& out_dir);

/// Manifest lines: id<TAB>frames_path<TAB>keypoints_path<TAB>label.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
/// Throws FormatError (with line number) on malformed lines, duplicate ids or
/// labels outside {0,1}; IoError when a referenced file is missing.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Stratified by label, deterministic under seed; per class
/// round(count * val_fraction) entries go to validation. Both parts keep the
/// manifest order. Throws ConfigError unless 0 <= val_fraction < 1.
std::pair<DatasetManifest, DatasetManifest> dataset_split(const DatasetManifest& manifest, double val_fraction,
                                                          std::uint64_t seed);

VideoSample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry);
std::vector<VideoSample> load_samples(const DatasetManifest& manifest);

}  // namespace gsp
