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

#include "gsp/pose.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace gsp {

namespace {

constexpr std::array<std::string_view, kNumKeypoints> kJointNames = {
    "nose",       "left_eye",    "right_eye",  "left_ear",   "right_ear",  "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist", "left_hip",
    "right_hip",  "left_knee",   "right_knee", "left_ankle", "right_ankle"};

constexpr double kMinCoord = -0.5;
constexpr double kMaxCoord = 1.5;

void append_number(std::string& line, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, res.ptr);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw FormatError(where + ": cannot parse number '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::string_view joint_name(std::size_t k) { return kJointNames.at(k); }

std::size_t KeypointFrame::visible_count() const {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const Keypoint& k) { return k.visible; }));
}

std::array<double, kPoseFeatureDim> KeypointFrame::features() const {
  std::array<double, kPoseFeatureDim> f{};
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    if (!points[k].visible) continue;
    f[2 * k] = points[k].x;
    f[2 * k + 1] = points[k].y;
  }
  return f;
}

void write_keypoints(const std::filesystem::path& path, const PoseSequence& poses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open keypoint file for writing: " + path.string());
  out << "# frame_index then x y v for 17 COCO keypoints\n";
  std::string line;
  for (std::size_t f = 0; f < poses.frames.size(); ++f) {
    line = std::to_string(f);
    for (const auto& kp : poses.frames[f].points) {
      line += ' ';
      append_number(line, kp.visible ? kp.x : 0.0);
      line += ' ';
      append_number(line, kp.visible ? kp.y : 0.0);
      line += kp.visible ? " 1" : " 0";
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("failed writing keypoint file: " + path.string());
}

PoseSequence load_keypoints(const std::filesystem::path& path, std::size_t expected_frames) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open keypoint file: " + path.string());
  PoseSequence seq;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    const std::size_t frame = seq.frames.size();
    const std::string where = path.string() + ":" + std::to_string(line_no) + " (frame " + std::to_string(frame) + ")";
    const double index = parse_double(toks[0], where);
    if (index != static_cast<double>(frame)) {
      throw FormatError(where + ": frame index " + std::string(toks[0]) + " out of sequence");
    }
    if (toks.size() != 1 + 3 * kNumKeypoints) {
      throw FormatError(where + ": expected 17 keypoints (51 values), found " + std::to_string(toks.size() - 1) +
                        " values");
    }
    KeypointFrame kf;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      const double x = parse_double(toks[1 + 3 * k], where);
      const double y = parse_double(toks[2 + 3 * k], where);
      const double v = parse_double(toks[3 + 3 * k], where);
      if (v != 0.0 && v != 1.0) throw FormatError(where + ": visibility flag must be 0 or 1");
      if (x < kMinCoord || x > kMaxCoord || y < kMinCoord || y > kMaxCoord) {
        throw RangeError(where + ": keypoint " + std::string(joint_name(k)) + " at (" + std::to_string(x) + ", " +
                         std::to_string(y) + ") lies outside [-0.5, 1.5]");
      }
      kf.points[k].visible = v == 1.0;
      kf.points[k].x = kf.points[k].visible ? x : 0.0;
      kf.points[k].y = kf.points[k].visible ? y : 0.0;
    }
    seq.frames.push_back(kf);
  }
  if (seq.frames.size() != expected_frames) {
    throw FormatError(path.string() + ": found " + std::to_string(seq.frames.size()) + " frames, expected " +
                      std::to_string(expected_frames));
  }
  return seq;
}

template <typename T>
Tensor<T> rasterize_heatmap(const KeypointFrame& frame, std::size_t width, std::size_t height,
                            const HeatmapOptions& opts) {
  if (!(opts.sigma > 0.0)) throw ConfigError("rasterize_heatmap: sigma must be positive");
  if (width == 0 || height == 0) throw ConfigError("rasterize_heatmap: width and height must be >= 1");
  std::vector<std::array<double, 2>> centers;
  for (const auto& kp : frame.points) {
    if (kp.visible) centers.push_back({kp.x * static_cast<double>(width), kp.y * static_cast<double>(height)});
  }
  Tensor<T> out(Shape{1, height, width});
  if (centers.empty()) return out;
  const double inv = 1.0 / (2.0 * opts.sigma * opts.sigma);
  const bool use_max = opts.combine == HeatmapCombine::Max;
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(height);
  T* dst = out.ptr();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const double py = static_cast<double>(i) + 0.5;
    for (std::size_t j = 0; j < width; ++j) {
      const double px = static_cast<double>(j) + 0.5;
      double acc = 0.0;
      for (const auto& c : centers) {
        const double dx = px - c[0], dy = py - c[1];
        const double v = std::exp(-(dx * dx + dy * dy) * inv);
        acc = use_max ? std::max(acc, v) : acc + v;
      }
      dst[static_cast<std::size_t>(i) * width + j] = static_cast<T>(std::min(acc, 1.0));
    }
  }
  return out;
}

namespace reference {

template <typename T>
Tensor<T> rasterize_heatmap(const KeypointFrame& frame, std::size_t width, std::size_t height, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("rasterize_heatmap: sigma must be positive");
  Tensor<T> out(Shape{1, height, width});
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      double best = 0.0;
      for (const auto& kp : frame.points) {
        if (!kp.visible) continue;
        const double dx = (static_cast<double>(j) + 0.5) - kp.x * static_cast<double>(width);
        const double dy = (static_cast<double>(i) + 0.5) - kp.y * static_cast<double>(height);
        best = std::max(best, std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
      }
      out[i * width + j] = static_cast<T>(best);
    }
  }
  return out;
}

}  // namespace reference

template <typename T>
PoseMlpParams<T> PoseMlpParams<T>::make(std::size_t out_dim, bool relu_after_last, Rng& rng,
                                        std::vector<std::size_t> hidden) {
  if (hidden.size() != 2) throw ConfigError("pose MLP: expected two hidden widths");
  PoseMlpParams p;
  p.dims = {kPoseFeatureDim, hidden[0], hidden[1], out_dim};
  p.relu_after_last = relu_after_last;
  for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
    if (p.dims[l + 1] == 0) throw ConfigError("pose MLP: layer widths must be positive");
    p.weights.push_back(fan_in_uniform<T>({p.dims[l + 1], p.dims[l]}, p.dims[l], rng));
    p.biases.push_back(Tensor<T>::zeros({p.dims[l + 1]}));
  }
  return p;
}

template <typename T>
void PoseMlpParams<T>::collect(TensorList<T>& out, const std::string& prefix) const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back({prefix + "fc" + std::to_string(l + 1) + ".weight", weights[l], true, true});
    out.push_back({prefix + "fc" + std::to_string(l + 1) + ".bias", biases[l], true, false});
  }
}

template <typename T>
Tensor<T> pose_embed(Tape<T>& tape, const Tensor<T>& poses, const PoseMlpParams<T>& p) {
  if (poses.ndim() != 3 || poses.dim(2) != kPoseFeatureDim) {
    throw ShapeError("pose_embed: expected [N,S,34], got " + shape_str(poses.shape()));
  }
  const std::size_t n = poses.dim(0), s = poses.dim(1);
  Tensor<T> h = reshape(tape, poses, {n * s, kPoseFeatureDim});
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    h = linear(tape, h, p.weights[l], p.biases[l]);
    const bool last = l + 1 == p.weights.size();
    if (!last || p.relu_after_last) h = relu(tape, h);
  }
  return reshape(tape, h, {n, s, p.out_dim()});
}

template Tensor<float> rasterize_heatmap(const KeypointFrame&, std::size_t, std::size_t, const HeatmapOptions&);
template Tensor<double> rasterize_heatmap(const KeypointFrame&, std::size_t, std::size_t, const HeatmapOptions&);
template Tensor<float> reference::rasterize_heatmap(const KeypointFrame&, std::size_t, std::size_t, double);
template Tensor<double> reference::rasterize_heatmap(const KeypointFrame&, std::size_t, std::size_t, double);
template struct PoseMlpParams<float>;
template struct PoseMlpParams<double>;
template Tensor<float> pose_embed(Tape<float>&, const Tensor<float>&, const PoseMlpParams<float>&);
template Tensor<double> pose_embed(Tape<double>&, const Tensor<double>&, const PoseMlpParams<double>&);

}  // namespace gsp
