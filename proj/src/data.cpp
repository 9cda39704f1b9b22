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


#include "gsp/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "gsp/rng.hpp"
#include "gsp/tensor_io.hpp"

namespace gsp {

std::vector<std::size_t> sample_segment_indices(std::size_t frames, std::size_t segments, SegmentMode mode,
                                                std::uint64_t seed) {
  if (frames == 0 || segments == 0) throw ConfigError("sample_segment_indices: frames and segments must be >= 1");
  std::vector<std::size_t> out(segments);
  Rng rng(seed);
  for (std::size_t i = 0; i < segments; ++i) {
    if (mode == SegmentMode::Center) {
      // floor((i + 0.5) * T / S) in exact integer arithmetic.
      out[i] = (2 * i + 1) * frames / (2 * segments);
    } else {
      const std::size_t lo = i * frames / segments;
      const std::size_t hi = std::max((i + 1) * frames / segments, lo + 1);
      out[i] = lo + static_cast<std::size_t>(rng.below(hi - lo));
    }
  }
  return out;
}

std::string_view synth_mode_name(SynthMode m) {
  return m == SynthMode::PoseDominant ? "pose-dominant" : "appearance-correlated";
}

SynthMode parse_synth_mode(std::string_view name) {
  if (name == "pose-dominant") return SynthMode::PoseDominant;
  if (name == "appearance-correlated") return SynthMode::AppearanceCorrelated;
  throw ConfigError("unknown data mode '" + std::string(name) + "' (expected pose-dominant or appearance-correlated)");
}

void SyntheticConfig::validate() const {
  if (num_samples == 0) throw ConfigError("synthetic data: num_samples must be >= 1");
  if (!(fall_fraction > 0.0 && fall_fraction < 1.0)) throw ConfigError("synthetic data: fall_fraction must lie in (0, 1)");
  if (height < 8 || width < 8) throw ConfigError("synthetic data: resolution must be at least 8x8");
  if (frames < 16) throw ConfigError("synthetic data: clips need at least 16 frames");
  if (!(noise >= 0.0)) throw ConfigError("synthetic data: noise must be >= 0");
}

std::size_t SyntheticConfig::fall_count() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(num_samples) * fall_fraction));
}

std::size_t DatasetManifest::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [label](const ManifestEntry& e) { return e.label == label; }));
}

namespace {

struct Vec2 {
  double x = 0.0, y = 0.0;
};
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

Vec2 center(const KeypointFrame& f, Joint a, Joint b) {
  const auto& p = f.points[idx(a)];
  const auto& q = f.points[idx(b)];
  return {0.5 * (p.x + q.x), 0.5 * (p.y + q.y)};
}

double torso_angle(const KeypointFrame& f) {
  const Vec2 hip = center(f, Joint::LeftHip, Joint::RightHip);
  const Vec2 sh = center(f, Joint::LeftShoulder, Joint::RightShoulder);
  return std::atan2(sh.x - hip.x, hip.y - sh.y);
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

double reflect(double v, double lo, double hi) {
  const double span = hi - lo;
  double u = std::fmod(v - lo, 2.0 * span);
  if (u < 0) u += 2.0 * span;
  return lo + (u <= span ? u : 2.0 * span - u);
}

// Skater body lengths in normalized units.
struct Proportions {
  double torso, neck, upper_arm, forearm, thigh, shin, shoulder_half, hip_half, head_radius;
};

struct BodyState {
  double hx = 0.5, hy = 0.58;
  double theta = 0.0;  // torso angle, 0 upright
  double width = 1.0;  // lateral foreshortening while spinning
  double arm_l = 0.5, arm_r = 0.5, elbow_l = 0.2, elbow_r = 0.2;
  double leg_l = 0.1, leg_r = 0.1, knee_l = 0.1, knee_r = 0.1;
};

KeypointFrame pose_from_state(const BodyState& b, const Proportions& p) {
  const Vec2 up{std::sin(b.theta), -std::cos(b.theta)};
  const Vec2 down = -1.0 * up;
  const Vec2 side{std::cos(b.theta) * b.width, std::sin(b.theta) * b.width};
  auto limb = [&](double angle, double sign) { return std::cos(angle) * down + (std::sin(angle) * sign) * side; };

  const Vec2 hip{b.hx, b.hy};
  const Vec2 sh = hip + p.torso * up;
  const Vec2 nose = sh + p.neck * up;
  std::array<Vec2, kNumKeypoints> j{};
  j[idx(Joint::Nose)] = nose;
  j[idx(Joint::LeftEye)] = nose + 0.3 * p.head_radius * up + 0.4 * p.head_radius * side;
  j[idx(Joint::RightEye)] = nose + 0.3 * p.head_radius * up - 0.4 * p.head_radius * side;
  j[idx(Joint::LeftEar)] = nose + 0.1 * p.head_radius * up + 0.9 * p.head_radius * side;
  j[idx(Joint::RightEar)] = nose + 0.1 * p.head_radius * up - 0.9 * p.head_radius * side;
  j[idx(Joint::LeftShoulder)] = sh + p.shoulder_half * side;
  j[idx(Joint::RightShoulder)] = sh - p.shoulder_half * side;
  j[idx(Joint::LeftElbow)] = j[idx(Joint::LeftShoulder)] + p.upper_arm * limb(b.arm_l, 1.0);
  j[idx(Joint::RightElbow)] = j[idx(Joint::RightShoulder)] + p.upper_arm * limb(b.arm_r, -1.0);
  j[idx(Joint::LeftWrist)] = j[idx(Joint::LeftElbow)] + p.forearm * limb(b.arm_l + b.elbow_l, 1.0);
  j[idx(Joint::RightWrist)] = j[idx(Joint::RightElbow)] + p.forearm * limb(b.arm_r + b.elbow_r, -1.0);
  j[idx(Joint::LeftHip)] = hip + p.hip_half * side;
  j[idx(Joint::RightHip)] = hip - p.hip_half * side;
  j[idx(Joint::LeftKnee)] = j[idx(Joint::LeftHip)] + p.thigh * limb(b.leg_l, 1.0);
  j[idx(Joint::RightKnee)] = j[idx(Joint::RightHip)] + p.thigh * limb(b.leg_r, -1.0);
  j[idx(Joint::LeftAnkle)] = j[idx(Joint::LeftKnee)] + p.shin * limb(b.leg_l - b.knee_l, 1.0);
  j[idx(Joint::RightAnkle)] = j[idx(Joint::RightKnee)] + p.shin * limb(b.leg_r - b.knee_r, -1.0);

  KeypointFrame f;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) f.points[k] = {j[k].x, j[k].y, true};
  return f;
}

enum class Motion { Glide, Jump, Crouch, Spin };

// Per-clip motion parameters, drawn once.
struct Script {
  Proportions body{};
  Motion motion = Motion::Glide;
  double hx0 = 0.5, hy0 = 0.58, vx = 0.0;
  double stride_period = 30, stride_phase = 0, stride_amp = 0.2;
  double lean_amp = 0.1, lean_period = 40, lean_phase = 0;
  double arm_base = 0.5, arm_swing = 0.3;
  double event_start = 30, event_len = 20, event_size = 0.05, crouch_lean = 0.0;
  bool fall = false;
  double fall_start = 40, fall_len = 5, fall_theta = 1.4, fall_hy = 0.86, fall_slide = 0.0;
};

Script draw_script(const SyntheticConfig& cfg, Rng& rng, bool fall) {
  const double t = static_cast<double>(cfg.frames);
  Script s;
  const double scale = rng.uniform(1.0, 1.25);
  s.body = {0.15 * scale,  0.07 * scale,  0.07 * scale,  0.065 * scale, 0.085 * scale,
            0.085 * scale, 0.055 * scale, 0.035 * scale, 0.03 * scale};
  s.motion = static_cast<Motion>(rng.below(4));
  s.hx0 = rng.uniform(0.35, 0.65);
  s.hy0 = rng.uniform(0.55, 0.6);
  s.vx = rng.uniform(-0.003, 0.003);
  s.stride_period = rng.uniform(20.0, 40.0);
  s.stride_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.stride_amp = rng.uniform(0.1, 0.3);
  s.lean_amp = rng.uniform(0.0, 0.15);
  s.lean_period = rng.uniform(30.0, 60.0);
  s.lean_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.arm_base = rng.uniform(0.3, 1.2);
  s.arm_swing = rng.uniform(0.1, 0.4);
  s.event_start = rng.uniform(0.1 * t, 0.6 * t);
  s.event_len = rng.uniform(0.15 * t, 0.3 * t);
  s.crouch_lean = rng.uniform(-0.25, 0.25);
  switch (s.motion) {
    case Motion::Jump: s.event_size = rng.uniform(0.06, 0.1); break;
    case Motion::Crouch: s.event_size = rng.uniform(0.04, 0.08); break;
    default: s.event_size = 0.0; break;
  }
  s.fall = fall;
  s.fall_start = std::floor(rng.uniform(0.25 * t, 0.55 * t));
  s.fall_len = static_cast<double>(3 + rng.below(5));
  s.fall_theta = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(1.35, 1.55);
  s.fall_hy = rng.uniform(0.84, 0.88);
  s.fall_slide = rng.uniform(-0.05, 0.05);
  return s;
}

// Upright skating, including the optional jump / crouch / spin event.
BodyState upright_state(const Script& s, double t) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  BodyState b;
  const double stride = std::sin(kTwoPi * t / s.stride_period + s.stride_phase);
  b.hx = reflect(s.hx0 + s.vx * t, 0.3, 0.7);
  b.hy = s.hy0 + 0.004 * stride;
  b.theta = s.lean_amp * std::sin(kTwoPi * t / s.lean_period + s.lean_phase);
  b.arm_l = s.arm_base + s.arm_swing * stride;
  b.arm_r = s.arm_base - s.arm_swing * stride;
  b.elbow_l = b.elbow_r = 0.3;
  b.leg_l = 0.1 + s.stride_amp * std::max(stride, 0.0);
  b.leg_r = 0.1 + s.stride_amp * std::max(-stride, 0.0);
  b.knee_l = b.knee_r = 0.15;

  const double u = (t - s.event_start) / s.event_len;
  if (u < 0.0 || u > 1.0) return b;
  switch (s.motion) {
    case Motion::Jump: {
      const double h = std::sin(std::numbers::pi * u);
      b.hy -= s.event_size * h;
      b.arm_l += 1.2 * h;
      b.arm_r += 1.2 * h;
      b.knee_l += 0.6 * h;
      b.knee_r += 0.6 * h;
      break;
    }
    case Motion::Crouch: {
      // Ramp down, hold, ramp up.
      const double depth = smoothstep(u / 0.3) * (1.0 - smoothstep((u - 0.7) / 0.3));
      b.hy += s.event_size * depth;
      b.theta += s.crouch_lean * depth;
      b.leg_l += 0.5 * depth;
      b.leg_r += 0.5 * depth;
      b.knee_l += 1.0 * depth;
      b.knee_r += 1.0 * depth;
      break;
    }
    case Motion::Spin: {
      b.width = 0.35 + 0.65 * std::abs(std::cos(3.0 * std::numbers::pi * u));
      b.arm_l = b.arm_r = 0.25;
      break;
    }
    case Motion::Glide: break;
  }
  return b;
}

BodyState body_state(const Script& s, double t) {
  if (!s.fall || t < s.fall_start) return upright_state(s, t);
  const BodyState pre = upright_state(s, s.fall_start);
  const double p = smoothstep((t - s.fall_start) / s.fall_len);
  const double since = t - s.fall_start;
  BodyState b = pre;
  b.theta = pre.theta * (1.0 - p) + s.fall_theta * p;
  b.hy = pre.hy * (1.0 - p) + s.fall_hy * p;
  b.hx = std::clamp(pre.hx + s.fall_slide * (1.0 - std::exp(-since / 10.0)), 0.3, 0.7);
  b.width = pre.width * (1.0 - p) + p;
  b.arm_l = pre.arm_l + p * (1.0 + 0.3 * std::sin(since / 5.0));
  b.arm_r = pre.arm_r + p * (0.8 + 0.3 * std::cos(since / 6.0));
  b.leg_l = pre.leg_l + 0.3 * p;
  b.leg_r = pre.leg_r + 0.2 * p;
  b.knee_l = pre.knee_l + 0.4 * p;
  b.knee_r = pre.knee_r + 0.2 * p;
  return b;
}

constexpr std::array<std::array<Joint, 2>, 14> kBones = {{
    {Joint::LeftShoulder, Joint::LeftElbow},   {Joint::LeftElbow, Joint::LeftWrist},
    {Joint::RightShoulder, Joint::RightElbow}, {Joint::RightElbow, Joint::RightWrist},
    {Joint::LeftHip, Joint::LeftKnee},         {Joint::LeftKnee, Joint::LeftAnkle},
    {Joint::RightHip, Joint::RightKnee},       {Joint::RightKnee, Joint::RightAnkle},
    {Joint::LeftShoulder, Joint::RightShoulder}, {Joint::LeftHip, Joint::RightHip},
    {Joint::LeftShoulder, Joint::LeftHip},     {Joint::RightShoulder, Joint::RightHip},
    {Joint::Nose, Joint::LeftShoulder},        {Joint::Nose, Joint::RightShoulder},
}};

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a, ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  const double t = len2 > 0.0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
  const Vec2 d = ap - t * ab;
  return std::sqrt(d.x * d.x + d.y * d.y);
}

// Coverage in [0, 1] of the figure over every pixel of an H x W frame.
std::vector<double> figure_coverage(const KeypointFrame& f, double head_radius, std::size_t h, std::size_t w) {
  std::vector<double> cov(h * w, 0.0);
  const double sx = static_cast<double>(w), sy = static_cast<double>(h);
  auto px = [&](Joint j) { return Vec2{f.points[idx(j)].x * sx, f.points[idx(j)].y * sy}; };
  const Vec2 head = px(Joint::Nose);
  const double r = head_radius * sx;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t jx = 0; jx < w; ++jx) {
      const Vec2 p{static_cast<double>(jx) + 0.5, static_cast<double>(i) + 0.5};
      double a = std::clamp(r + 0.5 - segment_distance(p, head, head), 0.0, 1.0);
      for (const auto& bone : kBones) a = std::max(a, std::clamp(1.0 - segment_distance(p, px(bone[0]), px(bone[1])), 0.0, 1.0));
      cov[i * w + jx] = a;
    }
  }
  return cov;
}

}  // namespace

bool fall_predicate(const PoseSequence& poses) {
  bool low_hips = false;
  bool spike = false;
  for (std::size_t t = 0; t < poses.frames.size(); ++t) {
    if (center(poses.frames[t], Joint::LeftHip, Joint::RightHip).y > kFallHipY) low_hips = true;
    if (t > 0) {
      double d = torso_angle(poses.frames[t]) - torso_angle(poses.frames[t - 1]);
      d = std::remainder(d, 2.0 * std::numbers::pi);
      if (std::abs(d) > kFallAngularStep) spike = true;
    }
  }
  return low_hips && spike;
}

std::vector<int> synthetic_labels(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t falls = cfg.fall_count();
  std::vector<int> labels(cfg.num_samples, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(falls), 1);
  Rng rng(derive_seed(cfg.seed, 0xA11));
  rng.shuffle(labels);
  return labels;
}

VideoSample render_synthetic_sample(const SyntheticConfig& cfg, std::size_t index, int label) {
  cfg.validate();
  if (label != 0 && label != 1) throw RangeError("render_synthetic_sample: label must be 0 or 1");
  Rng motion_rng(derive_seed(cfg.seed, index, 1));
  Rng detector_rng(derive_seed(cfg.seed, index, 2));
  Rng pixel_rng(derive_seed(cfg.seed, index, 3));
  const Script script = draw_script(cfg, motion_rng, label == 1);

  VideoSample s;
  char id[32];
  std::snprintf(id, sizeof(id), "clip_%05zu", index);
  s.id = id;
  s.label = label;
  s.poses.frames.resize(cfg.frames);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    KeypointFrame f = pose_from_state(body_state(script, static_cast<double>(t)), script.body);
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      auto& p = f.points[k];
      p.x = std::clamp(p.x + detector_rng.uniform(-0.002, 0.002), -0.08, 1.08);
      p.y = std::clamp(p.y + detector_rng.uniform(-0.002, 0.002), -0.08, 1.08);
    }
    // The detector sometimes misses the small face points.
    for (Joint j : {Joint::LeftEye, Joint::RightEye, Joint::LeftEar, Joint::RightEar}) {
      if (detector_rng.bernoulli(0.2)) f.points[idx(j)] = {0.0, 0.0, false};
    }
    s.poses.frames[t] = f;
  }
  if (fall_predicate(s.poses) != (label == 1)) {
    throw ContractError("synthetic sample " + s.id + ": keypoints disagree with label " + std::to_string(label));
  }

  const bool pose_dominant = cfg.mode == SynthMode::PoseDominant;
  std::array<double, 3> bg{}, fig{};
  for (auto& c : bg) c = pixel_rng.uniform(0.35, 0.65);
  for (auto& c : fig) c = pixel_rng.uniform(0.8, 1.0);
  if (!pose_dominant) {
    // Background tint follows the label most of the time.
    const bool cue = pixel_rng.bernoulli(0.85) ? label == 1 : label == 0;
    bg[cue ? 2 : 0] += 0.25;
  }
  const double contrast = pose_dominant ? pixel_rng.uniform(0.1, 0.2) : 0.8;
  const double tint_range = pose_dominant ? 0.15 : 0.03;

  const std::size_t h = cfg.height, w = cfg.width, plane = h * w;
  s.frames = Tensor<float>(Shape{cfg.frames, 3, h, w});
  float* dst = s.frames.ptr();
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    // Coverage comes from the true pose, before detector jitter and misses.
    const auto cov = figure_coverage(pose_from_state(body_state(script, static_cast<double>(t)), script.body),
                                     script.body.head_radius, h, w);
    for (std::size_t c = 0; c < 3; ++c) {
      const double tint = pixel_rng.uniform(-tint_range, tint_range);
      float* out = dst + (t * 3 + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = bg[c] + tint + cov[i] * contrast * (fig[c] - bg[c]) + cfg.noise * pixel_rng.normal();
        out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return s;
}

DatasetManifest generate_synthetic_dataset(const SyntheticConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const auto labels = synthetic_labels(cfg);
  std::error_code ec;
  fs::create_directories(out_dir / "clips", ec);
  if (!ec) fs::create_directories(out_dir / "keypoints", ec);
  if (ec) throw IoError("cannot create dataset directory " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.entries.resize(cfg.num_samples);
  std::vector<std::exception_ptr> errors(cfg.num_samples);
  const auto n = static_cast<std::ptrdiff_t>(cfg.num_samples);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      const VideoSample s = render_synthetic_sample(cfg, k, labels[k]);
      ManifestEntry e{s.id, fs::path("clips") / (s.id + ".gspt"), fs::path("keypoints") / (s.id + ".txt"), s.label};
      write_tensor(out_dir / e.frames_path, s.frames);
      write_keypoints(out_dir / e.keypoints_path, s.poses);
      manifest.entries[k] = std::move(e);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  write_manifest(out_dir / "manifest.tsv", manifest);
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open manifest for writing: " + path.string());
  for (const auto& e : manifest.entries) {
    out << e.id << '\t' << e.frames_path.generic_string() << '\t' << e.keypoints_path.generic_string() << '\t'
        << e.label << '\n';
  }
  if (!out) throw IoError("failed writing manifest: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 4) throw FormatError(where + ": expected 4 tab-separated columns, found " + std::to_string(cols.size()));
    if (cols[3] != "0" && cols[3] != "1") throw FormatError(where + ": label must be 0 or 1, got '" + cols[3] + "'");
    if (!ids.insert(cols[0]).second) throw FormatError(where + ": duplicate id '" + cols[0] + "'");
    ManifestEntry e{cols[0], cols[1], cols[2], cols[3] == "1" ? 1 : 0};
    for (const auto& p : {e.frames_path, e.keypoints_path}) {
      if (!std::filesystem::exists(m.root / p)) throw IoError(where + ": referenced file does not exist: " + (m.root / p).string());
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::pair<DatasetManifest, DatasetManifest> dataset_split(const DatasetManifest& manifest, double val_fraction,
                                                          std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("dataset_split: val_fraction must lie in [0, 1)");
  std::vector<bool> to_val(manifest.size(), false);
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      if (manifest.entries[i].label == label) members.push_back(i);
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
    rng.shuffle(members);
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(members.size()) * val_fraction));
    for (std::size_t k = 0; k < n_val; ++k) to_val[members[k]] = true;
  }
  DatasetManifest train{{}, Split::Train, manifest.root};
  DatasetManifest val{{}, Split::Val, manifest.root};
  for (std::size_t i = 0; i < manifest.size(); ++i) (to_val[i] ? val : train).entries.push_back(manifest.entries[i]);
  return {std::move(train), std::move(val)};
}

VideoSample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry) {
  VideoSample s;
  s.id = entry.id;
  s.label = entry.label;
  s.frames = read_tensor_as<float>(manifest.root / entry.frames_path);
  if (s.frames.ndim() != 4 || s.frames.dim(1) != 3) {
    throw FormatError((manifest.root / entry.frames_path).string() + ": expected frames [T,3,H,W], got " +
                      shape_str(s.frames.shape()));
  }
  s.poses = load_keypoints(manifest.root / entry.keypoints_path, s.frames.dim(0));
  return s;
}

std::vector<VideoSample> load_samples(const DatasetManifest& manifest) {
  std::vector<VideoSample> out(manifest.size());
  std::vector<std::exception_ptr> errors(manifest.size());
  const auto n = static_cast<std::ptrdiff_t>(manifest.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = load_sample(manifest, manifest.entries[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace gsp
