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


#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "gsp/pose.hpp"
#include "test_util.hpp"

namespace gsp {
namespace {

Tape<double> no_grad(false);

KeypointFrame single(double x, double y, std::size_t joint = 0) {
  KeypointFrame f;
  f.points[joint] = {x, y, true};
  return f;
}

KeypointFrame random_frame(Rng& rng, double visible_p = 0.8) {
  KeypointFrame f;
  for (auto& kp : f.points) {
    kp.visible = rng.uniform() < visible_p;
    if (kp.visible) {
      kp.x = rng.uniform(-0.1, 1.1);
      kp.y = rng.uniform(-0.1, 1.1);
    }
  }
  return f;
}

// ---------------------------------------------------------------- heatmaps

TEST(Heatmap, PeakAtPixelCenterIsOne) {
  // Pixel (i=3, j=5) of a 10x8 raster has its center at (5.5, 3.5).
  const auto h = rasterize_heatmap<double>(single(5.5 / 10.0, 3.5 / 8.0), 10, 8);
  EXPECT_EQ(h.shape(), (Shape{1, 8, 10}));
  EXPECT_DOUBLE_EQ(h.at({0, 3, 5}), 1.0);
}

TEST(Heatmap, ValueAtDistanceSigmaRootTwo) {
  const double sigma = 2.0;
  // Keypoint at the center of pixel (4, 4); pixel (6, 6) is sqrt(8) = sigma * sqrt(2) away.
  const auto h = rasterize_heatmap<double>(single(4.5 / 16.0, 4.5 / 16.0), 16, 16, {sigma});
  EXPECT_NEAR(h.at({0, 6, 6}), std::exp(-1.0), 1e-15);
}

TEST(Heatmap, NoVisibleKeypointsGivesZeros) {
  const auto out = rasterize_heatmap<double>(KeypointFrame{}, 7, 5);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Heatmap, NonPositiveSigmaIsAConfigError) {
  EXPECT_THROW(rasterize_heatmap<double>(single(0.5, 0.5), 8, 8, {0.0}), ConfigError);
  EXPECT_THROW(rasterize_heatmap<double>(single(0.5, 0.5), 8, 8, {-1.0}), ConfigError);
}

TEST(Heatmap, MatchesBruteForceOracle) {
  Rng rng(1);
  for (double sigma : {1.0, 2.0, 4.0})
    for (int f = 0; f < 20; ++f) {
      const auto frame = random_frame(rng);
      const auto h = rasterize_heatmap<double>(frame, 24, 20, {sigma});
      for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 24; ++j) {
          double best = 0.0;
          for (const auto& kp : frame.points) {
            if (!kp.visible) continue;
            const double d2 = std::pow(j + 0.5 - kp.x * 24, 2) + std::pow(i + 0.5 - kp.y * 20, 2);
            best = std::max(best, std::exp(-d2 / (2 * sigma * sigma)));
          }
          ASSERT_NEAR(h.at({0, i, j}), best, 1e-12);
        }
      EXPECT_TRUE(test::bit_equal(h, reference::rasterize_heatmap<double>(frame, 24, 20, sigma)));
    }
}

TEST(Heatmap, ValuesInUnitIntervalAndPeakNearKeypoint) {
  Rng rng(2);
  for (int f = 0; f < 50; ++f) {
    KeypointFrame frame = random_frame(rng, 0.5);
    frame.points[0] = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), true};
    const auto h = rasterize_heatmap<double>(frame, 32, 32);
    double peak = 0.0;
    for (double v : h.data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      peak = std::max(peak, v);
    }
    // An in-frame keypoint is at most half a pixel from a pixel center on
    // each axis: peak >= exp(-0.5 / (2 sigma^2)).
    EXPECT_GE(peak, std::exp(-0.5 / 8.0));
  }
}

TEST(Heatmap, KeypointOrderDoesNotMatter) {
  Rng rng(3);
  const auto frame = random_frame(rng);
  KeypointFrame rev;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) rev.points[k] = frame.points[kNumKeypoints - 1 - k];
  EXPECT_TRUE(test::bit_equal(rasterize_heatmap<double>(frame, 16, 16), rasterize_heatmap<double>(rev, 16, 16)));
}

TEST(Heatmap, SumModeIsClippedToOne) {
  KeypointFrame f;
  f.points[0] = {0.5, 0.5, true};
  f.points[1] = {0.5, 0.5, true};
  const auto h = rasterize_heatmap<double>(f, 8, 8, {2.0, HeatmapCombine::Sum});
  for (double v : h.data()) EXPECT_LE(v, 1.0);
  const auto m = rasterize_heatmap<double>(f, 8, 8, {2.0, HeatmapCombine::Max});
  EXPECT_GT(h.at({0, 0, 0}), m.at({0, 0, 0}));
}

// ---------------------------------------------------------------- keypoint files

PoseSequence random_sequence(std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  PoseSequence seq;
  for (std::size_t f = 0; f < frames; ++f) seq.frames.push_back(random_frame(rng));
  return seq;
}

TEST(KeypointFile, RoundTripIsBitExact) {
  test::TempDir dir("kp");
  const auto seq = random_sequence(103, 4);
  write_keypoints(dir.path() / "a.txt", seq);
  const auto back = load_keypoints(dir.path() / "a.txt", 103);
  ASSERT_EQ(back.frame_count(), 103u);
  for (std::size_t f = 0; f < 103; ++f)
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      const auto& a = seq.frames[f].points[k];
      const auto& b = back.frames[f].points[k];
      EXPECT_EQ(a.visible, b.visible);
      if (a.visible) {
        EXPECT_EQ(a.x, b.x);
        EXPECT_EQ(a.y, b.y);
      }
    }
}

TEST(KeypointFile, FrameCountMismatchReportsBothCounts) {
  test::TempDir dir("kp");
  write_keypoints(dir.path() / "a.txt", random_sequence(10, 5));
  try {
    load_keypoints(dir.path() / "a.txt", 12);
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("10"), std::string::npos) << msg;
    EXPECT_NE(msg.find("12"), std::string::npos) << msg;
  }
}

TEST(KeypointFile, WrongValueCountNamesTheFrame) {
  test::TempDir dir("kp");
  std::string full = "0";
  for (int i = 0; i < 17; ++i) full += " 0.5 0.5 1";
  std::ofstream(dir.path() / "a.txt") << full << "\n1 0.5 0.5 1\n";
  try {
    load_keypoints(dir.path() / "a.txt", 2);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos) << e.what();
  }
}

TEST(KeypointFile, OutOfRangeCoordinateIsARangeError) {
  test::TempDir dir("kp");
  std::string line = "0 2.0 0.5 1";
  for (int i = 1; i < 17; ++i) line += " 0.5 0.5 1";
  std::ofstream(dir.path() / "a.txt") << line << "\n";
  EXPECT_THROW(load_keypoints(dir.path() / "a.txt", 1), RangeError);
}

TEST(KeypointFile, MissingFileIsAnIoError) {
  EXPECT_THROW(load_keypoints("/nonexistent/kp.txt", 1), IoError);
}

TEST(KeypointFrame, FeaturesZeroForInvisible) {
  KeypointFrame f;
  f.points[2] = {0.25, 0.75, true};
  const auto feats = f.features();
  for (std::size_t i = 0; i < kPoseFeatureDim; ++i) EXPECT_EQ(feats[i], i == 4 ? 0.25 : i == 5 ? 0.75 : 0.0);
  EXPECT_EQ(f.visible_count(), 1u);
}

// ---------------------------------------------------------------- pose MLP

TEST(PoseEmbed, Shape) {
  Rng rng(6);
  const auto p = PoseMlpParams<double>::make(128, false, rng);
  EXPECT_EQ(pose_embed(no_grad, test::random<double>({2, 16, 34}, 7), p).shape(), (Shape{2, 16, 128}));
}

TEST(PoseEmbed, ZeroInputWithZeroBiasesGivesZero) {
  Rng rng(8);
  const auto p = PoseMlpParams<double>::make(16, false, rng, {8, 8});
  const auto out = pose_embed(no_grad, Tensor<double>::zeros({3, 2, 34}), p);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(PoseEmbed, FinalReluToggle) {
  Rng r1(9), r2(9);
  const auto plain = PoseMlpParams<double>::make(16, false, r1, {8, 8});
  const auto clipped = PoseMlpParams<double>::make(16, true, r2, {8, 8});
  const auto x = test::random<double>({4, 3, 34}, 10);
  const auto a = pose_embed(no_grad, x, plain), b = pose_embed(no_grad, x, clipped);
  bool any_negative = false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    EXPECT_EQ(b[i], std::max(a[i], 0.0));
    any_negative = any_negative || a[i] < 0.0;
  }
  EXPECT_TRUE(any_negative);
}

TEST(PoseEmbed, FramesAreIndependent) {
  Rng rng(11);
  const auto p = PoseMlpParams<double>::make(16, false, rng, {8, 8});
  const auto x = test::random<double>({1, 3, 34}, 12);
  const auto y = pose_embed(no_grad, x, p);
  const auto y1 = pose_embed(no_grad, slice(no_grad, x, 1, 1, 2), p);
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(y.at({0, 1, k}), y1.at({0, 0, k}));
}

TEST(PoseEmbed, WrongFeatureWidthIsAShapeError) {
  Rng rng(13);
  const auto p = PoseMlpParams<double>::make(16, false, rng, {8, 8});
  EXPECT_THROW(pose_embed(no_grad, Tensor<double>::zeros({1, 2, 33}), p), ShapeError);
  EXPECT_THROW(PoseMlpParams<double>::make(16, false, rng, {8}), ConfigError);
}

}  // namespace
}  // namespace gsp
