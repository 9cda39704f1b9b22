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

#include <fstream>

#include "gsp/models.hpp"
#include "gsp/tensor_io.hpp"
#include "test_util.hpp"

namespace gsp {
namespace {

Tape<double> no_grad(false);

ModelConfig tiny(Variant v) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.backbone.widths = {4, 8};
  cfg.backbone.segments = 4;
  cfg.heads = 2;
  cfg.pose_hidden = {8, 8};
  return cfg;
}

ModelInput<double> tiny_input(std::size_t n, std::uint64_t seed) {
  return {test::random<double>({n, 4, 3, 8, 8}, seed, 0.0, 1.0), test::random<double>({n, 4, 1, 8, 8}, seed + 1, 0.0, 1.0),
          test::random<double>({n, 4, 34}, seed + 2, 0.0, 1.0)};
}

TEST(Variant, NamesRoundTrip) {
  for (auto v : {Variant::Baseline, Variant::Early, Variant::Late}) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_THROW(parse_variant("mid"), ConfigError);
}

TEST(ModelConfig, AlignmentDefaultsAndValidation) {
  auto cfg = tiny(Variant::Late);
  EXPECT_EQ(cfg.alignment_dims(), (std::vector<std::size_t>{8, 4}));
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.heads = 2;
  cfg.align = {16, 8};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.align = {12, 6, 3};
  EXPECT_NO_THROW(cfg.validate());
}

TEST(FusionModel, OutputShapes) {
  for (auto v : {Variant::Baseline, Variant::Early, Variant::Late}) {
    FusionModel<double> m(tiny(v), 1);
    EXPECT_EQ(m.forward(no_grad, tiny_input(3, 2)).shape(), (Shape{3, 2})) << variant_name(v);
  }
}

TEST(FusionModel, ZeroInputGivesClassifierBias) {
  for (auto v : {Variant::Baseline, Variant::Early}) {
    FusionModel<double> m(tiny(v), 3);
    m.set_mode(Mode::Eval);
    ModelInput<double> in{Tensor<double>::zeros({2, 4, 3, 8, 8}), Tensor<double>::zeros({2, 4, 1, 8, 8}), {}};
    const auto out = m.forward(no_grad, in);
    for (double x : out.data()) EXPECT_EQ(x, 0.0);
  }
}

TEST(FusionModel, SameSeedSameLogits) {
  for (auto v : {Variant::Baseline, Variant::Early, Variant::Late}) {
    FusionModel<double> a(tiny(v), 4), b(tiny(v), 4);
    a.set_mode(Mode::Eval);
    b.set_mode(Mode::Eval);
    const auto in = tiny_input(2, 5);
    EXPECT_TRUE(test::bit_equal(a.forward(no_grad, in), b.forward(no_grad, in)));
  }
}

TEST(FusionModel, EarlyFusionWithZeroHeatmapEqualsBaseline) {
  FusionModel<double> base(tiny(Variant::Baseline), 6), early(tiny(Variant::Early), 6);
  base.set_mode(Mode::Eval);
  early.set_mode(Mode::Eval);
  auto in = tiny_input(2, 7);
  in.heatmaps = Tensor<double>::zeros({2, 4, 1, 8, 8});
  EXPECT_LE(test::max_abs_diff(base.forward(no_grad, in), early.forward(no_grad, in)), 1e-12);
}

TEST(FusionModel, HeatmapChannelReceivesGradient) {
  FusionModel<double> m(tiny(Variant::Early), 8);
  m.set_mode(Mode::Eval);
  auto in = tiny_input(2, 9);
  in.heatmaps.set_requires_grad(true);
  Tape<double> tape;
  tape.backward(softmax_cross_entropy(tape, m.forward(tape, in), {0, 1}));
  // The 4th-channel stem kernel starts at zero, but its own gradient does not.
  const auto& w = m.backbone().stages()[0].conv.weight;
  double wnorm = 0.0;
  for (std::size_t o = 0; o < w.dim(0); ++o)
    for (std::size_t k = 0; k < 9; ++k) wnorm += std::abs(w.grad()[(o * 4 + 3) * 9 + k]);
  EXPECT_GT(wnorm, 0.0);
}

TEST(FusionModel, EarlyFusionRejectsMismatchedHeatmaps) {
  FusionModel<double> m(tiny(Variant::Early), 10);
  auto in = tiny_input(2, 11);
  in.heatmaps = Tensor<double>::zeros({2, 3, 1, 8, 8});
  EXPECT_THROW(m.forward(no_grad, in), ShapeError);
}

TEST(FusionModel, LateFusionTokensAreUnitNorm) {
  FusionModel<double> m(tiny(Variant::Late), 12);
  m.set_mode(Mode::Eval);
  const auto in = tiny_input(3, 13);
  FusedRepresentation<double> fused;
  m.late_fusion_forward(no_grad, in.frames, in.poses, 0, &fused);
  ASSERT_EQ(fused.tokens.shape(), (Shape{3, 2, 8}));
  for (const auto* f : {&fused.rgb_feature, &fused.pose_feature})
    for (std::size_t r = 0; r < 3; ++r) {
      double n2 = 0.0;
      for (std::size_t k = 0; k < 8; ++k) n2 += f->at({r, k}) * f->at({r, k});
      EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-6);
    }
}

TEST(FusionModel, LateFusionHeadIsScaleInvariantPerStream) {
  FusionModel<double> m(tiny(Variant::Late), 14);
  m.set_mode(Mode::Eval);
  const auto rgb = test::random<double>({2, 8}, 15), pose = test::random<double>({2, 8}, 16);
  const auto a = m.late_fusion_head(no_grad, rgb, pose);
  const auto b = m.late_fusion_head(no_grad, scale(no_grad, rgb, 5.0), scale(no_grad, pose, 0.01));
  EXPECT_LE(test::max_abs_diff(a, b), 1e-6);
}

TEST(FusionModel, EvalModeBatchOrderDoesNotMatter) {
  for (auto v : {Variant::Baseline, Variant::Early, Variant::Late}) {
    FusionModel<double> m(tiny(v), 17);
    m.set_mode(Mode::Eval);
    const auto a = tiny_input(1, 18), b = tiny_input(1, 21);
    auto cat = [](const ModelInput<double>& x, const ModelInput<double>& y) {
      return ModelInput<double>{concat(no_grad, {x.frames, y.frames}, 0), concat(no_grad, {x.heatmaps, y.heatmaps}, 0),
                                concat(no_grad, {x.poses, y.poses}, 0)};
    };
    const auto ab = m.forward(no_grad, cat(a, b)), ba = m.forward(no_grad, cat(b, a));
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_NEAR(ab.at({0, k}), ba.at({1, k}), 1e-12);
      EXPECT_NEAR(ab.at({1, k}), ba.at({0, k}), 1e-12);
    }
  }
}

TEST(FusionModel, ParametersExcludeRunningStats) {
  FusionModel<double> m(tiny(Variant::Late), 19);
  const auto all = m.tensors();
  const auto params = m.parameters();
  EXPECT_LT(params.size(), all.size());
  for (const auto& p : params) {
    EXPECT_EQ(p.name.find("running_"), std::string::npos) << p.name;
    EXPECT_TRUE(p.value.requires_grad()) << p.name;
  }
}

// ---------------------------------------------------------------- predict_label

TEST(PredictLabel, ArgmaxWithTiesToLowerIndex) {
  const Tensor<double> logits({3, 2}, std::vector<double>{0.2, 0.8, 1.0, -1.0, 0.5, 0.5});
  EXPECT_EQ(predict_label(logits), (std::vector<int>{1, 0, 0}));
}

TEST(PredictLabel, InvariantToRowShift) {
  const auto logits = test::random<double>({20, 3}, 20, -5.0, 5.0);
  auto shifted = logits.clone();
  for (std::size_t r = 0; r < 20; ++r)
    for (std::size_t k = 0; k < 3; ++k) shifted.at({r, k}) += static_cast<double>(r) * 0.75;
  EXPECT_EQ(predict_label(logits), predict_label(shifted));
}

// ---------------------------------------------------------------- checkpoints

TEST(Checkpoint, RoundTripReproducesLogits) {
  test::TempDir dir("ckpt");
  for (auto v : {Variant::Baseline, Variant::Early, Variant::Late}) {
    FusionModel<float> a(tiny(v), 22), b(tiny(v), 23);
    Tape<float> t(false);
    // Run a train-mode pass so running statistics differ from their defaults.
    ModelInput<float> in{tiny_input(2, 24).frames.cast<float>(), tiny_input(2, 24).heatmaps.cast<float>(),
                         tiny_input(2, 24).poses.cast<float>()};
    a.forward(t, in, 1);
    save_checkpoint(dir.path() / "m.gspc", a);
    load_checkpoint(dir.path() / "m.gspc", b);
    a.set_mode(Mode::Eval);
    b.set_mode(Mode::Eval);
    EXPECT_TRUE(test::bit_equal(a.forward(t, in), b.forward(t, in))) << variant_name(v);
  }
}

TEST(Checkpoint, BadMagicIsAFormatError) {
  test::TempDir dir("ckpt");
  std::ofstream(dir.path() / "bad.gspc") << "XXXXsomething";
  FusionModel<float> m(tiny(Variant::Baseline), 25);
  EXPECT_THROW(load_checkpoint(dir.path() / "bad.gspc", m), FormatError);
}

TEST(Checkpoint, VariantMismatchIsAFormatError) {
  test::TempDir dir("ckpt");
  FusionModel<float> late(tiny(Variant::Late), 26), base(tiny(Variant::Baseline), 26), early(tiny(Variant::Early), 26);
  save_checkpoint(dir.path() / "late.gspc", late);
  EXPECT_THROW(load_checkpoint(dir.path() / "late.gspc", base), FormatError);
  save_checkpoint(dir.path() / "base.gspc", base);
  // Same names, different stem shape.
  EXPECT_THROW(load_checkpoint(dir.path() / "base.gspc", early), FormatError);
}

TEST(Checkpoint, TruncatedFileIsAFormatError) {
  test::TempDir dir("ckpt");
  FusionModel<float> m(tiny(Variant::Baseline), 27);
  save_checkpoint(dir.path() / "m.gspc", m);
  const auto bytes = test::read_file(dir.path() / "m.gspc");
  std::ofstream(dir.path() / "t.gspc", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_checkpoint(dir.path() / "t.gspc", m), FormatError);
}

}  // namespace
}  // namespace gsp
