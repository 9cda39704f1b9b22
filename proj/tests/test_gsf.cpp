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

#include "gsp/gsf.hpp"
#include "test_util.hpp"

namespace gsp {
namespace {

Tape<double> no_grad(false);

// out(t) for a saturated block: forward channels take frame t-1, backward
// channels frame t+1, zero at the boundary.
Tensor<double> shifted_oracle(const Tensor<double>& x) {
  const std::size_t n = x.dim(0), t = x.dim(1), c = x.dim(2), hw = x.dim(3) * x.dim(4), cf = c - c / 2;
  Tensor<double> y(x.shape());
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t u = 0; u < t; ++u)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const bool fwd = ch < cf;
        const long src = fwd ? static_cast<long>(u) - 1 : static_cast<long>(u) + 1;
        for (std::size_t k = 0; k < hw; ++k) {
          const std::size_t dst = ((a * t + u) * c + ch) * hw + k;
          y[dst] = (src < 0 || src >= static_cast<long>(t)) ? 0.0 : x[((a * t + src) * c + ch) * hw + k];
        }
      }
  return y;
}

void saturate(GsfBlockParams<double>& p) {
  p.gate_forward.bias[0] = 50.0;
  p.gate_backward.bias[0] = 50.0;
}

TEST(GsfBlock, IdentityAtInitialization) {
  for (std::size_t c : {2u, 3u, 16u})
    for (std::size_t t : {1u, 8u, 32u}) {
      const auto p = GsfBlockParams<double>::make(c);
      const auto x = test::random<double>({2, t, c, 3, 3}, c * 100 + t);
      EXPECT_LE(test::max_abs_diff(gsf_block(no_grad, x, p), x), 1e-12) << "C=" << c << " T=" << t;
    }
}

TEST(GsfBlock, SaturatedGatesArePureShift) {
  for (std::size_t c : {2u, 3u, 16u})
    for (std::size_t t : {1u, 8u, 32u}) {
      auto p = GsfBlockParams<double>::make(c);
      saturate(p);
      const auto x = test::random<double>({2, t, c, 3, 3}, c * 7 + t);
      EXPECT_LE(test::max_abs_diff(gsf_block(no_grad, x, p), shifted_oracle(x)), 1e-12) << "C=" << c << " T=" << t;
    }
}

TEST(GsfBlock, ChannelGroupSizes) {
  const auto p = GsfBlockParams<double>::make(5);
  EXPECT_EQ(p.forward_channels(), 3u);
  EXPECT_EQ(p.backward_channels(), 2u);
  EXPECT_EQ(p.gate_forward.weight.shape(), (Shape{1, 3, 3, 3, 3}));
  EXPECT_EQ(p.gate_backward.weight.shape(), (Shape{1, 2, 3, 3, 3}));
}

TEST(GsfBlock, FewerThanTwoChannelsIsAConfigError) {
  EXPECT_THROW(GsfBlockParams<double>::make(1), ConfigError);
  EXPECT_THROW(GsfBlockParams<double>::make(0), ConfigError);
}

TEST(GsfBlock, ChannelMismatchIsAShapeError) {
  const auto p = GsfBlockParams<double>::make(4);
  EXPECT_THROW(gsf_block(no_grad, Tensor<double>::zeros({1, 2, 3, 2, 2}), p), ShapeError);
}

TEST(GsfBlock, ShapePreservedWithRandomGates) {
  Rng rng(3);
  for (std::size_t c = 2; c <= 64; c += 7)
    for (std::size_t t : {1u, 2u, 5u, 32u}) {
      auto p = GsfBlockParams<double>::make(c);
      p.gate_forward.weight = Tensor<double>::uniform(p.gate_forward.weight.shape(), -0.3, 0.3, rng);
      p.gate_backward.weight = Tensor<double>::uniform(p.gate_backward.weight.shape(), -0.3, 0.3, rng);
      const auto x = test::random<double>({1, t, c, 2, 3}, c + t);
      const auto y = gsf_block(no_grad, x, p);
      EXPECT_EQ(y.shape(), x.shape());
      for (double v : y.data()) ASSERT_TRUE(std::isfinite(v));
    }
}

TEST(GsfBlock, ZeroFusionWeightsGiveZeroOutput) {
  auto p = GsfBlockParams<double>::make(4);
  for (auto* w : {&p.alpha_forward, &p.beta_forward, &p.alpha_backward, &p.beta_backward})
    for (auto& v : w->data()) v = 0.0;
  const auto out = gsf_block(no_grad, test::random<double>({1, 3, 4, 2, 2}, 4), p);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(GsfBlock, FusionWeightsScaleShiftedAndResidualParts) {
  // Gate g: out = alpha * shift(g x) + beta * (1 - g) x, checked with a
  // constant gate from bias only (zero kernel).
  auto p = GsfBlockParams<double>::make(2);
  p.gate_forward.bias[0] = 0.4;
  p.gate_backward.bias[0] = -0.2;
  p.alpha_forward[0] = 1.5;
  p.beta_forward[0] = 0.5;
  p.alpha_backward[0] = -1.0;
  p.beta_backward[0] = 2.0;
  const auto x = test::random<double>({1, 3, 2, 1, 1}, 5);
  const auto y = gsf_block(no_grad, x, p);
  const double gf = std::tanh(0.4), gb = std::tanh(-0.2);
  for (std::size_t t = 0; t < 3; ++t) {
    const double prev = t > 0 ? x.at({0, t - 1, 0, 0, 0}) : 0.0;
    const double next = t + 1 < 3 ? x.at({0, t + 1, 1, 0, 0}) : 0.0;
    EXPECT_NEAR(y.at({0, t, 0, 0, 0}), 1.5 * gf * prev + 0.5 * (1 - gf) * x.at({0, t, 0, 0, 0}), 1e-12);
    EXPECT_NEAR(y.at({0, t, 1, 0, 0}), -1.0 * gb * next + 2.0 * (1 - gb) * x.at({0, t, 1, 0, 0}), 1e-12);
  }
}

// ---------------------------------------------------------------- backbone

BackboneConfig small_backbone(bool gsf = true) {
  BackboneConfig cfg;
  cfg.widths = {4, 8};
  cfg.segments = 4;
  cfg.use_gsf = gsf;
  return cfg;
}

TEST(Backbone, DefaultShape) {
  Rng rng(6);
  Backbone<float> bb(BackboneConfig{}, rng);
  Tape<float> tape(false);
  const auto y = bb.forward(tape, test::random<float>({2, 8, 3, 32, 32}, 7));
  EXPECT_EQ(y.shape(), (Shape{2, 128}));
}

TEST(Backbone, ZeroInputGivesZeroFeatures) {
  Rng rng(8);
  Backbone<double> bb(small_backbone(), rng);
  bb.set_mode(Mode::Eval);
  const auto y = bb.forward(no_grad, Tensor<double>::zeros({2, 4, 3, 8, 8}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backbone, BatchPermutationCommutesInEvalMode) {
  Rng rng(9);
  Backbone<double> bb(small_backbone(), rng);
  bb.set_mode(Mode::Eval);
  const auto a = test::random<double>({1, 4, 3, 8, 8}, 10);
  const auto b = test::random<double>({1, 4, 3, 8, 8}, 11);
  const auto ab = bb.forward(no_grad, concat(no_grad, {a, b}, 0));
  const auto ba = bb.forward(no_grad, concat(no_grad, {b, a}, 0));
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(ab.at({0, k}), ba.at({1, k}));
    EXPECT_EQ(ab.at({1, k}), ba.at({0, k}));
  }
}

TEST(Backbone, IdentityGsfEqualsNoGsf) {
  Rng r1(12), r2(12);
  Backbone<double> with(small_backbone(true), r1), without(small_backbone(false), r2);
  with.set_mode(Mode::Eval);
  without.set_mode(Mode::Eval);
  const auto x = test::random<double>({2, 4, 3, 8, 8}, 13);
  EXPECT_LE(test::max_abs_diff(with.forward(no_grad, x), without.forward(no_grad, x)), 1e-12);
}

TEST(Backbone, ActiveGatesMakeFeaturesDependOnFrameOrder) {
  Rng rng(14);
  Backbone<double> bb(small_backbone(), rng);
  bb.set_mode(Mode::Eval);
  Rng gate_rng(15);
  for (auto& st : bb.stages()) {
    st.gsf.gate_forward.weight = Tensor<double>::uniform(st.gsf.gate_forward.weight.shape(), -0.5, 0.5, gate_rng);
    st.gsf.gate_backward.weight = Tensor<double>::uniform(st.gsf.gate_backward.weight.shape(), -0.5, 0.5, gate_rng);
  }
  const auto x = test::random<double>({1, 4, 3, 8, 8}, 16);
  const auto reversed = concat(no_grad,
                               {slice(no_grad, x, 1, 3, 4), slice(no_grad, x, 1, 2, 3), slice(no_grad, x, 1, 1, 2),
                                slice(no_grad, x, 1, 0, 1)},
                               1);
  EXPECT_GT(test::max_abs_diff(bb.forward(no_grad, x), bb.forward(no_grad, reversed)), 1e-9);

  // Without GSF the backbone is frame-order invariant.
  Rng r2(14);
  Backbone<double> plain(small_backbone(false), r2);
  plain.set_mode(Mode::Eval);
  EXPECT_LE(test::max_abs_diff(plain.forward(no_grad, x), plain.forward(no_grad, reversed)), 1e-12);
}

TEST(Backbone, ResolutionBelowMinimumIsAConfigError) {
  Rng rng(17);
  Backbone<double> bb(small_backbone(), rng);
  EXPECT_EQ(small_backbone().min_resolution(), 4u);
  EXPECT_THROW(bb.forward(no_grad, Tensor<double>::zeros({1, 4, 3, 3, 8})), ConfigError);
  EXPECT_NO_THROW(bb.forward(no_grad, Tensor<double>::zeros({1, 4, 3, 4, 4})));
}

TEST(Backbone, WrongInputChannelsIsAShapeError) {
  Rng rng(18);
  Backbone<double> bb(small_backbone(), rng);
  EXPECT_THROW(bb.forward(no_grad, Tensor<double>::zeros({1, 4, 4, 8, 8})), ShapeError);
}

TEST(Backbone, FourChannelStemSharesRgbWeights) {
  auto cfg4 = small_backbone();
  cfg4.input_channels = 4;
  Rng r3(19), r4(19);
  Backbone<double> rgb(small_backbone(), r3), rgbh(cfg4, r4);
  const auto& w3 = rgb.stages()[0].conv.weight;
  const auto& w4 = rgbh.stages()[0].conv.weight;
  for (std::size_t o = 0; o < 4; ++o)
    for (std::size_t k = 0; k < 9; ++k) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(w4[(o * 4 + c) * 9 + k], w3[(o * 3 + c) * 9 + k]);
      EXPECT_EQ(w4[(o * 4 + 3) * 9 + k], 0.0);
    }
}

}  // namespace
}  // namespace gsp
