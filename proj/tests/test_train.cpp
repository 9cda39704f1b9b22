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
#include <numbers>
#include <sstream>

#include "gsp/train.hpp"
#include "test_util.hpp"

namespace gsp {
namespace {

// ---------------------------------------------------------------- schedule

TEST(CosineLr, Anchors) {
  TrainConfig cfg;
  cfg.epochs = 120;
  EXPECT_EQ(cosine_lr(0, cfg), 0.01);
  EXPECT_NEAR(cosine_lr(120, cfg), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(60, cfg), 0.005, 1e-15);
}

TEST(CosineLr, MatchesClosedFormAndIsNonIncreasing) {
  TrainConfig cfg;
  cfg.epochs = 37;
  cfg.lr0 = 0.3;
  cfg.eta_min = 0.01;
  double prev = cosine_lr(0, cfg);
  for (std::size_t e = 0; e <= cfg.epochs; ++e) {
    const double lr = cosine_lr(e, cfg);
    EXPECT_NEAR(lr, 0.01 + 0.5 * 0.29 * (1 + std::cos(std::numbers::pi * e / 37.0)), 1e-15);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

// ---------------------------------------------------------------- SGD

struct OneParam {
  TensorList<double> params;
  OptimizerState<double> state;
  explicit OneParam(double w, bool decay = true) {
    params.push_back({"w", Tensor<double>::scalar(w), true, decay});
    state = OptimizerState<double>::make(params);
  }
  double w() const { return params[0].value.item(); }
};

TEST(Sgd, WorkedExample) {
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  OneParam p(1.0);
  const std::vector<Tensor<double>> g{Tensor<double>::scalar(0.1)};
  sgd_momentum_step(p.params, g, p.state, 0.01, cfg);
  EXPECT_NEAR(p.state.velocity[0].item(), 0.1, 1e-12);
  EXPECT_NEAR(p.w(), 0.999, 1e-12);
  sgd_momentum_step(p.params, g, p.state, 0.01, cfg);
  EXPECT_NEAR(p.state.velocity[0].item(), 0.19, 1e-12);
  EXPECT_NEAR(p.w(), 0.9971, 1e-12);
}

TEST(Sgd, WeightDecayAddsToGradient) {
  TrainConfig cfg;
  OneParam p(1.0);
  sgd_momentum_step(p.params, {Tensor<double>::scalar(0.1)}, p.state, 0.01, cfg);
  EXPECT_NEAR(p.state.velocity[0].item(), 0.1005, 1e-12);
  OneParam bias(1.0, false);
  sgd_momentum_step(bias.params, {Tensor<double>::scalar(0.1)}, bias.state, 0.01, cfg);
  EXPECT_NEAR(bias.state.velocity[0].item(), 0.1, 1e-12);
}

TEST(Sgd, ZeroLearningRateLeavesParamsBitIdentical) {
  TrainConfig cfg;
  TensorList<double> params{{"a", test::random<double>({5, 3}, 1), true, true}};
  const auto before = params[0].value.clone();
  auto state = OptimizerState<double>::make(params);
  sgd_momentum_step(params, {test::random<double>({5, 3}, 2)}, state, 0.0, cfg);
  EXPECT_TRUE(test::bit_equal(before, params[0].value));
}

TEST(Sgd, NoMomentumNoDecayIsVanillaGradientDescent) {
  TrainConfig cfg;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  TensorList<float> params{{"a", test::random<float>({40}, 3), true, true}};
  const auto before = params[0].value.clone();
  const auto g = test::random<float>({40}, 4);
  auto state = OptimizerState<float>::make(params);
  sgd_momentum_step(params, {g}, state, 0.05, cfg);
  // Updates are computed in double and rounded once.
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(params[0].value[i], static_cast<float>(static_cast<double>(before[i]) - 0.05 * static_cast<double>(g[i])));
  }
}

TEST(Sgd, ShapeMismatchIsRejected) {
  TrainConfig cfg;
  TensorList<double> params{{"a", Tensor<double>::zeros({3}), true, true}};
  auto state = OptimizerState<double>::make(params);
  EXPECT_THROW(sgd_momentum_step(params, {Tensor<double>::zeros({4})}, state, 0.1, cfg), ShapeError);
  EXPECT_THROW(sgd_momentum_step(params, {}, state, 0.1, cfg), ShapeError);
}

TEST(Sgd, ReadsGradientSlots) {
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  auto w = Tensor<double>::scalar(1.0);
  w.grad_mut()[0] = 0.1;
  TensorList<double> params{{"w", w, true, true}, {"untouched", Tensor<double>::scalar(2.0), true, true}};
  auto state = OptimizerState<double>::make(params);
  sgd_momentum_step(params, state, 0.01, cfg);
  EXPECT_NEAR(w.item(), 0.999, 1e-12);
  EXPECT_EQ(params[1].value.item(), 2.0);
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, RowFormat) {
  EXPECT_EQ(format_metrics_row({3, 0.693147180559, 0.5, 1.0, 0.00999}), "3,0.693147,0.5,1,0.00999");
  EXPECT_STREQ(kMetricsHeader, "epoch,train_loss,train_acc,val_acc,lr");
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

// ---------------------------------------------------------------- batches and training

std::vector<VideoSample> tiny_samples(std::size_t n, std::size_t offset) {
  SyntheticConfig cfg;
  cfg.num_samples = 64;
  cfg.height = cfg.width = 16;
  cfg.frames = 16;
  std::vector<VideoSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(render_synthetic_sample(cfg, offset + i, static_cast<int>(i % 2)));
  }
  return out;
}

ModelConfig tiny_model(Variant v) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.backbone.widths = {4, 8};
  cfg.backbone.segments = 4;
  cfg.heads = 2;
  cfg.pose_hidden = {8, 8};
  return cfg;
}

TrainConfig tiny_train(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.segments = 4;
  return cfg;
}

TEST(MakeBatch, ShapesPerVariant) {
  const auto s = tiny_samples(3, 0);
  const std::vector<const VideoSample*> ptrs{&s[0], &s[1], &s[2]};
  const auto base = make_batch<float>(ptrs, Variant::Baseline, 4, SegmentMode::Center, 0, 2.0);
  EXPECT_EQ(base.frames.shape(), (Shape{3, 4, 3, 16, 16}));
  EXPECT_FALSE(base.heatmaps.defined());
  EXPECT_FALSE(base.poses.defined());
  const auto early = make_batch<float>(ptrs, Variant::Early, 4, SegmentMode::Center, 0, 2.0);
  EXPECT_EQ(early.heatmaps.shape(), (Shape{3, 4, 1, 16, 16}));
  const auto late = make_batch<float>(ptrs, Variant::Late, 4, SegmentMode::Center, 0, 2.0);
  EXPECT_EQ(late.poses.shape(), (Shape{3, 4, 34}));
}

TEST(MakeBatch, CenterFramesMatchSampler) {
  const auto s = tiny_samples(1, 5);
  const auto b = make_batch<float>({&s[0]}, Variant::Late, 4, SegmentMode::Center, 0, 2.0);
  const auto idx = sample_segment_indices(16, 4, SegmentMode::Center);
  const std::size_t frame = 3 * 16 * 16;
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < frame; ++i) ASSERT_EQ(b.frames[k * frame + i], s[0].frames[idx[k] * frame + i]);
    const auto feats = s[0].poses.frames[idx[k]].features();
    for (std::size_t i = 0; i < kPoseFeatureDim; ++i) ASSERT_EQ(b.poses[k * 34 + i], static_cast<float>(feats[i]));
  }
}

TEST(RunTraining, OneEpochCheckpointReproducesValAccuracy) {
  test::TempDir dir("train");
  const auto train = tiny_samples(8, 0), val = tiny_samples(6, 20);
  for (auto v : {Variant::Baseline, Variant::Early, Variant::Late}) {
    const auto out = dir.path() / std::string(variant_name(v));
    const auto cfg = tiny_train(1);
    const auto res = run_training(tiny_model(v), cfg, train, val, out, nullptr);
    ASSERT_EQ(res.metrics.size(), 1u);
    EXPECT_EQ(res.metrics[0].lr, cosine_lr(0, cfg));
    ASSERT_TRUE(std::filesystem::exists(res.checkpoint));
    FusionModel<float> reloaded(tiny_model(v), 999);
    load_checkpoint(res.checkpoint, reloaded);
    EXPECT_EQ(evaluate_accuracy(reloaded, val, cfg), res.best_val_acc) << variant_name(v);
  }
}

TEST(RunTraining, MetricsCsvIsByteIdenticalAcrossRuns) {
  test::TempDir dir("train");
  const auto train = tiny_samples(9, 0), val = tiny_samples(4, 30);
  const auto cfg = tiny_train(3);
  const auto a = run_training(tiny_model(Variant::Late), cfg, train, val, dir.path() / "a");
  const auto b = run_training(tiny_model(Variant::Late), cfg, train, val, dir.path() / "b");
  const auto csv = test::read_file(dir.path() / "a" / "metrics.csv");
  EXPECT_EQ(csv, test::read_file(dir.path() / "b" / "metrics.csv"));
  EXPECT_EQ(test::read_file(dir.path() / "a" / "best.gspc"), test::read_file(dir.path() / "b" / "best.gspc"));
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, kMetricsHeader);
  std::size_t rows = 0;
  while (std::getline(lines, line)) EXPECT_EQ(line, format_metrics_row(a.metrics[rows++]));
  EXPECT_EQ(rows, 3u);
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(a.metrics[e].lr, cosine_lr(e, cfg));
}

TEST(RunTraining, BestEpochIsTheFirstMaximum) {
  test::TempDir dir("train");
  const auto res = run_training(tiny_model(Variant::Baseline), tiny_train(3), tiny_samples(6, 0), tiny_samples(4, 40),
                                dir.path());
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& m : res.metrics)
    if (m.val_acc > best) {
      best = m.val_acc;
      best_epoch = m.epoch;
    }
  EXPECT_EQ(res.best_epoch, best_epoch);
  EXPECT_EQ(res.best_val_acc, best);
}

TEST(RunTraining, HugeLearningRateDiverges) {
  test::TempDir dir("train");
  auto cfg = tiny_train(3);
  cfg.lr0 = 1e30;
  try {
    run_training(tiny_model(Variant::Baseline), cfg, tiny_samples(8, 0), {}, dir.path());
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(RunTraining, EmptyTrainingSetIsRejected) {
  test::TempDir dir("train");
  EXPECT_THROW(run_training(tiny_model(Variant::Baseline), tiny_train(1), {}, {}, dir.path()), ConfigError);
}

TEST(EvaluateAccuracy, MatchesConfusionRecount) {
  const auto samples = tiny_samples(20, 50);
  FusionModel<float> model(tiny_model(Variant::Late), 3);
  const auto cfg = tiny_train(1);
  const auto preds = predict_samples(model, samples, cfg);
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label == 1) (preds[i] == 1 ? tp : fn)++;
    else (preds[i] == 0 ? tn : fp)++;
  }
  EXPECT_EQ(tp + tn + fp + fn, 20u);
  EXPECT_EQ(evaluate_accuracy(model, samples, cfg), static_cast<double>(tp + tn) / 20.0);
  EXPECT_EQ(evaluate_accuracy(model, {}, cfg), 0.0);
}

}  // namespace
}  // namespace gsp
