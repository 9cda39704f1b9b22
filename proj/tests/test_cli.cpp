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
#include <sstream>

#include "gsp/cli.hpp"
#include "gsp/tensor_io.hpp"
#include "test_util.hpp"

namespace gsp {
namespace {

struct CliRun {
  int code = 0;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "gsp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// ---------------------------------------------------------------- config parsing

TEST(Config, LearningRateKey) { EXPECT_EQ(parse_config_text("train.lr0 = 0.01\n").train.lr0, 0.01); }

TEST(Config, EmptyTextGivesDefaults) {
  const auto cfg = parse_config_text("");
  EXPECT_EQ(cfg.to_text(), RunConfig{}.to_text());
}

TEST(Config, LaterDuplicateWins) {
  const auto cfg = parse_config_text("train.epochs = 3\n# comment\n\ntrain.epochs = 9\n");
  EXPECT_EQ(cfg.train.epochs, 9u);
}

TEST(Config, MalformedLineReportsLineNumber) {
  try {
    parse_config_text("train.epochs = 3\nnot a setting\n", "x.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x.cfg:2"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config_text("train.learning_rate = 0.1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.learning_rate"), std::string::npos) << e.what();
  }
}

TEST(Config, BadValuesAreRejected) {
  EXPECT_THROW(parse_config_text("train.epochs = many\n"), ConfigError);
  EXPECT_THROW(parse_config_text("model.variant = mid\n"), ConfigError);
  EXPECT_THROW(parse_config_text("model.widths = 4,,8\n"), ConfigError);
}

TEST(Config, TextRoundTrip) {
  RunConfig cfg;
  cfg.model.variant = Variant::Late;
  cfg.model.align = {64, 32};
  cfg.model.backbone.widths = {4, 8};
  cfg.train.lr0 = 0.1 + 0.2;
  cfg.train.sigma = 1.0 / 3.0;
  cfg.data.mode = SynthMode::AppearanceCorrelated;
  cfg.out_dir = "/tmp/some run";
  const auto back = parse_config_text(cfg.to_text());
  EXPECT_EQ(back.to_text(), cfg.to_text());
  EXPECT_EQ(back.train.lr0, cfg.train.lr0);
  EXPECT_EQ(back.train.sigma, cfg.train.sigma);
  EXPECT_EQ(back.model.align, cfg.model.align);
}

TEST(Config, ResolvedModelTakesSegmentsFromTraining) {
  const auto cfg = parse_config_text("train.segments = 32\n");
  EXPECT_EQ(cfg.resolved_model().backbone.segments, 32u);
}

// ---------------------------------------------------------------- dispatch

TEST(Cli, NoArgumentsPrintsUsage) {
  const auto r = run({});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("gen-data"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"train", "--bogus"}).code, 1);
  EXPECT_EQ(run({"train", "--batch", "5"}).code, 1);
  EXPECT_EQ(run({"train", "--variant", "mid"}).code, 1);
  EXPECT_EQ(run({"heatmap"}).code, 1);
}

TEST(Cli, RuntimeErrorsExitTwo) {
  const auto r = run({"train", "/nonexistent/data", "--out", "/nonexistent/run"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, TinyPipelineGenTrainEval) {
  test::TempDir dir("cli");
  const auto cfg_path = dir.path() / "tiny.cfg";
  std::ofstream(cfg_path) << "data.num_samples = 10\ndata.height = 16\ndata.width = 16\ndata.frames = 16\n"
                             "model.widths = 4,8\nmodel.heads = 2\nmodel.pose_hidden = 8,8\n"
                             "train.segments = 4\ntrain.epochs = 2\n";
  const auto data = (dir.path() / "data").string();
  auto gen = run({"gen-data", "--config", cfg_path.string(), "--out", data});
  ASSERT_EQ(gen.code, 0) << gen.err;
  EXPECT_NE(gen.out.find("# resolved config"), std::string::npos);
  EXPECT_NE(gen.out.find("wrote 10 clips (5 falls)"), std::string::npos) << gen.out;

  const auto run_a = (dir.path() / "run_a").string();
  auto tr = run({"train", data, "--config", cfg_path.string(), "--variant", "late", "--out", run_a});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "run_a" / "config.txt"));
  const auto pos = tr.out.find("best val_acc ");
  ASSERT_NE(pos, std::string::npos) << tr.out;
  const std::string best = tr.out.substr(pos + 13, tr.out.find(' ', pos + 13) - pos - 13);

  auto ev = run({"eval", "--out", run_a});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("val_acc " + best + "\n"), std::string::npos) << ev.out << " vs " << best;

  // Re-running from the logged config reproduces the metrics.
  const auto run_b = (dir.path() / "run_b").string();
  auto again = run({"train", "--config", (dir.path() / "run_a" / "config.txt").string(), "--out", run_b});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(test::read_file(dir.path() / "run_a" / "metrics.csv"), test::read_file(dir.path() / "run_b" / "metrics.csv"));
}

TEST(Cli, HeatmapSubcommandWritesTensor) {
  test::TempDir dir("cli");
  PoseSequence seq;
  seq.frames.resize(3);
  seq.frames[1].points[0] = {0.5, 0.5, true};
  write_keypoints(dir.path() / "kp.txt", seq);
  const auto out = dir.path() / "hm.gspt";
  auto r = run({"heatmap", (dir.path() / "kp.txt").string(), "1", "--out", out.string(), "--sigma", "1.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto hm = read_tensor_as<double>(out);
  EXPECT_EQ(hm.shape(), (Shape{1, 32, 32}));
  KeypointFrame f;
  f.points[0] = {0.5, 0.5, true};
  EXPECT_LE(test::max_abs_diff(hm, rasterize_heatmap<float>(f, 32, 32, {1.5}).cast<double>()), 0.0);
  EXPECT_EQ(run({"heatmap", (dir.path() / "kp.txt").string(), "3", "--out", out.string()}).code, 2);
  EXPECT_EQ(run({"heatmap", (dir.path() / "kp.txt").string(), "0"}).code, 2);
}

TEST(Cli, AblationTableHasOneRowPerVariant) {
  RunConfig cfg;
  const std::vector<AblationRow> rows{{Variant::Baseline, 4, 16, 0.5, 3}, {Variant::Early, 4, 16, 0.95, 7},
                                      {Variant::Late, 4, 16, 1.0, 2}};
  const auto table = ablation_table(rows, cfg);
  EXPECT_NE(table.find("| Method"), std::string::npos);
  for (const char* name : {"baseline", "early", "late"}) EXPECT_NE(table.find(name), std::string::npos) << table;
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
}

}  // namespace
}  // namespace gsp
