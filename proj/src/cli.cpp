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


#include "gsp/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>

#include "gsp/gradcheck_suite.hpp"
#include "gsp/tensor_io.hpp"

namespace gsp {

namespace {

std::string percent(double acc) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * acc);
  return buf;
}

std::string method_name(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline (RGB only)";
    case Variant::Early: return "early fusion (RGB + heatmap)";
    case Variant::Late: return "late fusion (RGB + pose)";
  }
  return "";
}

std::size_t count_keypoint_frames(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open keypoint file: " + path.string());
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b != std::string::npos && line[b] != '#') ++n;
  }
  return n;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw IoError("cannot write " + path.string());
}

void log_config(std::ostream& out, const RunConfig& cfg) { out << "# resolved config\n" << cfg.to_text() << std::flush; }

}  // namespace

DatasetSplits load_dataset_splits(const std::filesystem::path& data_dir, const TrainConfig& cfg) {
  const DatasetManifest manifest = read_manifest(data_dir / "manifest.tsv");
  if (manifest.size() == 0) throw ConfigError("dataset " + data_dir.string() + " has no samples");
  const auto [train, val] = dataset_split(manifest, cfg.val_fraction, cfg.seed);
  return {load_samples(train), load_samples(val)};
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::filesystem::path& data_dir,
                                      const std::filesystem::path& out_dir, std::ostream* log) {
  const DatasetSplits data = load_dataset_splits(data_dir, cfg.train);
  std::vector<AblationRow> rows;
  for (Variant v : {Variant::Baseline, Variant::Early, Variant::Late}) {
    RunConfig run = cfg;
    run.model.variant = v;
    run.data_dir = data_dir;
    run.out_dir = out_dir / std::string(variant_name(v));
    std::filesystem::create_directories(run.out_dir);
    write_text(run.out_dir / "config.txt", run.to_text());
    const TrainResult res = run_training(run.resolved_model(), run.train, data.train, data.val, run.out_dir, log);
    rows.push_back({v, run.train.batch_size, run.train.segments, res.best_val_acc, res.best_epoch});
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows, const RunConfig& cfg) {
  std::string tag = "toy-GSF";
  for (std::size_t w : cfg.model.backbone.widths) tag += "-" + std::to_string(w);
  std::string s = "| Method | Backbone | Batch | Segments | Accuracy |\n|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    s += "| " + method_name(r.variant) + " | " + tag + " | " + std::to_string(r.batch) + " | " +
         std::to_string(r.segments) + " | " + percent(r.accuracy) + " |\n";
  }
  return s;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gate-shift-fuse video classifiers with pose fusion.", "gsp"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path, variant, align, mode, out_flag;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> batch, segments, epochs, heads;
  std::optional<double> sigma;
  bool pose_relu3 = false;
  app.add_option("--config", config_path, "Config file of section.key = value lines");
  app.add_option("--seed", seed, "Seed for training and data generation");
  app.add_option("--variant", variant, "Model variant")->check(CLI::IsMember({"baseline", "early", "late"}));
  app.add_option("--batch", batch, "Batch size")->check(CLI::IsMember({4, 8}));
  app.add_option("--segments", segments, "Segments per clip")->check(CLI::IsMember({16, 32}));
  app.add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
  app.add_option("--sigma", sigma, "Heatmap sigma in pixels")->check(CLI::PositiveNumber);
  app.add_option("--align", align, "Alignment layer widths, e.g. 64,32");
  app.add_option("--heads", heads, "Attention heads")->check(CLI::PositiveNumber);
  app.add_option("--mode", mode, "Synthetic data mode")->check(CLI::IsMember({"pose-dominant", "appearance-correlated"}));
  app.add_flag("--pose-relu3", pose_relu3, "ReLU after the third pose MLP layer");
  app.add_option("--out", out_flag, "Output directory (file for heatmap)");

  std::optional<std::string> data_arg, split_arg;
  std::string keypoints_arg;
  std::size_t frame_arg = 0;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  auto* train = app.add_subcommand("train", "Train one variant");
  train->add_option("data_dir", data_arg, "Dataset directory (default paths.data)");
  auto* eval = app.add_subcommand("eval", "Evaluate the best checkpoint of a run directory (--out)");
  eval->add_option("split", split_arg, "val (default) or train")->check(CLI::IsMember({"train", "val"}));
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  auto* heat = app.add_subcommand("heatmap", "Rasterize one keypoint frame to a tensor file (--out)");
  heat->add_option("keypoints", keypoints_arg, "Keypoint file")->required();
  heat->add_option("frame", frame_arg, "Frame index")->required();
  auto* ablate = app.add_subcommand("ablate", "Train all three variants and print a comparison table");
  ablate->add_option("data_dir", data_arg, "Dataset directory (default: generate under --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 1;
  }

  try {
    RunConfig cfg;
    if (config_path) cfg = parse_config(*config_path);
    if (seed) cfg.train.seed = cfg.data.seed = *seed;
    if (variant) cfg.model.variant = parse_variant(*variant);
    if (batch) cfg.train.batch_size = *batch;
    if (segments) cfg.train.segments = *segments;
    if (epochs) cfg.train.epochs = *epochs;
    if (sigma) cfg.train.sigma = *sigma;
    if (align) apply_setting(cfg, "model.align", *align);
    if (heads) cfg.model.heads = *heads;
    if (mode) cfg.data.mode = parse_synth_mode(*mode);
    if (pose_relu3) cfg.model.pose_relu3 = true;

    if (gen->parsed()) {
      if (out_flag) cfg.data_dir = *out_flag;
      log_config(out, cfg);
      const DatasetManifest m = generate_synthetic_dataset(cfg.data, cfg.data_dir);
      out << "wrote " << m.size() << " clips (" << m.count_label(1) << " falls) to " << cfg.data_dir.string() << "\n";
      return 0;
    }
    if (train->parsed()) {
      if (out_flag) cfg.out_dir = *out_flag;
      if (data_arg) cfg.data_dir = *data_arg;
      log_config(out, cfg);
      cfg.train.validate();
      cfg.resolved_model().validate();
      std::filesystem::create_directories(cfg.out_dir);
      write_text(cfg.out_dir / "config.txt", cfg.to_text());
      const DatasetSplits data = load_dataset_splits(cfg.data_dir, cfg.train);
      const TrainResult res = run_training(cfg.resolved_model(), cfg.train, data.train, data.val, cfg.out_dir, &out);
      char buf[96];
      std::snprintf(buf, sizeof(buf), "best val_acc %.6g at epoch %zu\n", res.best_val_acc, res.best_epoch);
      out << buf << "checkpoint " << res.checkpoint.string() << "\n";
      return 0;
    }
    if (eval->parsed()) {
      const std::filesystem::path run_dir = out_flag ? std::filesystem::path(*out_flag) : cfg.out_dir;
      const RunConfig run = parse_config(run_dir / "config.txt");
      log_config(out, run);
      FusionModel<float> model(run.resolved_model(), run.train.seed);
      load_checkpoint(run_dir / "best.gspc", model);
      const DatasetSplits data = load_dataset_splits(run.data_dir, run.train);
      const std::string split = split_arg.value_or("val");
      const double acc = evaluate_accuracy(model, split == "val" ? data.val : data.train, run.train);
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%s_acc %.6g\n", split.c_str(), acc);
      out << buf;
      return 0;
    }
    if (grad->parsed()) {
      log_config(out, cfg);
      bool ok = true;
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-24s %14s %7s %9s\n", "op", "max_rel_err", "checks", "restarts");
      out << buf;
      for (const auto& r : run_gradcheck_suite()) {
        const bool pass = r.max_rel_error <= kGradCheckTolerance;
        ok = ok && pass;
        std::snprintf(buf, sizeof(buf), "%-24s %14.3e %7zu %9d %s\n", r.op.c_str(), r.max_rel_error, r.checks,
                      r.restarts, pass ? "ok" : "FAIL");
        out << buf;
      }
      out << (ok ? "all ops within 1e-5\n" : "gradient check FAILED\n");
      return ok ? 0 : 2;
    }
    if (heat->parsed()) {
      if (!out_flag) throw ConfigError("heatmap needs --out FILE");
      log_config(out, cfg);
      const PoseSequence seq = load_keypoints(keypoints_arg, count_keypoint_frames(keypoints_arg));
      if (frame_arg >= seq.frame_count()) {
        throw RangeError("frame " + std::to_string(frame_arg) + " out of range: file has " +
                         std::to_string(seq.frame_count()) + " frames");
      }
      const auto hm = rasterize_heatmap<float>(seq.frames[frame_arg], cfg.data.width, cfg.data.height,
                                               HeatmapOptions{cfg.train.sigma, HeatmapCombine::Max});
      write_tensor(std::filesystem::path(*out_flag), hm);
      out << "wrote heatmap " << shape_str(hm.shape()) << " to " << *out_flag << "\n";
      return 0;
    }
    if (ablate->parsed()) {
      if (out_flag) cfg.out_dir = *out_flag;
      std::filesystem::path data_dir = cfg.out_dir / "data";
      if (data_arg) {
        data_dir = *data_arg;
      } else {
        generate_synthetic_dataset(cfg.data, data_dir);
      }
      cfg.data_dir = data_dir;
      log_config(out, cfg);
      const auto rows = run_ablation(cfg, data_dir, cfg.out_dir, &out);
      const std::string table = ablation_table(rows, cfg);
      write_text(cfg.out_dir / "ablation.md", table);
      out << table;
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace gsp
