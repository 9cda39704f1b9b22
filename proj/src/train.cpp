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


#include "gsp/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

#include "gsp/rng.hpp"

namespace gsp {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train: lr0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("train: batch size must be >= 1");
  if (segments == 0) throw ConfigError("train: segments must be >= 1");
  if (!(eta_min >= 0.0 && eta_min <= lr0)) throw ConfigError("train: eta_min must lie in [0, lr0]");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("train: val_fraction must lie in [0, 1)");
  if (!(sigma > 0.0)) throw ConfigError("train: heatmap sigma must be positive");
}

double cosine_lr(std::size_t epoch, const TrainConfig& cfg) {
  const double progress = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
  return cfg.eta_min + 0.5 * (cfg.lr0 - cfg.eta_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
OptimizerState<T> OptimizerState<T>::make(const TensorList<T>& params) {
  OptimizerState s;
  for (const auto& p : params) s.velocity.push_back(Tensor<T>::zeros(p.value.shape()));
  return s;
}

template <typename T>
void sgd_momentum_step(const TensorList<T>& params, const std::vector<Tensor<T>>& grads, OptimizerState<T>& state,
                       double lr, const TrainConfig& cfg) {
  if (grads.size() != params.size() || state.velocity.size() != params.size()) {
    throw ShapeError("sgd_momentum_step: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, " + std::to_string(state.velocity.size()) + " velocities");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape() || state.velocity[i].shape() != params[i].value.shape()) {
      throw ShapeError("sgd_momentum_step: '" + params[i].name + "' has shape " + shape_str(params[i].value.shape()) +
                       ", grad " + shape_str(grads[i].shape()) + ", velocity " + shape_str(state.velocity[i].shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> w = params[i].value;
    Tensor<T> v = state.velocity[i];
    const double wd = params[i].decay ? cfg.weight_decay : 0.0;
    const T* g = grads[i].ptr();
    T* wp = w.ptr();
    T* vp = v.ptr();
    for (std::size_t k = 0; k < w.numel(); ++k) {
      const double gk = static_cast<double>(g[k]) + wd * static_cast<double>(wp[k]);
      const double vk = cfg.momentum * static_cast<double>(vp[k]) + gk;
      vp[k] = static_cast<T>(vk);
      wp[k] = static_cast<T>(static_cast<double>(wp[k]) - lr * vk);
    }
  }
}

template <typename T>
void sgd_momentum_step(const TensorList<T>& params, OptimizerState<T>& state, double lr, const TrainConfig& cfg) {
  std::vector<Tensor<T>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(p.value.grad_tensor());
  sgd_momentum_step(params, grads, state, lr, cfg);
}

std::string format_metrics_row(const MetricsRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu,%.6g,%.6g,%.6g,%.6g", r.epoch, r.train_loss, r.train_acc, r.val_acc, r.lr);
  return buf;
}

template <typename T>
ModelInput<T> make_batch(const std::vector<const VideoSample*>& samples, Variant variant, std::size_t segments,
                         SegmentMode mode, std::uint64_t seed, double sigma) {
  if (samples.empty()) throw ContractError("make_batch: empty batch");
  const Shape& fs = samples.front()->frames.shape();
  const std::size_t c = fs[1], h = fs[2], w = fs[3], n = samples.size();
  const std::size_t frame_size = c * h * w;
  ModelInput<T> in;
  in.frames = Tensor<T>(Shape{n, segments, c, h, w});
  if (variant == Variant::Early) in.heatmaps = Tensor<T>(Shape{n, segments, 1, h, w});
  if (variant == Variant::Late) in.poses = Tensor<T>(Shape{n, segments, kPoseFeatureDim});
  const HeatmapOptions hm{sigma, HeatmapCombine::Max};
  for (std::size_t j = 0; j < n; ++j) {
    const VideoSample& s = *samples[j];
    if (s.frames.shape() != Shape{s.frames.dim(0), c, h, w}) {
      throw ShapeError("make_batch: sample " + s.id + " has frames " + shape_str(s.frames.shape()) +
                       ", batch expects [T," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]");
    }
    const auto idx = sample_segment_indices(s.frames.dim(0), segments, mode, derive_seed(seed, j));
    for (std::size_t k = 0; k < segments; ++k) {
      const float* src = s.frames.ptr() + idx[k] * frame_size;
      T* dst = in.frames.ptr() + (j * segments + k) * frame_size;
      for (std::size_t e = 0; e < frame_size; ++e) dst[e] = static_cast<T>(src[e]);
      const KeypointFrame& kf = s.poses.frames[idx[k]];
      if (variant == Variant::Early) {
        const Tensor<T> heat = rasterize_heatmap<T>(kf, w, h, hm);
        std::copy(heat.data().begin(), heat.data().end(), in.heatmaps.ptr() + (j * segments + k) * h * w);
      }
      if (variant == Variant::Late) {
        const auto f = kf.features();
        T* dst_pose = in.poses.ptr() + (j * segments + k) * kPoseFeatureDim;
        for (std::size_t e = 0; e < kPoseFeatureDim; ++e) dst_pose[e] = static_cast<T>(f[e]);
      }
    }
  }
  return in;
}

std::vector<int> predict_samples(FusionModel<float>& model, const std::vector<VideoSample>& samples,
                                 const TrainConfig& cfg) {
  const Mode prev = model.mode();
  model.set_mode(Mode::Eval);
  std::vector<int> preds;
  preds.reserve(samples.size());
  for (std::size_t b = 0; b < samples.size(); b += cfg.batch_size) {
    std::vector<const VideoSample*> batch;
    for (std::size_t j = b; j < std::min(samples.size(), b + cfg.batch_size); ++j) batch.push_back(&samples[j]);
    const auto in = make_batch<float>(batch, model.config().variant, cfg.segments, SegmentMode::Center, 0, cfg.sigma);
    Tape<float> tape(false);
    const auto labels = predict_label(model.forward(tape, in));
    preds.insert(preds.end(), labels.begin(), labels.end());
  }
  model.set_mode(prev);
  return preds;
}

double evaluate_accuracy(FusionModel<float>& model, const std::vector<VideoSample>& samples, const TrainConfig& cfg) {
  if (samples.empty()) return 0.0;
  const auto preds = predict_samples(model, samples, cfg);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) correct += preds[i] == samples[i].label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult run_training(const ModelConfig& model_cfg, const TrainConfig& train, const std::vector<VideoSample>& train_set,
                         const std::vector<VideoSample>& val_set, const std::filesystem::path& out_dir,
                         std::ostream* log) {
  train.validate();
  if (train_set.empty()) throw ConfigError("run_training: the training set is empty");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create run directory " + out_dir.string() + ": " + ec.message());

  FusionModel<float> model(model_cfg, train.seed);
  const TensorList<float> params = model.parameters();
  auto state = OptimizerState<float>::make(params);

  const auto metrics_path = out_dir / "metrics.csv";
  std::ofstream csv(metrics_path, std::ios::binary);
  if (!csv) throw IoError("cannot open metrics file: " + metrics_path.string());
  csv << kMetricsHeader << '\n' << std::flush;

  TrainResult result;
  result.checkpoint = out_dir / "best.gspc";
  double best = -1.0;
  double last_finite_loss = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, train);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng(derive_seed(train.seed, 0x5EED, epoch)).shuffle(order);

    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t b = 0; b < order.size(); b += train.batch_size) {
      batches.emplace_back(b, std::min(order.size(), b + train.batch_size));
    }
    // Batch-norm needs two samples per batch in train mode.
    if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }

    model.set_mode(Mode::Train);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<const VideoSample*> batch;
      std::vector<int> labels;
      for (std::size_t k = batches[bi].first; k < batches[bi].second; ++k) {
        batch.push_back(&train_set[order[k]]);
        labels.push_back(train_set[order[k]].label);
      }
      const std::uint64_t batch_seed = derive_seed(train.seed, epoch + 1, bi);
      const auto in = make_batch<float>(batch, model_cfg.variant, train.segments, SegmentMode::Random, batch_seed,
                                        train.sigma);
      Tape<float> tape;
      const Tensor<float> logits = model.forward(tape, in, derive_seed(batch_seed, 0xD70));
      const Tensor<float> loss = softmax_cross_entropy(tape, logits, labels);
      const double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + " (batch " + std::to_string(bi) +
                              "): loss is " + std::to_string(loss_value) + ", last finite loss " +
                              std::to_string(last_finite_loss));
      }
      last_finite_loss = loss_value;
      tape.backward(loss);
      sgd_momentum_step(params, state, lr, train);
      for (const auto& p : params) Tensor<float>(p.value).zero_grad();

      loss_sum += loss_value * static_cast<double>(batch.size());
      const auto preds = predict_label(logits);
      for (std::size_t j = 0; j < preds.size(); ++j) correct += preds[j] == labels[j] ? 1 : 0;
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    rec.val_acc = evaluate_accuracy(model, val_set, train);
    result.metrics.push_back(rec);
    csv << format_metrics_row(rec) << '\n' << std::flush;
    if (!csv) throw IoError("failed writing metrics file: " + metrics_path.string());
    if (log != nullptr) *log << variant_name(model_cfg.variant) << " " << format_metrics_row(rec) << std::endl;

    if (rec.val_acc > best) {
      best = rec.val_acc;
      result.best_epoch = epoch;
      result.best_val_acc = rec.val_acc;
      save_checkpoint(result.checkpoint, model);
    }
  }
  return result;
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void sgd_momentum_step(const TensorList<float>&, const std::vector<Tensor<float>>&, OptimizerState<float>&,
                                double, const TrainConfig&);
template void sgd_momentum_step(const TensorList<double>&, const std::vector<Tensor<double>>&, OptimizerState<double>&,
                                double, const TrainConfig&);
template void sgd_momentum_step(const TensorList<float>&, OptimizerState<float>&, double, const TrainConfig&);
template void sgd_momentum_step(const TensorList<double>&, OptimizerState<double>&, double, const TrainConfig&);
template ModelInput<float> make_batch(const std::vector<const VideoSample*>&, Variant, std::size_t, SegmentMode,
                                      std::uint64_t, double);
template ModelInput<double> make_batch(const std::vector<const VideoSample*>&, Variant, std::size_t, SegmentMode,
                                       std::uint64_t, double);

}  // namespace gsp
