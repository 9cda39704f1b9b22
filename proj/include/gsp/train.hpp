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
#include <iosfwd>
#include <string>
#include <vector>

#include "gsp/data.hpp"
#include "gsp/models.hpp"

namespace gsp {

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t epochs = 120;
  std::size_t batch_size = 4;
  std::size_t segments = 16;
  double eta_min = 0.0;
  std::uint64_t seed = 7;
  double val_fraction = 0.2;
  double sigma = 2.0;  // heatmap sigma for early fusion

  void validate() const;
};

/// eta_min + 0.5 * (lr0 - eta_min) * (1 + cos(pi * epoch / epochs)).
double cosine_lr(std::size_t epoch, const TrainConfig& cfg);

/// One velocity tensor per parameter, zero-initialized.
template <typename T>
struct OptimizerState {
  std::vector<Tensor<T>> velocity;

  static OptimizerState make(const TensorList<T>& params);
};

/// g' = grad + weight_decay * param (only where NamedTensor::decay),
/// v = momentum * v + g', param -= lr * v. Throws ShapeError when grads or
/// state do not mirror params.
template <typename T>
void sgd_momentum_step(const TensorList<T>& params, const std::vector<Tensor<T>>& grads, OptimizerState<T>& state,
                       double lr, const TrainConfig& cfg);

/// Same, reading each parameter's gradient slot (absent slot = zero).
template <typename T>
void sgd_momentum_step(const TensorList<T>& params, OptimizerState<T>& state, double lr, const TrainConfig& cfg);

struct MetricsRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

inline constexpr const char* kMetricsHeader = "epoch,train_loss,train_acc,val_acc,lr";
/// One CSV row, 6 significant digits per value.
std::string format_metrics_row(const MetricsRecord& r);

/// Gathers S frames per sample into model inputs. Heatmaps are rendered only
/// for early fusion and poses only for late fusion. Segment indices for
/// sample j come from derive_seed(seed, j).
template <typename T>
ModelInput<T> make_batch(const std::vector<const VideoSample*>& samples, Variant variant, std::size_t segments,
                         SegmentMode mode, std::uint64_t seed, double sigma);

struct TrainResult {
  std::vector<MetricsRecord> metrics;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  std::filesystem::path checkpoint;
};

/// Trains from `train.seed`, writing metrics.csv (flushed per epoch) and the
/// best-validation checkpoint best.gspc under out_dir. Ties keep the earlier
/// epoch. A trailing batch of one sample is merged into the previous batch.
/// Throws DivergenceError naming the epoch and last finite loss on NaN.
TrainResult run_training(const ModelConfig& model_cfg, const TrainConfig& train, const std::vector<VideoSample>& train_set,
                         const std::vector<VideoSample>& val_set, const std::filesystem::path& out_dir,
                         std::ostream* log = nullptr);

/// Eval-mode predictions with center-mode segments.
std::vector<int> predict_samples(FusionModel<float>& model, const std::vector<VideoSample>& samples,
                                 const TrainConfig& cfg);

/// Mean of [prediction == label]; 0 for an empty set.
double evaluate_accuracy(FusionModel<float>& model, const std::vector<VideoSample>& samples, const TrainConfig& cfg);

}  // namespace gsp
