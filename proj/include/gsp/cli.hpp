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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gsp/config.hpp"

namespace gsp {

/// Train / validation samples of a dataset directory holding manifest.tsv.
struct DatasetSplits {
  std::vector<VideoSample> train;
  std::vector<VideoSample> val;
};

DatasetSplits load_dataset_splits(const std::filesystem::path& data_dir, const TrainConfig& cfg);

struct AblationRow {
  Variant variant = Variant::Baseline;
  std::size_t batch = 0;
  std::size_t segments = 0;
  double accuracy = 0.0;  // best validation accuracy
  std::size_t best_epoch = 0;
};

/// Trains baseline, early and late fusion on one dataset with a shared seed,
/// each into out_dir/<variant>.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::filesystem::path& data_dir,
                                      const std::filesystem::path& out_dir, std::ostream* log = nullptr);

/// Markdown table: method, backbone, batch size, segments, accuracy.
std::string ablation_table(const std::vector<AblationRow>& rows, const RunConfig& cfg);

/// Entry point behind the gsp executable. Returns 0 on success, 1 on a usage
/// error and 2 on a runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gsp
