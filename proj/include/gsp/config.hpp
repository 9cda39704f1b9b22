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
#include <string>
#include <string_view>

#include "gsp/data.hpp"
#include "gsp/models.hpp"
#include "gsp/train.hpp"

namespace gsp {

/// Settings for one CLI run, grouped as model / train / data / paths.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SyntheticConfig data;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "runs/latest";

  /// Model config with the backbone segment count taken from train.segments.
  ModelConfig resolved_model() const;
  /// Every key as `section.key = value`, in a fixed order. Parsing the text
  /// back yields an identical config.
  std::string to_text() const;
};

/// Sets one `section.key` from its textual value. Throws ConfigError naming
/// the key when it is unknown or the value does not parse.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Line-oriented `section.key = value`; '#' starts a comment line; later
/// duplicates win. Errors carry `origin` and the line number.
RunConfig parse_config_text(std::string_view text, const std::string& origin = "<config>", RunConfig base = {});
RunConfig parse_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace gsp
