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


#include "gsp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gsp {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename U>
U parse_num(std::string_view key, std::string_view v) {
  U out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for " + std::string(key));
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (v == "auto") return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    out.push_back(parse_num<std::size_t>(key, item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string list_text(const std::vector<std::size_t>& v) {
  if (v.empty()) return "auto";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  std::string key;
  Setter set;
  Getter get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      {"model.variant", [](RunConfig& c, auto, auto v) { c.model.variant = parse_variant(v); },
       [](const RunConfig& c) { return std::string(variant_name(c.model.variant)); }},
      {"model.widths", [](RunConfig& c, auto k, auto v) { c.model.backbone.widths = parse_list(k, v); },
       [](const RunConfig& c) { return list_text(c.model.backbone.widths); }},
      {"model.use_gsf", [](RunConfig& c, auto k, auto v) { c.model.backbone.use_gsf = parse_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.model.backbone.use_gsf ? "true" : "false"); }},
      {"model.heads", [](RunConfig& c, auto k, auto v) { c.model.heads = parse_num<std::size_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.model.heads); }},
      {"model.align", [](RunConfig& c, auto k, auto v) { c.model.align = parse_list(k, v); },
       [](const RunConfig& c) { return list_text(c.model.align); }},
      {"model.dropout", [](RunConfig& c, auto k, auto v) { c.model.dropout = parse_num<double>(k, v); },
       [](const RunConfig& c) { return number(c.model.dropout); }},
      {"model.pose_hidden", [](RunConfig& c, auto k, auto v) { c.model.pose_hidden = parse_list(k, v); },
       [](const RunConfig& c) { return list_text(c.model.pose_hidden); }},
      {"model.pose_relu3", [](RunConfig& c, auto k, auto v) { c.model.pose_relu3 = parse_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.model.pose_relu3 ? "true" : "false"); }},
      {"train.lr0", [](RunConfig& c, auto k, auto v) { c.train.lr0 = parse_num<double>(k, v); },
       [](const RunConfig& c) { return number(c.train.lr0); }},
      {"train.momentum", [](RunConfig& c, auto k, auto v) { c.train.momentum = parse_num<double>(k, v); },
       [](const RunConfig& c) { return number(c.train.momentum); }},
      {"train.weight_decay", [](RunConfig& c, auto k, auto v) { c.train.weight_decay = parse_num<double>(k, v); },
       [](const RunConfig& c) { return number(c.train.weight_decay); }},
      {"train.epochs", [](RunConfig& c, auto k, auto v) { c.train.epochs = parse_num<std::size_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
      {"train.batch", [](RunConfig& c, auto k, auto v) { c.train.batch_size = parse_num<std::size_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
      {"train.segments", [](RunConfig& c, auto k, auto v) { c.train.segments = parse_num<std::size_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.train.segments); }},
      {"train.eta_min", [](RunConfig& c, auto k, auto v) { c.train.eta_min = parse_num<double>(k, v); },
       [](const RunConfig& c) { return number(c.train.eta_min); }},
      {"train.seed", [](RunConfig& c, auto k, auto v) { c.train.seed = parse_num<std::uint64_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      {"train.val_fraction", [](RunConfig& c, auto k, auto v) { c.train.val_fraction = parse_num<double>(k, v); },
       [](const RunConfig& c) { return number(c.train.val_fraction); }},
      {"train.sigma", [](RunConfig& c, auto k, auto v) { c.train.sigma = parse_num<double>(k, v); },
       [](const RunConfig& c) { return number(c.train.sigma); }},
      {"data.num_samples", [](RunConfig& c, auto k, auto v) { c.data.num_samples = parse_num<std::size_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.data.num_samples); }},
      {"data.fall_fraction", [](RunConfig& c, auto k, auto v) { c.data.fall_fraction = parse_num<double>(k, v); },
       [](const RunConfig& c) { return number(c.data.fall_fraction); }},
      {"data.height", [](RunConfig& c, auto k, auto v) { c.data.height = parse_num<std::size_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.data.height); }},
      {"data.width", [](RunConfig& c, auto k, auto v) { c.data.width = parse_num<std::size_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.data.width); }},
      {"data.frames", [](RunConfig& c, auto k, auto v) { c.data.frames = parse_num<std::size_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.data.frames); }},
      {"data.mode", [](RunConfig& c, auto, auto v) { c.data.mode = parse_synth_mode(v); },
       [](const RunConfig& c) { return std::string(synth_mode_name(c.data.mode)); }},
      {"data.noise", [](RunConfig& c, auto k, auto v) { c.data.noise = parse_num<double>(k, v); },
       [](const RunConfig& c) { return number(c.data.noise); }},
      {"data.seed", [](RunConfig& c, auto k, auto v) { c.data.seed = parse_num<std::uint64_t>(k, v); },
       [](const RunConfig& c) { return std::to_string(c.data.seed); }},
      {"paths.data", [](RunConfig& c, auto, auto v) { c.data_dir = std::string(v); },
       [](const RunConfig& c) { return c.data_dir.generic_string(); }},
      {"paths.out", [](RunConfig& c, auto, auto v) { c.out_dir = std::string(v); },
       [](const RunConfig& c) { return c.out_dir.generic_string(); }},
  };
  return all;
}

}  // namespace

ModelConfig RunConfig::resolved_model() const {
  ModelConfig m = model;
  m.backbone.segments = train.segments;
  m.backbone.input_channels = m.input_channels();
  return m;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config_text(std::string_view text, const std::string& origin, RunConfig base) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'section.key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.find('.') == std::string_view::npos || value.empty()) {
      throw ConfigError(where + ": expected 'section.key = value'");
    }
    try {
      apply_setting(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return base;
}

RunConfig parse_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string(), std::move(base));
}

}  // namespace gsp
