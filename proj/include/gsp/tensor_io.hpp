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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>

#include "gsp/tensor.hpp"

// Binary tensor format, little-endian throughout:
//   "GSPT" | u8 dtype (0 = f32, 1 = f64) | u32 ndim | ndim x u32 dims | payload

namespace gsp {

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

void write_tensor(std::ostream& out, const Tensor<float>& t);
void write_tensor(std::ostream& out, const Tensor<double>& t);
void write_tensor(const std::filesystem::path& path, const Tensor<float>& t);
void write_tensor(const std::filesystem::path& path, const Tensor<double>& t);

/// Reads one record. `origin` is the stream's byte offset within its file and
/// `what` names the source; both appear in FormatError messages.
AnyTensor read_tensor(std::istream& in, std::uint64_t origin = 0, const std::string& what = "<stream>");
AnyTensor read_tensor(const std::filesystem::path& path);

/// Reads and converts to the requested precision.
template <typename T>
Tensor<T> read_tensor_as(const std::filesystem::path& path) {
  return std::visit([](const auto& t) { return t.template cast<T>(); }, read_tensor(path));
}

template <typename T>
Tensor<T> as_precision(const AnyTensor& any) {
  return std::visit([](const auto& t) { return t.template cast<T>(); }, any);
}

/// Little-endian scalar helpers shared by the binary formats.
namespace le {
void write_u8(std::ostream& out, std::uint8_t v);
void write_u16(std::ostream& out, std::uint16_t v);
void write_u32(std::ostream& out, std::uint32_t v);
std::uint8_t read_u8(std::istream& in, std::uint64_t& offset, const std::string& what);
std::uint16_t read_u16(std::istream& in, std::uint64_t& offset, const std::string& what);
std::uint32_t read_u32(std::istream& in, std::uint64_t& offset, const std::string& what);
void read_bytes(std::istream& in, char* dst, std::size_t n, std::uint64_t& offset, const std::string& what);
}  // namespace le

}  // namespace gsp
