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

#include "gsp/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace gsp {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'P', 'T'};

template <typename U>
void put_le(std::ostream& out, U v) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& in, std::uint64_t& offset, const std::string& what) {
  unsigned char bytes[sizeof(U)];
  le::read_bytes(in, reinterpret_cast<char*>(bytes), sizeof(U), offset, what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
  return v;
}

template <typename T>
void write_impl(std::ostream& out, const Tensor<T>& t) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  out.write(kMagic, 4);
  le::write_u8(out, sizeof(T) == 4 ? 0 : 1);
  le::write_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.shape()) le::write_u32(out, static_cast<std::uint32_t>(d));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.numel() * sizeof(T)));
  } else {
    for (T v : t.data()) put_le<Bits>(out, std::bit_cast<Bits>(v));
  }
}

template <typename T>
Tensor<T> read_payload(std::istream& in, Shape shape, std::uint64_t& offset, const std::string& what) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::vector<T> data(shape_numel(shape));
  if constexpr (std::endian::native == std::endian::little) {
    le::read_bytes(in, reinterpret_cast<char*>(data.data()), data.size() * sizeof(T), offset, what);
  } else {
    for (auto& v : data) v = std::bit_cast<T>(get_le<Bits>(in, offset, what));
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
void write_file(const std::filesystem::path& path, const Tensor<T>& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open tensor file for writing: " + path.string());
  write_tensor(out, t);
  if (!out) throw IoError("failed writing tensor file: " + path.string());
}

}  // namespace

namespace le {

void write_u8(std::ostream& out, std::uint8_t v) { put_le(out, v); }
void write_u16(std::ostream& out, std::uint16_t v) { put_le(out, v); }
void write_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
std::uint8_t read_u8(std::istream& in, std::uint64_t& offset, const std::string& what) {
  return get_le<std::uint8_t>(in, offset, what);
}
std::uint16_t read_u16(std::istream& in, std::uint64_t& offset, const std::string& what) {
  return get_le<std::uint16_t>(in, offset, what);
}
std::uint32_t read_u32(std::istream& in, std::uint64_t& offset, const std::string& what) {
  return get_le<std::uint32_t>(in, offset, what);
}

void read_bytes(std::istream& in, char* dst, std::size_t n, std::uint64_t& offset, const std::string& what) {
  in.read(dst, static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != n) {
    throw FormatError(what + ": truncated at byte offset " + std::to_string(offset + got) + " (needed " +
                      std::to_string(n) + " bytes from offset " + std::to_string(offset) + ")");
  }
  offset += n;
}

}  // namespace le

void write_tensor(std::ostream& out, const Tensor<float>& t) { write_impl(out, t); }
void write_tensor(std::ostream& out, const Tensor<double>& t) { write_impl(out, t); }
void write_tensor(const std::filesystem::path& path, const Tensor<float>& t) { write_file(path, t); }
void write_tensor(const std::filesystem::path& path, const Tensor<double>& t) { write_file(path, t); }

AnyTensor read_tensor(std::istream& in, std::uint64_t origin, const std::string& what) {
  std::uint64_t offset = origin;
  char magic[4];
  le::read_bytes(in, magic, 4, offset, what);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(what + ": bad tensor magic at byte offset " + std::to_string(origin) + " (expected GSPT)");
  }
  const std::uint64_t dtype_at = offset;
  const std::uint8_t dtype = le::read_u8(in, offset, what);
  if (dtype > 1) {
    throw FormatError(what + ": unknown dtype code " + std::to_string(dtype) + " at byte offset " +
                      std::to_string(dtype_at));
  }
  const std::uint64_t ndim_at = offset;
  const std::uint32_t ndim = le::read_u32(in, offset, what);
  if (ndim == 0 || ndim > 16) {
    throw FormatError(what + ": implausible rank " + std::to_string(ndim) + " at byte offset " +
                      std::to_string(ndim_at));
  }
  Shape shape(ndim);
  for (auto& d : shape) {
    const std::uint64_t at = offset;
    d = le::read_u32(in, offset, what);
    if (d == 0) throw FormatError(what + ": zero dimension at byte offset " + std::to_string(at));
  }
  if (dtype == 0) return read_payload<float>(in, std::move(shape), offset, what);
  return read_payload<double>(in, std::move(shape), offset, what);
}

AnyTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file: " + path.string());
  return read_tensor(in, 0, path.string());
}

}  // namespace gsp
