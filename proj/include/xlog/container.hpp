// Copyright 2026 The Authors.
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

// XLG1 binary container.
//
// Layout (all integers little-endian):
//
//   "XLG1"
//   u32  tensor count
//   per tensor:
//     u16  name length, name bytes (UTF-8)
//     u8   rank
//     u64  dims[rank]
//     f64  payload, row-major, product(dims) values
//   u32  metadata length, metadata bytes (JSON text, may be empty)

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "xlog/core.hpp"

namespace xlog {

struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;

  std::uint64_t size() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

struct Container {
  std::map<std::string, Tensor> tensors;  // written in name order
  nlohmann::json meta;

  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("XLG1: missing tensor '" + name + "'");
    return it->second;
  }
};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw FormatError("XLG1: truncated input");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline void write_container(std::ostream& out, const Container& c) {
  out.write("XLG1", 4);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    if (t.data.size() != t.size()) throw ShapeError("XLG1: tensor '" + name + "' payload does not match shape");
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) detail::put_le<std::uint64_t>(out, d);
    for (double v : t.data) detail::put_le<double>(out, v);
  }
  const std::string meta = c.meta.is_null() ? std::string() : c.meta.dump();
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
}

inline Container read_container(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "XLG1", 4) != 0) throw FormatError("XLG1: bad magic bytes");
  Container c;
  const auto count = detail::get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::get_le<std::uint16_t>(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw FormatError("XLG1: truncated name");
    Tensor t;
    const auto rank = detail::get_le<std::uint8_t>(in);
    for (std::uint8_t r = 0; r < rank; ++r) t.shape.push_back(detail::get_le<std::uint64_t>(in));
    const auto n = t.size();
    if (n > (std::uint64_t{1} << 34)) throw FormatError("XLG1: implausible tensor size");
    t.data.resize(static_cast<std::size_t>(n));
    for (auto& v : t.data) v = detail::get_le<double>(in);
    c.tensors.emplace(std::move(name), std::move(t));
  }
  const auto meta_len = detail::get_le<std::uint32_t>(in);
  if (meta_len > 0) {
    std::string meta(meta_len, '\0');
    if (!in.read(meta.data(), meta_len)) throw FormatError("XLG1: truncated metadata");
    c.meta = nlohmann::json::parse(meta);
  }
  return c;
}

inline void save_container(const std::string& path, const Container& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_container(out, c);
  if (!out) throw Error("write failed: " + path);
}

inline Container load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_container(in);
}

inline Tensor to_tensor(const Matrix& m) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.assign(m.data(), m.data() + m.size());
  return t;
}

inline Matrix to_matrix(const Tensor& t) {
  if (t.shape.size() != 2) throw ShapeError("XLG1: expected a rank-2 tensor");
  Matrix m(static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
  std::copy(t.data.begin(), t.data.end(), m.data());
  return m;
}

}  // namespace xlog
