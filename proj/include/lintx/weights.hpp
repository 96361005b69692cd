// Copyright 2026 The lintx Authors. All Rights Reserved.
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
//
// Named-tensor container and its on-disk form:
//
//   "LSTW" | version u16 | spec hash u64 | tensor count u32 |
//   per tensor: name length u32, name bytes, rank u32, extents u32 x rank,
//               float32 payload |
//   CRC32 (u32) of every preceding byte
//
// All integers and floats are little-endian. Values are rounded to float32
// once on save; loading widens them back exactly.
#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/crc.hpp>

#include "lintx/error.hpp"
#include "lintx/tensor.hpp"

namespace lintx {

inline constexpr std::uint16_t kWeightFormatVersion = 1;

class WeightStore {
 public:
  /// Inserts or replaces; a replaced entry keeps its position.
  void set(const std::string& name, Tensor value) {
    if (auto it = index_.find(name); it != index_.end()) {
      entries_[it->second].second = std::move(value);
      return;
    }
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, std::move(value));
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("missing weight '" + name + "'");
    return entries_[it->second].second;
  }

  Tensor& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("missing weight '" + name + "'");
    return entries_[it->second].second;
  }

  /// Copies every entry of `other` into this store.
  void merge(const WeightStore& other) {
    for (const auto& [name, value] : other.entries_) set(name, value);
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  std::uint64_t spec_hash = 0;

  bool operator==(const WeightStore& other) const {
    return spec_hash == other.spec_hash && entries_ == other.entries_;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("weight file truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_weights(const WeightStore& store) {
  std::vector<std::uint8_t> out = {'L', 'S', 'T', 'W'};
  detail::put_u16(out, kWeightFormatVersion);
  detail::put_u64(out, store.spec_hash);
  detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store.entries()) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  detail::put_u32(out, detail::crc32(out));
  return out;
}

inline WeightStore deserialize_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 2 + 8 + 4 + 4) throw FormatError("weight file truncated");
  if (bytes[0] != 'L' || bytes[1] != 'S' || bytes[2] != 'T' || bytes[3] != 'W') {
    throw FormatError("not an LSTW weight file");
  }
  const auto body = bytes.first(bytes.size() - 4);
  detail::Reader trailer(bytes.last(4));
  if (trailer.uint(4) != detail::crc32(body)) throw ChecksumError("weight file checksum mismatch");

  detail::Reader r(body.subspan(4));
  const auto version = static_cast<std::uint16_t>(r.uint(2));
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight format version " + std::to_string(version));
  }
  WeightStore store;
  store.spec_hash = r.uint(8);
  const std::uint64_t count = r.uint(4);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.string(r.uint(4));
    if (store.contains(name)) throw FormatError("duplicate weight '" + name + "'");
    const std::uint64_t rank = r.uint(4);
    if (rank == 0 || rank > 8) throw FormatError("bad rank for weight '" + name + "'");
    Shape shape;
    std::uint64_t elements = 1;
    for (std::uint64_t k = 0; k < rank; ++k) {
      shape.push_back(r.uint(4));
      if (shape.back() == 0) throw FormatError("zero extent in weight '" + name + "'");
      elements *= shape.back();
      if (elements > r.remaining()) throw FormatError("weight file truncated");
    }
    std::vector<double> data(elements);
    for (double& v : data) v = std::bit_cast<float>(static_cast<std::uint32_t>(r.uint(4)));
    store.set(name, Tensor(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in weight file");
  return store;
}

inline void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_weights(store);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                        std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

}  // namespace lintx
