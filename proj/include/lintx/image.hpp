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
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "lintx/error.hpp"
#include "lintx/linear_transfer.hpp"
#include "lintx/tensor.hpp"

namespace lintx {

/// Raw 8-bit raster as read from a binary PNM file.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 (P5) or 3 (P6)
  std::vector<std::uint8_t> pixels;
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

class PnmHeader {
 public:
  explicit PnmHeader(const std::vector<std::uint8_t>& b) : b_(b) {}

  std::size_t number() {
    skip_space();
    if (pos_ >= b_.size() || b_[pos_] < '0' || b_[pos_] > '9') {
      throw FormatError("malformed PPM header");
    }
    std::size_t v = 0;
    while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > (1u << 24)) throw FormatError("malformed PPM header: value too large");
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the payload.
  std::size_t payload_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw FormatError("malformed PPM header");
    return pos_ + 1;
  }

  std::size_t pos_ = 2;

 private:
  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& b_;
};

}  // namespace detail

/// Reads P6 (colour) or, when `allow_gray`, P5 (grayscale); maxval must be 255.
inline Raster read_pnm(const std::filesystem::path& path, bool allow_gray = false) {
  const std::vector<std::uint8_t> b = detail::read_file(path);
  if (b.size() < 2 || b[0] != 'P') throw FormatError("'" + path.string() + "' is not a PPM file");
  std::size_t channels = 0;
  if (b[1] == '6') {
    channels = 3;
  } else if (b[1] == '5' && allow_gray) {
    channels = 1;
  } else {
    throw FormatError("unsupported PPM variant P" + std::string(1, static_cast<char>(b[1])) +
                      " in '" + path.string() + "'");
  }
  detail::PnmHeader h(b);
  const std::size_t width = h.number();
  const std::size_t height = h.number();
  const std::size_t maxval = h.number();
  if (width == 0 || height == 0) throw FormatError("malformed PPM header: zero size");
  if (maxval != 255) throw FormatError("unsupported PPM variant: maxval " + std::to_string(maxval));
  const std::size_t start = h.payload_start();
  const std::size_t need = width * height * channels;
  if (b.size() < start + need) throw FormatError("truncated PPM payload in '" + path.string() + "'");
  return {width, height, channels,
          std::vector<std::uint8_t>(b.begin() + static_cast<std::ptrdiff_t>(start),
                                    b.begin() + static_cast<std::ptrdiff_t>(start + need))};
}

/// [3×H×W] tensor with values byte/255.
inline Tensor read_image(const std::filesystem::path& path) {
  const Raster r = read_pnm(path);
  Tensor t({3, r.height, r.width});
  for (std::size_t y = 0; y < r.height; ++y)
    for (std::size_t x = 0; x < r.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        t(c, y, x) = r.pixels[(y * r.width + x) * 3 + c] / 255.0;
  return t;
}

/// Clamps to [0,1] and rounds half up to 0..255.
inline std::uint8_t quantize_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

inline std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_image: expected [3 x H x W], got " + shape_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 3 * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.push_back(quantize_byte(image(c, y, x)));
  return out;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_image(const Tensor& image, const std::filesystem::path& path) {
  write_bytes(path, encode_ppm(image));
}

/// Per-pixel byte labels from a grayscale (P5) or colour (P6, first channel) file.
struct LabelImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;
};

inline LabelImage read_label_image(const std::filesystem::path& path) {
  const Raster r = read_pnm(path, true);
  LabelImage out{r.height, r.width, std::vector<std::uint8_t>(r.width * r.height)};
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = r.pixels[i * r.channels];
  return out;
}

/// Each distinct byte value becomes a region, numbered in ascending byte order.
inline RegionMask read_mask(const std::filesystem::path& path) {
  const LabelImage raw = read_label_image(path);
  std::map<std::uint8_t, std::uint32_t> ids;
  for (std::uint8_t v : raw.values) ids.emplace(v, 0);
  std::uint32_t next = 0;
  for (auto& [value, id] : ids) id = next++;
  RegionMask m{raw.height, raw.width, std::vector<std::uint32_t>(raw.values.size()), next};
  for (std::size_t i = 0; i < raw.values.size(); ++i) m.labels[i] = ids[raw.values[i]];
  return m;
}

inline void write_mask(const RegionMask& mask, const std::filesystem::path& path) {
  const std::string header =
      "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::uint32_t l : mask.labels) out.push_back(static_cast<std::uint8_t>(l));
  write_bytes(path, out);
}

}  // namespace lintx
