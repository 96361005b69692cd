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

#include <cmath>
#include <utility>
#include <vector>

#include "lintx/linalg.hpp"
#include "lintx/tensor.hpp"

namespace lintx {

/// Feature activations laid out channels-by-pixels (C×N, N = H·W).
class FeatureMap {
 public:
  FeatureMap() = default;

  FeatureMap(Tensor matrix, std::size_t height, std::size_t width)
      : data_(std::move(matrix)), height_(height), width_(width) {
    require_rank2(data_, "FeatureMap");
    if (data_.dim(1) != height_ * width_) {
      throw ShapeError("FeatureMap: " + std::to_string(data_.dim(1)) +
                       " pixels but H*W = " + std::to_string(height_ * width_));
    }
    require_finite(data_, "FeatureMap");
  }

  /// From a [C×H×W] activation tensor.
  static FeatureMap from_chw(const Tensor& chw) {
    if (chw.rank() != 3) {
      throw ShapeError("FeatureMap::from_chw: expected rank 3, got " +
                       shape_string(chw.shape()));
    }
    return FeatureMap(chw.reshaped({chw.dim(0), chw.dim(1) * chw.dim(2)}),
                      chw.dim(1), chw.dim(2));
  }

  /// A bare C×N matrix viewed as a 1×N image.
  static FeatureMap from_matrix(Tensor matrix) {
    require_rank2(matrix, "FeatureMap::from_matrix");
    const std::size_t n = matrix.dim(1);
    return FeatureMap(std::move(matrix), 1, n);
  }

  Tensor to_chw() const { return data_.reshaped({channels(), height_, width_}); }

  std::size_t channels() const { return data_.dim(0); }
  std::size_t pixels() const { return data_.dim(1); }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  const Tensor& matrix() const { return data_; }
  double operator()(std::size_t c, std::size_t n) const { return data_(c, n); }

  bool operator==(const FeatureMap&) const = default;

 private:
  Tensor data_;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
};

/// Centered second-moment matrix (1/N)·F̄F̄ᵀ.
struct CovarianceMatrix {
  Tensor matrix;
  std::size_t dim() const { return matrix.dim(0); }
};

/// N×N normalized pixel affinity F̄ᵀ·cov(F)⁻¹·F̄.
struct AffinityMatrix {
  Tensor matrix;
  std::size_t pixels() const { return matrix.dim(0); }
};

inline constexpr std::size_t kAffinityMaxPixels = 4096;

struct Centered {
  FeatureMap centered;
  std::vector<double> mean;
};

inline std::vector<double> channel_mean(const FeatureMap& f) {
  const std::size_t c = f.channels(), n = f.pixels();
  std::vector<double> mean(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += f(i, j);
    mean[i] = s / static_cast<double>(n);
  }
  return mean;
}

inline Centered center(const FeatureMap& f) {
  std::vector<double> mean = channel_mean(f);
  Tensor x = f.matrix();
  for (std::size_t i = 0; i < f.channels(); ++i)
    for (std::size_t j = 0; j < f.pixels(); ++j) x(i, j) -= mean[i];
  return {FeatureMap(std::move(x), f.height(), f.width()), std::move(mean)};
}

/// (1/N)·F·Fᵀ without centering; exactly symmetric.
inline Tensor gram(const FeatureMap& f) {
  const std::size_t c = f.channels(), n = f.pixels();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double* x = f.matrix().data().data();
  Tensor g({c, c});
  for (std::size_t i = 0; i < c; ++i) {
    const double* xi = x + i * n;
    for (std::size_t j = i; j < c; ++j) {
      const double* xj = x + j * n;
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += xi[k] * xj[k];
      g(i, j) = s * inv_n;
      g(j, i) = g(i, j);
    }
  }
  return g;
}

inline CovarianceMatrix covariance(const FeatureMap& f) {
  return {gram(center(f).centered)};
}

/// Normalized affinity of `f`. `eps` floors the covariance spectrum before
/// inversion; `max_pixels` caps the N×N output.
inline AffinityMatrix affinity(const FeatureMap& f, double eps,
                               std::size_t max_pixels = kAffinityMaxPixels) {
  const std::size_t n = f.pixels();
  if (n > max_pixels) {
    throw RangeError("affinity: " + std::to_string(n) + " pixels exceeds cap of " +
                     std::to_string(max_pixels));
  }
  const Centered c = center(f);
  const Tensor inv = spd_power(gram(c.centered), -1.0, eps);
  const Tensor& xb = c.centered.matrix();
  const Tensor solved = matmul(inv, xb);  // C×N
  const std::size_t ch = f.channels();
  Tensor aff({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < ch; ++k) s += xb(k, i) * solved(k, j);
      aff(i, j) = s;
      aff(j, i) = s;
    }
  return {require_finite(aff, "affinity")};
}

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Per-channel mean and sqrt(population variance + eps).
inline ChannelStats channel_mean_std(const FeatureMap& f, double eps) {
  ChannelStats s{channel_mean(f), std::vector<double>(f.channels())};
  const std::size_t n = f.pixels();
  for (std::size_t i = 0; i < f.channels(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = f(i, j) - s.mean[i];
      acc += d * d;
    }
    s.std[i] = std::sqrt(acc / static_cast<double>(n) + eps);
  }
  return s;
}

}  // namespace lintx
