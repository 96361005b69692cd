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
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lintx/feature_stats.hpp"
#include "lintx/linalg.hpp"

namespace lintx {

/// Linear map applied to centered content features; not necessarily symmetric.
struct TransformMatrix {
  Tensor matrix;
  std::size_t dim() const { return matrix.dim(0); }
};

struct ClosedFormConfig {
  /// Eigenvalue floor relative to the mean eigenvalue of each covariance.
  double eps = 1e-5;
  /// Free orthogonal factor between coloring and whitening. Empty = identity.
  Tensor orthogonal_u;

  void validate(std::size_t dim) const {
    if (!(eps > 0.0)) throw RangeError("ClosedFormConfig: eps must be positive");
    if (orthogonal_u.empty()) return;
    require_square(orthogonal_u, "ClosedFormConfig::orthogonal_u");
    if (orthogonal_u.dim(0) != dim) {
      throw ShapeError("ClosedFormConfig: U is " + shape_string(orthogonal_u.shape()) +
                       " but covariances are " + std::to_string(dim) + "-dimensional");
    }
    const Tensor utu = matmul(transpose(orthogonal_u), orthogonal_u);
    if (frob_norm(utu - Tensor::identity(dim)) > 1e-10 * static_cast<double>(dim)) {
      throw RangeError("ClosedFormConfig: U is not orthogonal");
    }
  }
};

/// Absolute eigenvalue floor: eps_rel times the mean eigenvalue.
inline double eigen_floor(const EigenDecomp& eig, double eps_rel) {
  double sum = 0.0;
  for (double v : eig.values) sum += v;
  const double mean = sum / static_cast<double>(eig.values.size());
  return eps_rel * (mean > 0.0 ? mean : 1.0);
}

/// cov_s^{1/2}; depends on the style alone, so it can be computed once and reused.
inline Tensor coloring_matrix(const CovarianceMatrix& cov_s, const ClosedFormConfig& cfg) {
  const EigenDecomp eig = sym_eig(cov_s.matrix);
  return spd_power(eig, 0.5, eigen_floor(eig, cfg.eps));
}

inline Tensor whitening_matrix(const CovarianceMatrix& cov_c, const ClosedFormConfig& cfg) {
  const EigenDecomp eig = sym_eig(cov_c.matrix);
  return spd_power(eig, -0.5, eigen_floor(eig, cfg.eps));
}

/// coloring · U · cov_c^{-1/2}.
inline TransformMatrix compose_transform(const Tensor& coloring, const CovarianceMatrix& cov_c,
                                         const ClosedFormConfig& cfg) {
  if (coloring.dim(0) != cov_c.dim()) {
    throw ShapeError("closed_form_T: content covariance is " + std::to_string(cov_c.dim()) +
                     "-dimensional, style is " + std::to_string(coloring.dim(0)));
  }
  cfg.validate(cov_c.dim());
  const Tensor left = cfg.orthogonal_u.empty() ? coloring : matmul(coloring, cfg.orthogonal_u);
  return {matmul(left, whitening_matrix(cov_c, cfg))};
}

/// Whitening-coloring transform mapping cov_c onto cov_s: T·cov_c·Tᵀ = cov_s.
inline TransformMatrix closed_form_T(const CovarianceMatrix& cov_c, const CovarianceMatrix& cov_s,
                                     const ClosedFormConfig& cfg = {}) {
  if (cov_c.dim() != cov_s.dim()) {
    throw ShapeError("closed_form_T: covariance dimensions differ");
  }
  cfg.validate(cov_c.dim());
  return compose_transform(coloring_matrix(cov_s, cfg), cov_c, cfg);
}

/// T·(f_c − mean(f_c)) + style_mean, per pixel.
inline FeatureMap apply_transform(const FeatureMap& f_c, const TransformMatrix& t,
                                  std::span<const double> style_mean) {
  const std::size_t c = f_c.channels();
  if (t.matrix.rank() != 2 || t.matrix.dim(0) != c || t.matrix.dim(1) != c ||
      style_mean.size() != c) {
    throw ShapeError("apply_transform: transform " + shape_string(t.matrix.shape()) +
                     ", mean length " + std::to_string(style_mean.size()) + ", features have " +
                     std::to_string(c) + " channels");
  }
  Tensor out = matmul(t.matrix, center(f_c).centered.matrix());
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < f_c.pixels(); ++j) out(i, j) += style_mean[i];
  return FeatureMap(std::move(out), f_c.height(), f_c.width());
}

/// Per-channel mean/std matching. Content std is floored at `eps`.
inline FeatureMap adain_transform(const FeatureMap& f_c, const FeatureMap& f_s, double eps) {
  if (f_c.channels() != f_s.channels()) {
    throw ShapeError("adain_transform: channel counts differ");
  }
  const ChannelStats sc = channel_mean_std(f_c, 0.0);
  const ChannelStats ss = channel_mean_std(f_s, 0.0);
  Tensor out = f_c.matrix();
  for (std::size_t i = 0; i < f_c.channels(); ++i) {
    const double gain = ss.std[i] / std::max(sc.std[i], eps);
    for (std::size_t j = 0; j < f_c.pixels(); ++j)
      out(i, j) = gain * (out(i, j) - sc.mean[i]) + ss.mean[i];
  }
  return FeatureMap(std::move(out), f_c.height(), f_c.width());
}

/// ‖cov(f_d) − target‖_F / max(‖target‖_F, 1e-12).
inline double verify_covariance_match(const FeatureMap& f_d, const CovarianceMatrix& cov_target) {
  if (f_d.channels() != cov_target.dim()) {
    throw ShapeError("verify_covariance_match: dimension mismatch");
  }
  const Tensor diff = covariance(f_d).matrix - cov_target.matrix;
  return frob_norm(diff) / std::max(frob_norm(cov_target.matrix), 1e-12);
}

inline double verify_affinity_preserved(const FeatureMap& f_c, const FeatureMap& f_d, double eps,
                                        std::size_t max_pixels = kAffinityMaxPixels) {
  if (f_c.pixels() != f_d.pixels()) {
    throw ShapeError("verify_affinity_preserved: pixel counts differ");
  }
  const Tensor a_c = affinity(f_c, eps, max_pixels).matrix;
  const Tensor a_d = affinity(f_d, eps, max_pixels).matrix;
  return frob_norm(a_d - a_c) / std::max(frob_norm(a_c), 1e-12);
}

/// Per-pixel region labels in [0, region_count).
struct RegionMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> labels;
  std::uint32_t region_count = 0;

  void validate() const {
    if (labels.size() != height * width) throw ShapeError("RegionMask: label count != H*W");
    for (std::uint32_t l : labels) {
      if (l >= region_count) {
        throw RangeError("RegionMask: label " + std::to_string(l) + " >= region count " +
                         std::to_string(region_count));
      }
    }
  }
};

/// Nearest-neighbor resampling of labels to `height`×`width`.
inline RegionMask downsample_mask(const RegionMask& mask, std::size_t height, std::size_t width) {
  if (mask.height == height && mask.width == width) return mask;
  if (mask.height % height != 0 || mask.width % width != 0) {
    throw ShapeError("mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                     " is not an integer multiple of features " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  RegionMask out{height, width, std::vector<std::uint32_t>(height * width), mask.region_count};
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = (2 * y + 1) * mask.height / (2 * height);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = (2 * x + 1) * mask.width / (2 * width);
      out.labels[y * width + x] = mask.labels[sy * mask.width + sx];
    }
  }
  return out;
}

struct RegionStyle {
  CovarianceMatrix cov;
  std::vector<double> mean;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> region_pixels(const RegionMask& mask) {
  std::vector<std::vector<std::size_t>> px(mask.region_count);
  for (std::size_t i = 0; i < mask.labels.size(); ++i) px[mask.labels[i]].push_back(i);
  return px;
}

inline FeatureMap gather(const FeatureMap& f, std::span<const std::size_t> idx) {
  Tensor sub({f.channels(), idx.size()});
  for (std::size_t c = 0; c < f.channels(); ++c)
    for (std::size_t k = 0; k < idx.size(); ++k) sub(c, k) = f(c, idx[k]);
  return FeatureMap::from_matrix(std::move(sub));
}

}  // namespace detail

/// Covariance and mean of each labelled region of `f`. Empty regions are an error.
inline std::vector<RegionStyle> region_statistics(const FeatureMap& f, const RegionMask& mask) {
  mask.validate();
  const RegionMask m = downsample_mask(mask, f.height(), f.width());
  const auto px = detail::region_pixels(m);
  std::vector<RegionStyle> out;
  for (std::uint32_t r = 0; r < m.region_count; ++r) {
    if (px[r].empty()) throw RangeError("region " + std::to_string(r) + " has no pixels");
    const FeatureMap sub = detail::gather(f, px[r]);
    out.push_back({covariance(sub), channel_mean(sub)});
  }
  return out;
}

/// Region-wise closed-form transfer. Regions with fewer than C pixels fall
/// back to a diagonal (per-channel) transform.
inline FeatureMap masked_transfer(const FeatureMap& f_c, const RegionMask& mask_c,
                                  std::span<const RegionStyle> style, const ClosedFormConfig& cfg = {}) {
  mask_c.validate();
  const RegionMask m = downsample_mask(mask_c, f_c.height(), f_c.width());
  if (style.size() < m.region_count) {
    throw RangeError("masked_transfer: style statistics missing for region " +
                     std::to_string(style.size()));
  }
  const std::size_t c = f_c.channels();
  for (const RegionStyle& s : style) {
    if (s.cov.dim() != c || s.mean.size() != c) {
      throw ShapeError("masked_transfer: style statistics do not match channel count");
    }
  }
  const auto px = detail::region_pixels(m);
  Tensor out({c, f_c.pixels()});
  for (std::uint32_t r = 0; r < m.region_count; ++r) {
    if (px[r].empty()) continue;
    const FeatureMap sub = detail::gather(f_c, px[r]);
    FeatureMap moved;
    if (px[r].size() < c) {
      const ChannelStats sc = channel_mean_std(sub, 0.0);
      Tensor x = sub.matrix();
      for (std::size_t i = 0; i < c; ++i) {
        const double gain =
            std::sqrt(std::max(style[r].cov.matrix(i, i), 0.0)) / std::max(sc.std[i], cfg.eps);
        for (std::size_t k = 0; k < x.dim(1); ++k)
          x(i, k) = gain * (x(i, k) - sc.mean[i]) + style[r].mean[i];
      }
      moved = FeatureMap::from_matrix(std::move(x));
    } else {
      moved = apply_transform(sub, closed_form_T(covariance(sub), style[r].cov, cfg), style[r].mean);
    }
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t k = 0; k < px[r].size(); ++k) out(i, px[r][k]) = moved(i, k);
  }
  return FeatureMap(std::move(out), f_c.height(), f_c.width());
}

/// alpha·f_d + (1 − alpha)·f_c.
inline FeatureMap blend(const FeatureMap& f_c, const FeatureMap& f_d, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("blend: alpha must lie in [0, 1]");
  if (f_c.matrix().shape() != f_d.matrix().shape()) throw ShapeError("blend: shapes differ");
  if (alpha == 0.0) return f_c;
  if (alpha == 1.0) return f_d;
  Tensor out = f_c.matrix();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = alpha * f_d.matrix()[i] + (1.0 - alpha) * out[i];
  return FeatureMap(std::move(out), f_c.height(), f_c.width());
}

}  // namespace lintx
