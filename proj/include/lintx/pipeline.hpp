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
// Image-level stylization: encode, transform at the bottleneck, blend, decode.
// The style side is prepared once and can be reused across many content
// images (video frames) without changing any output bit.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lintx/image.hpp"
#include "lintx/linear_transfer.hpp"
#include "lintx/model.hpp"

namespace lintx {

enum class TransformKind { closed_form, adain, learned };

inline const char* kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::closed_form: return "closed_form";
    case TransformKind::adain: return "adain";
    case TransformKind::learned: return "learned";
  }
  return "?";
}

inline TransformKind parse_kind(const std::string& s) {
  if (s == "closed_form") return TransformKind::closed_form;
  if (s == "adain") return TransformKind::adain;
  if (s == "learned") return TransformKind::learned;
  throw RangeError("unknown transform kind '" + s + "'");
}

struct StylizeOptions {
  TransformKind kind = TransformKind::closed_form;
  double alpha = 1.0;
  ClosedFormConfig closed_form;
  double adain_eps = 1e-5;
};

/// Content and (optional) style label images for regional transfer.
struct MaskInput {
  LabelImage content;
  std::optional<LabelImage> style;
};

/// Labels shared by both masks keep their own region (ascending byte order);
/// every other label on either side joins one extra region.
struct AlignedMasks {
  RegionMask content;
  std::optional<RegionMask> style;
};

inline AlignedMasks align_masks(const MaskInput& in) {
  std::map<std::uint8_t, int> seen;  // bit 0: content, bit 1: style
  for (std::uint8_t v : in.content.values) seen[v] |= 1;
  if (in.style)
    for (std::uint8_t v : in.style->values) seen[v] |= 2;
  std::map<std::uint8_t, std::uint32_t> ids;
  std::uint32_t next = 0;
  for (const auto& [v, bits] : seen)
    if (!in.style || bits == 3) ids[v] = next++;
  const std::uint32_t extra = next;
  bool extra_used = false;
  auto relabel = [&](const LabelImage& img) {
    RegionMask m{img.height, img.width, std::vector<std::uint32_t>(img.values.size()), 0};
    for (std::size_t i = 0; i < img.values.size(); ++i) {
      auto it = ids.find(img.values[i]);
      if (it == ids.end()) {
        m.labels[i] = extra;
        extra_used = true;
      } else {
        m.labels[i] = it->second;
      }
    }
    return m;
  };
  AlignedMasks out{relabel(in.content), std::nullopt};
  if (in.style) out.style = relabel(*in.style);
  const std::uint32_t count = extra_used ? extra + 1 : extra;
  out.content.region_count = count;
  if (out.style) out.style->region_count = count;
  return out;
}

/// Per-region style statistics; regions absent from the style (or every
/// region when no style mask is given) use the whole-image statistics.
inline std::vector<RegionStyle> masked_style_stats(const FeatureMap& f_s, const AlignedMasks& masks) {
  const RegionStyle whole{covariance(f_s), channel_mean(f_s)};
  std::vector<RegionStyle> out(masks.content.region_count, whole);
  if (!masks.style) return out;
  const RegionMask m = downsample_mask(*masks.style, f_s.height(), f_s.width());
  const auto px = detail::region_pixels(m);
  for (std::uint32_t r = 0; r < m.region_count; ++r) {
    if (px[r].empty()) continue;
    const FeatureMap sub = detail::gather(f_s, px[r]);
    out[r] = {covariance(sub), channel_mean(sub)};
  }
  return out;
}

/// Everything that depends on the style image only.
struct PreparedStyle {
  TransformKind kind = TransformKind::closed_form;
  FeatureMap features;
  CovarianceMatrix cov;
  std::vector<double> mean;
  Tensor coloring;  // closed_form
  StyleCode code;   // learned
  std::optional<RegionMask> content_mask;
  std::vector<RegionStyle> regions;
};

inline PreparedStyle prepare_style(const Tensor& style_image, const ModelSpec& spec,
                                   const WeightStore& weights, const StylizeOptions& opts,
                                   const MaskInput* mask = nullptr) {
  PreparedStyle p;
  p.kind = opts.kind;
  p.features = encode(style_image, spec.encoder, weights).bottleneck;
  p.cov = covariance(p.features);
  p.mean = channel_mean(p.features);
  switch (opts.kind) {
    case TransformKind::closed_form:
      p.coloring = coloring_matrix(p.cov, opts.closed_form);
      break;
    case TransformKind::learned:
      p.code = learned_style_code(p.features, spec.transform, weights);
      break;
    case TransformKind::adain:
      break;
  }
  if (mask) {
    if (opts.kind != TransformKind::closed_form) {
      throw RangeError("regional transfer requires --kind closed_form");
    }
    const AlignedMasks aligned = align_masks(*mask);
    p.content_mask = aligned.content;
    p.regions = masked_style_stats(p.features, aligned);
  }
  return p;
}

struct Stylized {
  Tensor image;
  FeatureMap content;      // encoded content
  FeatureMap transformed;  // before blending
};

inline Stylized stylize_prepared(const Tensor& content_image, const PreparedStyle& style,
                                 const ModelSpec& spec, const WeightStore& weights,
                                 const StylizeOptions& opts) {
  if (!(opts.alpha >= 0.0 && opts.alpha <= 1.0)) throw RangeError("alpha must lie in [0, 1]");
  Stylized s;
  s.content = encode(content_image, spec.encoder, weights).bottleneck;
  if (style.content_mask) {
    const RegionMask& m = *style.content_mask;
    if (m.height != content_image.dim(1) || m.width != content_image.dim(2)) {
      throw ShapeError("mask is " + std::to_string(m.width) + "x" + std::to_string(m.height) +
                       " but the content image is " + std::to_string(content_image.dim(2)) + "x" +
                       std::to_string(content_image.dim(1)));
    }
  }
  switch (style.kind) {
    case TransformKind::closed_form:
      if (style.content_mask) {
        s.transformed = masked_transfer(s.content, *style.content_mask, style.regions, opts.closed_form);
      } else {
        const TransformMatrix t = compose_transform(style.coloring, covariance(s.content), opts.closed_form);
        s.transformed = apply_transform(s.content, t, style.mean);
      }
      break;
    case TransformKind::adain:
      s.transformed = adain_transform(s.content, style.features, opts.adain_eps);
      break;
    case TransformKind::learned:
      s.transformed = stylize_features(s.content, style.code, spec.transform, weights);
      break;
  }
  s.image = decode(blend(s.content, s.transformed, opts.alpha), spec.encoder, weights);
  return s;
}

inline Stylized stylize_image(const Tensor& content_image, const Tensor& style_image,
                              const ModelSpec& spec, const WeightStore& weights,
                              const StylizeOptions& opts, const MaskInput* mask = nullptr) {
  return stylize_prepared(content_image, prepare_style(style_image, spec, weights, opts, mask), spec,
                          weights, opts);
}

struct TransferReport {
  double covariance_residual = 0.0;
  std::optional<double> affinity_residual;  // only when N <= the affinity cap
};

inline TransferReport transfer_report(const Stylized& s, const PreparedStyle& style,
                                      const ClosedFormConfig& cfg) {
  TransferReport r;
  r.covariance_residual = verify_covariance_match(s.transformed, style.cov);
  if (s.content.pixels() <= kAffinityMaxPixels) {
    const EigenDecomp eig = sym_eig(covariance(s.content).matrix);
    r.affinity_residual =
        verify_affinity_preserved(s.content, s.transformed, eigen_floor(eig, cfg.eps));
  }
  return r;
}

}  // namespace lintx
