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
// Encoder, symmetric decoder and the learnable transformation module, all
// expressed as autodiff graphs so inference and training share one code path.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lintx/autodiff.hpp"
#include "lintx/feature_stats.hpp"
#include "lintx/linear_transfer.hpp"
#include "lintx/random.hpp"
#include "lintx/weights.hpp"

namespace lintx {

enum class Depth { shallow, deep };

inline const char* depth_name(Depth d) { return d == Depth::shallow ? "shallow" : "deep"; }

/// VGG-like encoder. Each stage is a run of 3×3 conv + relu units; a 2×2
/// maxpool follows every stage but the last. The output of each stage's last
/// relu is a tap; the final tap is the bottleneck.
struct EncoderSpec {
  std::vector<std::vector<std::size_t>> stages;
  Depth depth = Depth::shallow;
  std::size_t input_channels = 3;

  static EncoderSpec shallow() { return {{{16}, {32}, {64}}, Depth::shallow}; }
  static EncoderSpec deep() { return {{{16}, {32}, {64}, {128}}, Depth::deep}; }
  static EncoderSpec preset(Depth d) { return d == Depth::shallow ? shallow() : deep(); }

  std::size_t downsample_factor() const { return std::size_t{1} << (stages.size() - 1); }
  std::size_t tap_count() const { return stages.size(); }
  std::size_t tap_channels(std::size_t tap) const { return stages.at(tap).back(); }
  std::size_t bottleneck_channels() const { return stages.back().back(); }

  void validate() const {
    if (stages.empty()) throw ShapeError("EncoderSpec: no stages");
    for (const auto& s : stages) {
      if (s.empty()) throw ShapeError("EncoderSpec: empty stage");
      for (std::size_t c : s)
        if (c == 0) throw ShapeError("EncoderSpec: zero channel count");
    }
  }

  void check_image(const Shape& s) const {
    const std::size_t f = downsample_factor();
    if (s.size() != 3 || s[0] != input_channels || s[1] % f || s[2] % f) {
      throw ShapeError("image " + shape_string(s) + " must be [" + std::to_string(input_channels) +
                       " x H x W] with H, W divisible by " + std::to_string(f));
    }
  }
};

/// Two conv branches (content, style) each ending in covariance -> fc -> d×d
/// factor, plus 1×1 compress (C->d) and uncompress (d->C) convolutions.
struct TransformModuleSpec {
  std::size_t channels = 0;
  std::size_t compressed = 0;
  std::array<std::size_t, 3> branch{};  // output channels of the three conv units

  static TransformModuleSpec for_channels(std::size_t c) {
    const std::size_t d = std::min(c, std::max<std::size_t>(c / 4, 8));
    return {c, d, {std::max<std::size_t>(c / 2, 1), std::max<std::size_t>(c / 4, 1), d}};
  }

  void validate() const {
    if (channels == 0 || compressed == 0 || compressed > channels) {
      throw ShapeError("TransformModuleSpec: need 0 < d <= C");
    }
    if (branch[2] != compressed) throw ShapeError("TransformModuleSpec: branch must end at d");
  }
};

struct ModelSpec {
  EncoderSpec encoder;
  TransformModuleSpec transform;

  static ModelSpec preset(Depth d) {
    EncoderSpec e = EncoderSpec::preset(d);
    return {e, TransformModuleSpec::for_channels(e.bottleneck_channels())};
  }

  /// FNV-1a over a canonical description; stored in weight files.
  std::uint64_t hash() const {
    std::string s = "enc:";
    for (const auto& stage : encoder.stages) {
      for (std::size_t c : stage) s += std::to_string(c) + ",";
      s += "|";
    }
    s += ";tm:" + std::to_string(transform.channels) + "," + std::to_string(transform.compressed);
    for (std::size_t c : transform.branch) s += "," + std::to_string(c);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    return h;
  }
};

// --- parameter names ---------------------------------------------------------

inline std::string encoder_param(std::size_t stage, std::size_t unit, const char* kind) {
  return "encoder." + std::to_string(stage) + "." + std::to_string(unit) + "." + kind;
}
inline std::string decoder_param(std::size_t layer, const char* kind) {
  return "decoder." + std::to_string(layer) + "." + kind;
}
inline std::string transform_param(const std::string& part, const char* kind) {
  return "transform." + part + "." + kind;
}

inline bool is_transform_param(const std::string& name) { return name.rfind("transform.", 0) == 0; }

/// Channel plan of the decoder: (in, out, relu, upsample-after) per conv.
struct DecoderLayer {
  std::size_t in = 0, out = 0;
  bool relu = true;
  bool upsample = false;
};

inline std::vector<DecoderLayer> decoder_layers(const EncoderSpec& spec) {
  std::vector<DecoderLayer> layers;
  for (std::size_t s = spec.stages.size() - 1; s > 0; --s)
    layers.push_back({spec.stages[s].back(), spec.stages[s - 1].back(), true, true});
  const std::size_t c0 = spec.stages[0].back();
  layers.push_back({c0, c0, true, false});
  layers.push_back({c0, spec.input_channels, false, false});
  return layers;
}

// --- initialization ----------------------------------------------------------

namespace detail {

inline Tensor he_conv(std::size_t out, std::size_t in, std::size_t k, double gain, Rng& rng) {
  return random_normal({out, in, k, k}, rng, gain / std::sqrt(static_cast<double>(in * k * k)));
}

}  // namespace detail

/// Seeded orthogonal-row convolutions scaled by sqrt(2). The first stage's
/// bias recentres [0,1] images around 0.5.
inline WeightStore init_encoder_weights(const EncoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  WeightStore w;
  std::size_t in = spec.input_channels;
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    for (std::size_t u = 0; u < spec.stages[s].size(); ++u) {
      const std::size_t out = spec.stages[s][u];
      const std::size_t fan_in = in * 9;
      Tensor rows = std::sqrt(2.0) * random_orthogonal(out, fan_in, rng);
      Tensor bias({out});
      if (s == 0 && u == 0) {
        for (std::size_t o = 0; o < out; ++o) {
          double sum = 0.0;
          for (std::size_t k = 0; k < fan_in; ++k) sum += rows(o, k);
          bias[o] = -0.5 * sum;
        }
      }
      w.set(encoder_param(s, u, "weight"), rows.reshaped({out, in, 3, 3}));
      w.set(encoder_param(s, u, "bias"), std::move(bias));
      in = out;
    }
  }
  return w;
}

inline WeightStore init_decoder_weights(const EncoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  WeightStore w;
  const auto layers = decoder_layers(spec);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const double gain = layers[i].relu ? std::sqrt(2.0) : 1.0;
    w.set(decoder_param(i, "weight"), detail::he_conv(layers[i].out, layers[i].in, 3, gain, rng));
    w.set(decoder_param(i, "bias"), Tensor({layers[i].out}));
  }
  return w;
}

/// Branch convs He-initialized; fc weights near zero with bias = vec(I) so
/// each factor, and hence T, starts near identity; compress/uncompress are
/// a random orthonormal projection and its transpose.
inline WeightStore init_transform_weights(const TransformModuleSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  WeightStore w;
  const std::size_t d = spec.compressed;
  for (const char* branch : {"content", "style"}) {
    std::size_t in = spec.channels;
    for (std::size_t k = 0; k < 3; ++k) {
      const std::string part = std::string(branch) + ".conv" + std::to_string(k);
      w.set(transform_param(part, "weight"), detail::he_conv(spec.branch[k], in, 3, std::sqrt(2.0), rng));
      w.set(transform_param(part, "bias"), Tensor({spec.branch[k]}, 0.01));
      in = spec.branch[k];
    }
    const std::string fc = std::string(branch) + ".fc";
    w.set(transform_param(fc, "weight"), random_normal({d * d, d * d}, rng, 1e-4));
    w.set(transform_param(fc, "bias"), Tensor::identity(d).reshaped({d * d}));
  }
  const Tensor q = random_orthogonal(d, spec.channels, rng);
  w.set(transform_param("compress", "weight"), q.reshaped({d, spec.channels, 1, 1}));
  w.set(transform_param("compress", "bias"), Tensor({d}));
  w.set(transform_param("uncompress", "weight"), transpose(q).reshaped({spec.channels, d, 1, 1}));
  w.set(transform_param("uncompress", "bias"), Tensor({spec.channels}));
  return w;
}

// --- graph construction --------------------------------------------------------

/// Creates one leaf per named weight, as a parameter when `trainable(name)`
/// holds and as a constant input otherwise.
class WeightBinder {
 public:
  WeightBinder(Graph& graph, const WeightStore& store,
               std::function<bool(const std::string&)> trainable = {})
      : graph_(graph), store_(store), trainable_(std::move(trainable)) {}

  NodeId operator()(const std::string& name) {
    if (auto it = nodes_.find(name); it != nodes_.end()) return it->second;
    const Tensor& value = store_.get(name);
    NodeId id;
    if (trainable_ && trainable_(name)) {
      id = graph_.parameter(value, name);
      params_.emplace_back(name, id);
    } else {
      id = graph_.input(value, name);
    }
    nodes_.emplace(name, id);
    return id;
  }

  const std::vector<std::pair<std::string, NodeId>>& parameters() const { return params_; }

 private:
  Graph& graph_;
  const WeightStore& store_;
  std::function<bool(const std::string&)> trainable_;
  std::map<std::string, NodeId> nodes_;
  std::vector<std::pair<std::string, NodeId>> params_;
};

/// Tap nodes, shallow to deep.
inline std::vector<NodeId> build_encoder(Graph& g, NodeId image, const EncoderSpec& spec,
                                         WeightBinder& w) {
  std::vector<NodeId> taps;
  NodeId x = image;
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    if (s > 0) x = g.maxpool2(x);
    for (std::size_t u = 0; u < spec.stages[s].size(); ++u)
      x = g.relu(g.conv2d(x, w(encoder_param(s, u, "weight")), w(encoder_param(s, u, "bias"))));
    taps.push_back(x);
  }
  return taps;
}

inline NodeId build_decoder(Graph& g, NodeId features, const EncoderSpec& spec, WeightBinder& w) {
  const auto layers = decoder_layers(spec);
  NodeId x = features;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = g.conv2d(x, w(decoder_param(i, "weight")), w(decoder_param(i, "bias")));
    if (layers[i].relu) x = g.relu(x);
    if (layers[i].upsample) x = g.upsample2_nearest(x);
  }
  return x;
}

/// conv units -> covariance -> fc -> d×d factor.
inline NodeId build_branch(Graph& g, NodeId features, const TransformModuleSpec& spec,
                           WeightBinder& w, const std::string& branch) {
  NodeId x = features;
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string part = branch + ".conv" + std::to_string(k);
    x = g.relu(g.conv2d(x, w(transform_param(part, "weight")), w(transform_param(part, "bias"))));
  }
  const std::size_t d = spec.compressed;
  NodeId flat = g.reshape(g.covariance(x), {d * d});
  NodeId fc = g.linear(flat, w(transform_param(branch + ".fc", "weight")),
                       w(transform_param(branch + ".fc", "bias")));
  return g.reshape(fc, {d, d});
}

inline NodeId build_compress(Graph& g, NodeId features, WeightBinder& w) {
  return g.conv2d(features, w(transform_param("compress", "weight")),
                  w(transform_param("compress", "bias")));
}

struct StyleNodes {
  NodeId factor;  // [d×d]
  NodeId mean;    // [d×1], channel mean of the compressed style features
};

/// Everything in the transform that depends on the style alone.
inline StyleNodes build_style_code(Graph& g, NodeId style_features, const TransformModuleSpec& spec,
                                   WeightBinder& w) {
  const Shape& s = g.shape(style_features);
  const std::size_t d = spec.compressed, n = s[1] * s[2];
  NodeId factor = build_branch(g, style_features, spec, w, "style");
  NodeId compressed = g.reshape(build_compress(g, style_features, w), {d, n});
  NodeId averager = g.input(Tensor({n, 1}, 1.0 / static_cast<double>(n)), "style_averager");
  return {factor, g.matmul(compressed, averager)};
}

struct ContentNodes {
  NodeId transform;   // [d×d] = style factor · content factor
  NodeId compressed;  // [d×H×W]
  NodeId output;      // [C×H×W]
};

/// compress -> subtract mean -> T· -> + style mean -> uncompress.
inline ContentNodes build_apply(Graph& g, NodeId content_features, StyleNodes style,
                                const TransformModuleSpec& spec, WeightBinder& w) {
  const Shape& s = g.shape(content_features);
  const std::size_t d = spec.compressed, h = s[1], wd = s[2], n = h * wd;
  NodeId content_factor = build_branch(g, content_features, spec, w, "content");
  NodeId t = g.matmul(style.factor, content_factor);
  NodeId compressed = build_compress(g, content_features, w);
  NodeId centered = g.reshape(g.subtract_channel_mean(compressed), {d, n});
  NodeId spread = g.input(Tensor({1, n}, 1.0), "mean_broadcast");
  NodeId moved = g.add(g.matmul(t, centered), g.matmul(style.mean, spread));
  NodeId out = g.conv2d(g.reshape(moved, {d, h, wd}), w(transform_param("uncompress", "weight")),
                        w(transform_param("uncompress", "bias")));
  return {t, compressed, out};
}

// --- inference entry points ------------------------------------------------------

struct Encoded {
  FeatureMap bottleneck;
  std::vector<FeatureMap> taps;
};

inline Encoded encode(const Tensor& image, const EncoderSpec& spec, const WeightStore& weights) {
  spec.validate();
  spec.check_image(image.shape());
  Graph g;
  WeightBinder w(g, weights);
  NodeId in = g.input(image, "image");
  const std::vector<NodeId> taps = build_encoder(g, in, spec, w);
  g.forward_inference(taps);
  Encoded out;
  for (NodeId t : taps) out.taps.push_back(FeatureMap::from_chw(g.value(t)));
  out.bottleneck = out.taps.back();
  return out;
}

inline Tensor decode(const FeatureMap& features, const EncoderSpec& spec, const WeightStore& weights) {
  spec.validate();
  if (features.channels() != spec.bottleneck_channels()) {
    throw ShapeError("decode: features have " + std::to_string(features.channels()) +
                     " channels, decoder expects " + std::to_string(spec.bottleneck_channels()));
  }
  Graph g;
  WeightBinder w(g, weights);
  NodeId in = g.input(features.to_chw(), "features");
  NodeId out = build_decoder(g, in, spec, w);
  const NodeId keep[] = {out};
  g.forward_inference(keep);
  return g.value(out);
}

/// Style-dependent half of the learned transform; computed once per style.
struct StyleCode {
  Tensor factor;  // [d×d]
  Tensor mean;    // [d×1]
  bool operator==(const StyleCode&) const = default;
};

inline void check_transform_input(const FeatureMap& f, const TransformModuleSpec& spec) {
  spec.validate();
  if (f.channels() != spec.channels) {
    throw ShapeError("transform module expects " + std::to_string(spec.channels) +
                     " channels, got " + std::to_string(f.channels()));
  }
}

inline StyleCode learned_style_code(const FeatureMap& f_s, const TransformModuleSpec& spec,
                                    const WeightStore& weights) {
  check_transform_input(f_s, spec);
  Graph g;
  WeightBinder w(g, weights);
  NodeId in = g.input(f_s.to_chw(), "style_features");
  const StyleNodes s = build_style_code(g, in, spec, w);
  const NodeId keep[] = {s.factor, s.mean};
  g.forward_inference(keep);
  return {g.value(s.factor), g.value(s.mean)};
}

struct LearnedTransform {
  TransformMatrix t;
  std::vector<double> mean_c;
  std::vector<double> mean_s;
};

namespace detail {

struct AppliedGraph {
  Graph graph;
  ContentNodes nodes;
};

inline void run_apply(AppliedGraph& a, const FeatureMap& f_c, const StyleCode& code,
                      const TransformModuleSpec& spec, const WeightStore& weights) {
  check_transform_input(f_c, spec);
  const std::size_t d = spec.compressed;
  if (code.factor.shape() != Shape{d, d} || code.mean.shape() != Shape{d, 1}) {
    throw ShapeError("style code does not match the transform module");
  }
  Graph& g = a.graph;
  WeightBinder w(g, weights);
  NodeId in = g.input(f_c.to_chw(), "content_features");
  StyleNodes style{g.input(code.factor, "style_factor"), g.input(code.mean, "style_mean")};
  a.nodes = build_apply(g, in, style, spec, w);
  const NodeId keep[] = {a.nodes.transform, a.nodes.compressed, a.nodes.output};
  g.forward_inference(keep);
}

}  // namespace detail

/// T = M_s·M_c with the channel means of the compressed content and style.
inline LearnedTransform learned_T(const FeatureMap& f_c, const FeatureMap& f_s,
                                  const TransformModuleSpec& spec, const WeightStore& weights) {
  const StyleCode code = learned_style_code(f_s, spec, weights);
  detail::AppliedGraph a;
  detail::run_apply(a, f_c, code, spec, weights);
  LearnedTransform out;
  out.t.matrix = a.graph.value(a.nodes.transform);
  out.mean_c = channel_mean(FeatureMap::from_chw(a.graph.value(a.nodes.compressed)));
  out.mean_s.assign(code.mean.data().begin(), code.mean.data().end());
  return out;
}

inline FeatureMap stylize_features(const FeatureMap& f_c, const StyleCode& code,
                                   const TransformModuleSpec& spec, const WeightStore& weights) {
  detail::AppliedGraph a;
  detail::run_apply(a, f_c, code, spec, weights);
  return FeatureMap::from_chw(a.graph.value(a.nodes.output));
}

inline FeatureMap stylize_features(const FeatureMap& f_c, const FeatureMap& f_s,
                                   const TransformModuleSpec& spec, const WeightStore& weights) {
  return stylize_features(f_c, learned_style_code(f_s, spec, weights), spec, weights);
}

}  // namespace lintx
