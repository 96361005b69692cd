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
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lintx/adam.hpp"
#include "lintx/autodiff.hpp"
#include "lintx/image.hpp"
#include "lintx/model.hpp"
#include "lintx/parallel.hpp"

namespace lintx {

enum class StyleForm { gram, centered_covariance };

struct LossConfig {
  std::size_t content_tap = 0;
  std::vector<std::size_t> style_taps;
  std::vector<double> style_weights;
  double lambda = 1.0;
  StyleForm style_form = StyleForm::gram;

  /// Content at the bottleneck, Gram style losses on every tap with weight 1.
  static LossConfig defaults(const EncoderSpec& spec) {
    LossConfig c;
    c.content_tap = spec.tap_count() - 1;
    for (std::size_t t = 0; t < spec.tap_count(); ++t) {
      c.style_taps.push_back(t);
      c.style_weights.push_back(1.0);
    }
    return c;
  }

  void validate(std::size_t tap_count) const {
    if (content_tap >= tap_count) throw RangeError("LossConfig: content tap out of range");
    if (style_taps.size() != style_weights.size()) {
      throw RangeError("LossConfig: one weight per style tap required");
    }
    for (std::size_t t : style_taps)
      if (t >= tap_count) throw RangeError("LossConfig: style tap out of range");
    for (double w : style_weights)
      if (!(w >= 0.0)) throw RangeError("LossConfig: style weights must be >= 0");
    if (!(lambda >= 0.0)) throw RangeError("LossConfig: lambda must be >= 0");
  }
};

inline Tensor style_statistic(const FeatureMap& f, StyleForm form) {
  return form == StyleForm::gram ? gram(f) : covariance(f).matrix;
}

/// Σ_taps weight·(1/C²)·‖S(f_d) − S(f_s)‖²_F.
inline double style_loss(std::span<const FeatureMap> d_taps, std::span<const FeatureMap> s_taps,
                         const LossConfig& cfg) {
  if (d_taps.size() != s_taps.size()) throw ShapeError("style_loss: tap lists differ in length");
  cfg.validate(d_taps.size());
  double total = 0.0;
  for (std::size_t i = 0; i < cfg.style_taps.size(); ++i) {
    const std::size_t t = cfg.style_taps[i];
    if (d_taps[t].channels() != s_taps[t].channels()) throw ShapeError("style_loss: tap channels differ");
    const double c = static_cast<double>(d_taps[t].channels());
    const Tensor diff = style_statistic(d_taps[t], cfg.style_form) - style_statistic(s_taps[t], cfg.style_form);
    total += cfg.style_weights[i] * frob_norm_sq(diff) / (c * c);
  }
  return total;
}

/// (1/(N·C))·‖f_d − f_c‖²_F.
inline double content_loss(const FeatureMap& f_d, const FeatureMap& f_c) {
  if (f_d.matrix().shape() != f_c.matrix().shape()) throw ShapeError("content_loss: shapes differ");
  return frob_norm_sq(f_d.matrix() - f_c.matrix()) / static_cast<double>(f_d.matrix().size());
}

struct LossRecord {
  std::size_t step = 0;
  double content = 0.0;
  double style = 0.0;
  double total = 0.0;
  bool operator==(const LossRecord&) const = default;
};

/// Sidecar: a "step,content_loss,style_loss,total" header, then one line per step.
inline void write_loss_history(const std::vector<LossRecord>& history,
                               const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << "step,content_loss,style_loss,total\n";
  char line[160];
  for (const LossRecord& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", r.step, r.content, r.style, r.total);
    os << line;
  }
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

// --- procedural data -------------------------------------------------------------

/// Flat background plus a few axis-aligned rectangles and discs.
inline Tensor make_content_image(std::size_t side, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor img({3, side, side});
  const double bg[3] = {u(rng), u(rng), u(rng)};
  const double gx = u(rng) * 0.4 - 0.2;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x)
        img(c, y, x) = std::clamp(bg[c] + gx * (static_cast<double>(x) / side - 0.5), 0.0, 1.0);
  const int shapes = 3 + static_cast<int>(u(rng) * 3);
  for (int s = 0; s < shapes; ++s) {
    const double col[3] = {u(rng), u(rng), u(rng)};
    const double cx = u(rng) * side, cy = u(rng) * side;
    const double r = (0.1 + 0.25 * u(rng)) * side;
    const bool disc = u(rng) < 0.5;
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const bool inside = disc ? dx * dx + dy * dy < r * r : std::abs(dx) < r && std::abs(dy) < 0.6 * r;
        if (inside)
          for (std::size_t c = 0; c < 3; ++c) img(c, y, x) = col[c];
      }
  }
  return img;
}

/// Periodic texture: a random palette modulated by oriented stripes, checks or
/// a product of sinusoids.
inline Tensor make_style_image(std::size_t side, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a[3] = {u(rng), u(rng), u(rng)};
  const double b[3] = {u(rng), u(rng), u(rng)};
  const double kind = u(rng);
  const double angle = u(rng) * 3.14159265358979;
  const double freq = 2.0 * 3.14159265358979 * (2.0 + std::floor(u(rng) * 4.0)) / side;
  const double ca = std::cos(angle), sa = std::sin(angle);
  Tensor img({3, side, side});
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const double px = static_cast<double>(x), py = static_cast<double>(y);
      double t;
      if (kind < 0.34) {
        t = 0.5 + 0.5 * std::sin(freq * (ca * px + sa * py));
      } else if (kind < 0.67) {
        t = (std::sin(freq * px) * std::sin(freq * py)) > 0.0 ? 1.0 : 0.0;
      } else {
        t = 0.5 + 0.5 * std::sin(freq * px + 1.3) * std::cos(0.7 * freq * py);
      }
      for (std::size_t c = 0; c < 3; ++c) img(c, y, x) = a[c] * t + b[c] * (1.0 - t);
    }
  return img;
}

inline std::vector<Tensor> make_content_images(std::size_t count, std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_content_image(side, rng));
  return out;
}

inline std::vector<Tensor> make_style_images(std::size_t count, std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_style_image(side, rng));
  return out;
}

/// Every *.ppm in `dir`, in lexicographic filename order.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<Tensor> load_image_directory(const std::filesystem::path& dir) {
  std::vector<Tensor> out;
  for (const auto& p : list_images(dir)) out.push_back(read_image(p));
  return out;
}

// --- training ----------------------------------------------------------------------

namespace detail {

// Indices for one step: every item when the pool fits the batch, otherwise a
// seeded draw without replacement.
inline std::vector<std::size_t> draw_batch(std::size_t pool, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> idx(pool);
  for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
  if (pool <= batch) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(batch);
  return idx;
}

struct ItemResult {
  double content = 0.0;
  double style = 0.0;
  double total = 0.0;
  std::vector<Tensor> grads;  // in trainable-entry order
};

// Sums per-item gradients in item order, averages them, and records the loss.
inline LossRecord reduce_batch(std::size_t step, std::vector<ItemResult>& items,
                               std::vector<Tensor>& grads_out) {
  const double inv = 1.0 / static_cast<double>(items.size());
  LossRecord rec{step, 0.0, 0.0, 0.0};
  grads_out = std::move(items[0].grads);
  rec.content += items[0].content;
  rec.style += items[0].style;
  rec.total += items[0].total;
  for (std::size_t i = 1; i < items.size(); ++i) {
    for (std::size_t p = 0; p < grads_out.size(); ++p)
      for (std::size_t k = 0; k < grads_out[p].size(); ++k) grads_out[p][k] += items[i].grads[p][k];
    rec.content += items[i].content;
    rec.style += items[i].style;
    rec.total += items[i].total;
  }
  for (Tensor& g : grads_out)
    for (double& v : g.data()) v *= inv;
  rec.content *= inv;
  rec.style *= inv;
  rec.total *= inv;
  return rec;
}

inline std::vector<Tensor> trainable_values(const WeightStore& store) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : store.entries()) out.push_back(t);
  return out;
}

inline void write_back(WeightStore& store, const std::vector<Tensor>& values) {
  std::size_t i = 0;
  for (const auto& [name, t] : store.entries()) store.get(name) = values[i++];
}

inline std::vector<Tensor> collect_grads(const Graph& g, const WeightBinder& w,
                                         const WeightStore& trainable) {
  std::vector<Tensor> grads;
  for (const auto& [name, t] : trainable.entries()) {
    const auto& params = w.parameters();
    auto it = std::find_if(params.begin(), params.end(), [&](const auto& p) { return p.first == name; });
    grads.push_back(it == params.end() ? Tensor(t.shape()) : g.grad(it->second));
  }
  return grads;
}

}  // namespace detail

struct PretrainConfig {
  std::size_t steps = 50;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct PretrainResult {
  WeightStore decoder;
  std::vector<LossRecord> history;  // content = reconstruction MSE, style = 0
};

namespace detail {

inline double reconstruction_item(const Tensor& image, const FeatureMap& features,
                                  const EncoderSpec& spec, const WeightStore& decoder,
                                  bool trainable, std::vector<Tensor>* grads) {
  Graph g;
  WeightBinder w(g, decoder, [trainable](const std::string&) { return trainable; });
  NodeId in = g.input(features.to_chw(), "features");
  NodeId out = build_decoder(g, in, spec, w);
  NodeId target = g.input(image, "target");
  NodeId loss = g.scale(g.frobenius_sq_diff(out, target), 1.0 / static_cast<double>(image.size()));
  g.forward();
  if (grads) {
    g.backward(loss);
    *grads = collect_grads(g, w, decoder);
  }
  return g.value(loss)[0];
}

}  // namespace detail

/// Mean per-pixel squared error of decode(encode(x)) against x.
inline double reconstruction_mse(std::span<const Tensor> images, const EncoderSpec& spec,
                                 const WeightStore& weights) {
  double total = 0.0;
  for (const Tensor& img : images) {
    const FeatureMap f = encode(img, spec, weights).bottleneck;
    total += detail::reconstruction_item(img, f, spec, weights, false, nullptr);
  }
  return total / static_cast<double>(images.size());
}

/// Fits the decoder to invert the frozen encoder on `images` with Adam.
inline PretrainResult pretrain_decoder(std::span<const Tensor> images, const EncoderSpec& spec,
                                       const WeightStore& encoder, const PretrainConfig& cfg) {
  if (images.empty()) throw RangeError("pretrain_decoder: no images");
  std::vector<FeatureMap> features;
  for (const Tensor& img : images) features.push_back(encode(img, spec, encoder).bottleneck);

  PretrainResult result{init_decoder_weights(spec, cfg.seed), {}};
  AdamState adam;
  adam.lr = cfg.lr;
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto batch = detail::draw_batch(images.size(), cfg.batch_size, rng);
    std::vector<detail::ItemResult> items(batch.size());
    parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
      const std::size_t k = batch[i];
      items[i].content = detail::reconstruction_item(images[k], features[k], spec, result.decoder,
                                                     true, &items[i].grads);
      items[i].total = items[i].content;
    });
    std::vector<Tensor> grads;
    const LossRecord rec = detail::reduce_batch(step, items, grads);
    if (!std::isfinite(rec.total)) {
      throw TrainingError("pretrain_decoder: non-finite loss at step " + std::to_string(step));
    }
    if (!result.history.empty() && rec.total > 10.0 * result.history.front().total) {
      throw TrainingError("pretrain_decoder: diverged at step " + std::to_string(step) + " (loss " +
                          std::to_string(rec.total) + " vs initial " +
                          std::to_string(result.history.front().total) + ")");
    }
    result.history.push_back(rec);
    std::vector<Tensor> params = detail::trainable_values(result.decoder);
    adam_step(adam, params, grads);
    detail::write_back(result.decoder, params);
  }
  return result;
}

struct TransferData {
  std::vector<Tensor> contents;
  std::vector<Tensor> styles;
};

struct TrainConfig {
  std::size_t steps = 500;
  std::size_t batch_size = 8;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct TrainResult {
  WeightStore transform;
  std::vector<LossRecord> history;
};

/// Encoder-side tensors that stay fixed during transform training.
struct FrozenTargets {
  FeatureMap bottleneck;
  FeatureMap content_tap;
  std::vector<Tensor> style_stats;  // one per LossConfig style tap
};

inline FrozenTargets frozen_targets(const Tensor& image, const ModelSpec& spec,
                                    const WeightStore& frozen, const LossConfig& cfg) {
  const Encoded e = encode(image, spec.encoder, frozen);
  FrozenTargets t{e.bottleneck, e.taps[cfg.content_tap], {}};
  for (std::size_t tap : cfg.style_taps) t.style_stats.push_back(style_statistic(e.taps[tap], cfg.style_form));
  return t;
}

struct LossNodes {
  NodeId content;
  NodeId style;
  NodeId total;
};

/// Content and style losses of the decoded image, re-encoded through the taps.
inline LossNodes build_losses(Graph& g, const std::vector<NodeId>& taps, const FrozenTargets& content,
                              const FrozenTargets& style, const LossConfig& cfg) {
  NodeId ct = taps[cfg.content_tap];
  NodeId target = g.input(content.content_tap.to_chw(), "content_target");
  const double n = static_cast<double>(shape_size(g.shape(ct)));
  NodeId c_loss = g.scale(g.frobenius_sq_diff(ct, target), 1.0 / n);
  std::vector<NodeId> terms;
  std::vector<double> weights;
  for (std::size_t i = 0; i < cfg.style_taps.size(); ++i) {
    NodeId tap = taps[cfg.style_taps[i]];
    NodeId stat = cfg.style_form == StyleForm::gram ? g.gram(tap) : g.covariance(tap);
    NodeId s_target = g.input(style.style_stats[i], "style_target");
    terms.push_back(g.frobenius_sq_diff(stat, s_target));
    const double ch = static_cast<double>(g.shape(tap)[0]);
    weights.push_back(cfg.style_weights[i] / (ch * ch));
  }
  NodeId s_loss = terms.empty() ? g.scale(c_loss, 0.0) : g.weighted_sum(terms, weights);
  NodeId total = g.weighted_sum({c_loss, s_loss}, {1.0, cfg.lambda});
  return {c_loss, s_loss, total};
}

/// One training example: stylize, decode, re-encode, score. Only weights in
/// `store` named transform.* are trainable.
inline detail::ItemResult transform_item(const FrozenTargets& content, const FrozenTargets& style,
                                         const ModelSpec& spec, const WeightStore& store,
                                         const WeightStore& trainable, const LossConfig& cfg,
                                         bool with_grads) {
  Graph g;
  WeightBinder w(g, store, [](const std::string& n) { return is_transform_param(n); });
  NodeId fc = g.input(content.bottleneck.to_chw(), "content_features");
  NodeId fs = g.input(style.bottleneck.to_chw(), "style_features");
  const StyleNodes sn = build_style_code(g, fs, spec.transform, w);
  const ContentNodes cn = build_apply(g, fc, sn, spec.transform, w);
  NodeId image = build_decoder(g, cn.output, spec.encoder, w);
  const std::vector<NodeId> taps = build_encoder(g, image, spec.encoder, w);
  const LossNodes loss = build_losses(g, taps, content, style, cfg);
  g.forward();
  detail::ItemResult r;
  r.content = g.value(loss.content)[0];
  r.style = g.value(loss.style)[0];
  r.total = g.value(loss.total)[0];
  if (with_grads) {
    g.backward(loss.total);
    r.grads = detail::collect_grads(g, w, trainable);
  }
  return r;
}

/// Adam on the transformation module and compress/uncompress weights; the
/// encoder and decoder in `frozen` are read-only inputs.
inline TrainResult train_transform(const TransferData& data, const ModelSpec& spec,
                                   const WeightStore& frozen, const LossConfig& cfg,
                                   const TrainConfig& tc, const WeightStore* init = nullptr) {
  if (data.contents.empty() || data.styles.empty()) throw RangeError("train_transform: empty data");
  cfg.validate(spec.encoder.tap_count());
  std::vector<FrozenTargets> contents, styles;
  for (const Tensor& img : data.contents) contents.push_back(frozen_targets(img, spec, frozen, cfg));
  for (const Tensor& img : data.styles) styles.push_back(frozen_targets(img, spec, frozen, cfg));

  TrainResult result{init ? *init : init_transform_weights(spec.transform, tc.seed), {}};
  AdamState adam;
  adam.lr = tc.lr;
  Rng rng(tc.seed ^ 0x5851f42d4c957f2dull);
  std::uniform_int_distribution<std::size_t> pick_c(0, contents.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_s(0, styles.size() - 1);
  for (std::size_t step = 0; step < tc.steps; ++step) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs(tc.batch_size);
    for (auto& p : pairs) {
      p.first = pick_c(rng);
      p.second = pick_s(rng);
    }
    WeightStore store = frozen;
    store.merge(result.transform);
    std::vector<detail::ItemResult> items(pairs.size());
    try {
      parallel_for(pairs.size(), tc.threads, [&](std::size_t i) {
        items[i] = transform_item(contents[pairs[i].first], styles[pairs[i].second], spec, store,
                                  result.transform, cfg, true);
      });
    } catch (const NumericError& e) {
      throw TrainingError("train_transform: non-finite value at step " + std::to_string(step) +
                          ": " + e.what());
    }
    std::vector<Tensor> grads;
    const LossRecord rec = detail::reduce_batch(step, items, grads);
    if (!std::isfinite(rec.total)) {
      throw TrainingError("train_transform: NaN loss at step " + std::to_string(step));
    }
    result.history.push_back(rec);
    std::vector<Tensor> params = detail::trainable_values(result.transform);
    adam_step(adam, params, grads);
    detail::write_back(result.transform, params);
  }
  return result;
}

}  // namespace lintx
