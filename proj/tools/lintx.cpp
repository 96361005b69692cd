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

// lintx: command-line front end for stylization, training, self-checks and
// benchmarking.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "lintx/pipeline.hpp"
#include "lintx/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lintx;

enum ExitCode { kOk = 0, kCheckFailed = 1, kUsage = 2, kIo = 3 };

// Decoder pretraining length used when --steps is not given to train-decoder.
constexpr std::size_t kDecoderSteps = 2000;
constexpr std::size_t kTrainSide = 32;
constexpr std::size_t kTrainImages = 8;

struct UsageError : Error {
  using Error::Error;
};

struct Options {
  fs::path content, style, out, weights, mask, style_mask;
  std::string depth = "shallow";
  std::string kind = "closed_form";
  double alpha = 1.0;
  std::uint64_t seed = 0;
  bool report = false;
  std::vector<std::size_t> sizes{256, 512, 1024};
  std::size_t steps = 0;
  std::string sabotage;
  bool grad_check = false;
  bool pipeline = false;
  std::size_t runs = 20;
};

Depth parse_depth(const std::string& s) {
  if (s == "shallow") return Depth::shallow;
  if (s == "deep") return Depth::deep;
  throw UsageError("unknown --depth '" + s + "'");
}

const fs::path& need(const fs::path& p, const char* flag) {
  if (p.empty()) throw UsageError(std::string("missing required flag ") + flag);
  return p;
}

void need_file(const fs::path& p, const char* flag) {
  if (!fs::is_regular_file(need(p, flag))) throw IoError("'" + p.string() + "' does not exist");
}

void need_dir(const fs::path& p, const char* flag) {
  if (!fs::is_directory(need(p, flag))) throw IoError("'" + p.string() + "' is not a directory");
}

void need_parent(const fs::path& p, const char* flag) {
  const fs::path parent = fs::absolute(need(p, flag)).parent_path();
  if (!fs::is_directory(parent)) throw IoError("output directory '" + parent.string() + "' does not exist");
}

WeightStore load_model(const Options& o, const ModelSpec& spec) {
  need_file(o.weights, "--weights");
  WeightStore w = load_weights(o.weights);
  if (w.spec_hash != spec.hash()) {
    throw UsageError("weights in '" + o.weights.string() + "' were not built for --depth " + o.depth);
  }
  return w;
}

fs::path history_path(const fs::path& out) { return fs::path(out.string() + ".loss.csv"); }

// --- stylize ------------------------------------------------------------------------

StylizeOptions stylize_options(const Options& o) {
  StylizeOptions s;
  s.kind = parse_kind(o.kind);
  s.alpha = o.alpha;
  return s;
}

void check_learned_weights(const WeightStore& w, TransformKind kind) {
  if (kind == TransformKind::learned && !w.contains("transform.compress.weight")) {
    throw UsageError("--kind learned needs weights produced by train-transform");
  }
}

std::optional<MaskInput> load_masks(const Options& o) {
  if (o.mask.empty()) {
    if (!o.style_mask.empty()) throw UsageError("--style-mask requires --mask");
    return std::nullopt;
  }
  need_file(o.mask, "--mask");
  MaskInput m{read_label_image(o.mask), std::nullopt};
  if (!o.style_mask.empty()) {
    need_file(o.style_mask, "--style-mask");
    m.style = read_label_image(o.style_mask);
  }
  return m;
}

int cmd_stylize(const Options& o) {
  need_file(o.content, "--content");
  need_file(o.style, "--style");
  need_parent(o.out, "--out");
  const ModelSpec spec = ModelSpec::preset(parse_depth(o.depth));
  const StylizeOptions opts = stylize_options(o);
  const WeightStore weights = load_model(o, spec);
  check_learned_weights(weights, opts.kind);
  const Tensor content = read_image(o.content);
  const Tensor style = read_image(o.style);
  const std::optional<MaskInput> mask = load_masks(o);
  if (mask && (mask->content.height != content.dim(1) || mask->content.width != content.dim(2))) {
    throw UsageError("mask dimensions do not match the content image");
  }
  const PreparedStyle prepared = prepare_style(style, spec, weights, opts, mask ? &*mask : nullptr);
  const Stylized s = stylize_prepared(content, prepared, spec, weights, opts);
  write_image(s.image, o.out);
  if (o.report) {
    const TransferReport r = transfer_report(s, prepared, opts.closed_form);
    std::printf("covariance_residual %.6e\n", r.covariance_residual);
    if (r.affinity_residual) {
      std::printf("affinity_residual %.6e\n", *r.affinity_residual);
    } else {
      std::printf("affinity_residual skipped (%zu pixels > %zu)\n", s.content.pixels(), kAffinityMaxPixels);
    }
  }
  return kOk;
}

int cmd_stylize_video(const Options& o) {
  need_dir(o.content, "--content");
  need_file(o.style, "--style");
  need(o.out, "--out");
  const ModelSpec spec = ModelSpec::preset(parse_depth(o.depth));
  const StylizeOptions opts = stylize_options(o);
  const WeightStore weights = load_model(o, spec);
  check_learned_weights(weights, opts.kind);
  const std::vector<fs::path> frames = list_images(o.content);
  if (frames.empty()) throw IoError("no .ppm frames in '" + o.content.string() + "'");
  std::vector<Tensor> images;
  for (const fs::path& f : frames) {
    images.push_back(read_image(f));
    if (images.back().shape() != images.front().shape()) {
      throw UsageError("frame '" + f.filename().string() + "' is " + shape_string(images.back().shape()) +
                       " but the first frame is " + shape_string(images.front().shape()));
    }
  }
  const std::optional<MaskInput> mask = load_masks(o);
  fs::create_directories(o.out);
  const PreparedStyle prepared =
      prepare_style(read_image(o.style), spec, weights, opts, mask ? &*mask : nullptr);
  parallel_for(images.size(), thread_count(), [&](std::size_t i) {
    write_image(stylize_prepared(images[i], prepared, spec, weights, opts).image,
                o.out / frames[i].filename());
  });
  std::printf("stylized %zu frames into %s\n", frames.size(), o.out.string().c_str());
  return kOk;
}

// --- training -----------------------------------------------------------------------

int cmd_train_decoder(const Options& o) {
  need_parent(o.out, "--out");
  const ModelSpec spec = ModelSpec::preset(parse_depth(o.depth));
  std::vector<Tensor> images;
  if (!o.content.empty()) {
    need_dir(o.content, "--content");
    images = load_image_directory(o.content);
  } else {
    images = make_content_images(kTrainImages, kTrainSide, o.seed);
    for (Tensor& t : make_style_images(kTrainImages, kTrainSide, o.seed + 1)) images.push_back(std::move(t));
  }
  if (images.empty()) throw IoError("no training images");
  WeightStore weights = init_encoder_weights(spec.encoder, o.seed);
  PretrainConfig cfg;
  cfg.steps = o.steps ? o.steps : kDecoderSteps;
  cfg.seed = o.seed;
  cfg.threads = thread_count();
  const PretrainResult r = pretrain_decoder(images, spec.encoder, weights, cfg);
  weights.merge(r.decoder);
  weights.spec_hash = spec.hash();
  save_weights(weights, o.out);
  write_loss_history(r.history, history_path(o.out));
  std::printf("reconstruction mse %.6g -> %.6g over %zu steps\n", r.history.front().total,
              r.history.back().total, r.history.size());
  return kOk;
}

int cmd_train_transform(const Options& o) {
  need_parent(o.out, "--out");
  const ModelSpec spec = ModelSpec::preset(parse_depth(o.depth));
  WeightStore frozen = load_model(o, spec);
  TransferData data;
  if (!o.content.empty() || !o.style.empty()) {
    need_dir(o.content, "--content");
    need_dir(o.style, "--style");
    data.contents = load_image_directory(o.content);
    data.styles = load_image_directory(o.style);
  } else {
    data.contents = make_content_images(kTrainImages, kTrainSide, o.seed + 2);
    data.styles = make_style_images(kTrainImages, kTrainSide, o.seed + 3);
  }
  WeightStore base;
  for (const auto& [name, t] : frozen.entries())
    if (!is_transform_param(name)) base.set(name, t);
  base.spec_hash = frozen.spec_hash;
  TrainConfig cfg;
  cfg.steps = o.steps ? o.steps : cfg.steps;
  cfg.seed = o.seed;
  cfg.threads = thread_count();
  const TrainResult r = train_transform(data, spec, base, LossConfig::defaults(spec.encoder), cfg);
  base.merge(r.transform);
  save_weights(base, o.out);
  write_loss_history(r.history, history_path(o.out));
  std::printf("total loss %.6g -> %.6g over %zu steps\n", r.history.front().total,
              r.history.back().total, r.history.size());
  return kOk;
}

// --- verify -------------------------------------------------------------------------

struct Checker {
  bool all_pass = true;
  // Lower-is-better check; control checks pass when the residual exceeds it.
  void report(const std::string& name, double residual, double threshold, bool control = false) {
    const bool pass = control ? residual > threshold : residual <= threshold;
    all_pass = all_pass && pass;
    std::printf("CHECK %s %.6e %.1e %s\n", name.c_str(), residual, threshold, pass ? "PASS" : "FAIL");
  }
};

Tensor random_symmetric(std::size_t n, Rng& rng) {
  const Tensor g = random_normal({n, n}, rng);
  return g + transpose(g);
}

FeatureMap correlated(std::size_t c, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 4.0);
  std::vector<double> spectrum(c);
  for (double& v : spectrum) v = u(rng);
  Tensor x = matmul(spd_power(random_spd(spectrum, rng), 0.5, 1e-300), random_normal({c, n}, rng));
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < n; ++j) x(i, j) += 0.3 * static_cast<double>(i);
  return FeatureMap::from_matrix(std::move(x));
}

void verify_transfer(Checker& ck, const Options& o) {
  const bool sabotage = o.sabotage == "identityT";
  Rng rng(o.seed);
  double eig = 0.0, root = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Tensor a = random_symmetric(16, rng);
    eig = std::max(eig, frob_norm(sym_eig(a).reconstruct() - a) / frob_norm(a));
    const Tensor spd = matmul(a, a) + Tensor::identity(16);
    root = std::max(root, frob_norm(spd_power(spd_power(spd, 0.5, 1e-12), 2.0, 1e-12) - spd) / frob_norm(spd));
  }
  ck.report("eigen_reconstruction", eig, 1e-10);
  ck.report("spd_sqrt_roundtrip", root, 1e-9);

  double cov = 0.0, cov_u = 0.0, aff = 0.0, control = 1e300, adain = 0.0;
  for (int k = 0; k < 20; ++k) {
    const FeatureMap fc = correlated(16, 400, rng), fs = correlated(16, 300, rng);
    ClosedFormConfig cfg;
    TransformMatrix t = closed_form_T(covariance(fc), covariance(fs), cfg);
    if (sabotage) t.matrix = Tensor::identity(16);
    cov = std::max(cov, verify_covariance_match(apply_transform(fc, t, channel_mean(fs)), covariance(fs)));
    cfg.orthogonal_u = random_orthogonal(16, rng);
    TransformMatrix tu = closed_form_T(covariance(fc), covariance(fs), cfg);
    if (sabotage) tu.matrix = Tensor::identity(16);
    cov_u = std::max(cov_u, verify_covariance_match(apply_transform(fc, tu, channel_mean(fs)), covariance(fs)));

    const FeatureMap a = correlated(8, 256, rng);
    Tensor m = random_normal({8, 8}, rng) + 3.0 * Tensor::identity(8);
    std::vector<double> shift(8);
    for (double& v : shift) v = 2.0;
    const FeatureMap moved = apply_transform(a, {m}, shift);
    aff = std::max(aff, verify_affinity_preserved(a, moved, 1e-12));
    Tensor bent = moved.matrix();
    for (double& v : bent.data()) v = std::max(v - 2.0, 0.0);
    control = std::min(control, verify_affinity_preserved(a, FeatureMap::from_matrix(bent), 1e-12));

    const FeatureMap d = adain_transform(fc, fs, 1e-12);
    const ChannelStats sd = channel_mean_std(d, 0.0), ss = channel_mean_std(fs, 0.0);
    for (std::size_t i = 0; i < 16; ++i)
      adain = std::max({adain, std::abs(sd.mean[i] - ss.mean[i]), std::abs(sd.std[i] - ss.std[i])});
  }
  ck.report("covariance_match", cov, 1e-6);
  ck.report("covariance_match_orthogonal_u", cov_u, 1e-6);
  ck.report("affinity_preserved", aff, 1e-6);
  ck.report("affinity_nonlinear_control", control, 1e-3, true);
  ck.report("adain_moments", adain, 1e-9);

  const FeatureMap fc(random_normal({8, 256}, rng), 16, 16), fs(random_normal({8, 256}, rng, 2.0), 16, 16);
  RegionMask one{16, 16, std::vector<std::uint32_t>(256, 0), 1};
  TransformMatrix t = closed_form_T(covariance(fc), covariance(fs));
  if (sabotage) t.matrix = Tensor::identity(8);
  const FeatureMap plain = apply_transform(fc, t, channel_mean(fs));
  const FeatureMap masked = masked_transfer(fc, one, region_statistics(fs, one));
  ck.report("masked_single_region", max_abs_diff(plain.matrix(), masked.matrix()), 0.0);

  RegionMask two{16, 16, std::vector<std::uint32_t>(256), 2};
  for (std::size_t i = 0; i < 256; ++i) two.labels[i] = (i / 16) < 8 ? 0 : 1;
  const auto styles = region_statistics(fs, two);
  const FeatureMap out = masked_transfer(fc, two, styles);
  const auto px = detail::region_pixels(two);
  double region = 0.0;
  for (std::uint32_t r = 0; r < 2; ++r)
    region = std::max(region, verify_covariance_match(detail::gather(out, px[r]), styles[r].cov));
  ck.report("masked_two_regions", region, 1e-5);
}

void verify_gradients(Checker& ck, std::uint64_t seed) {
  using Build = std::function<std::pair<NodeId, NodeId>(Graph&, Rng&)>;
  auto readout = [](Graph& g, NodeId x, Rng& r) {
    return g.frobenius_sq_diff(x, g.input(random_normal(g.shape(x), r)));
  };
  const std::vector<std::pair<std::string, Build>> ops = {
      {"conv2d", [&](Graph& g, Rng& r) {
         NodeId w = g.parameter(random_normal({3, 2, 3, 3}, r));
         return std::pair{readout(g, g.conv2d(g.input(random_normal({2, 5, 4}, r)), w, g.parameter(random_normal({3}, r))), r), w};
       }},
      {"relu", [&](Graph& g, Rng& r) {
         Tensor v = random_normal({2, 3, 3}, r);
         for (double& e : v.data()) e += e >= 0.0 ? 0.1 : -0.1;
         NodeId x = g.parameter(v);
         return std::pair{readout(g, g.relu(x), r), x};
       }},
      {"maxpool2", [&](Graph& g, Rng& r) {
         Tensor v({2, 4, 4});
         std::vector<std::size_t> perm(v.size());
         for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
         std::shuffle(perm.begin(), perm.end(), r);
         for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>(perm[i]);
         NodeId x = g.parameter(v);
         return std::pair{readout(g, g.maxpool2(x), r), x};
       }},
      {"upsample2_nearest", [&](Graph& g, Rng& r) {
         NodeId x = g.parameter(random_normal({2, 2, 3}, r));
         return std::pair{readout(g, g.upsample2_nearest(x), r), x};
       }},
      {"linear", [&](Graph& g, Rng& r) {
         NodeId w = g.parameter(random_normal({4, 5}, r));
         return std::pair{readout(g, g.linear(g.input(random_normal({5}, r)), w, g.parameter(random_normal({4}, r))), r), w};
       }},
      {"matmul", [&](Graph& g, Rng& r) {
         NodeId a = g.parameter(random_normal({3, 4}, r));
         return std::pair{readout(g, g.matmul(a, g.input(random_normal({4, 2}, r))), r), a};
       }},
      {"add", [&](Graph& g, Rng& r) {
         NodeId a = g.parameter(random_normal({2, 6}, r));
         return std::pair{readout(g, g.add(a, g.input(random_normal({2, 6}, r))), r), a};
       }},
      {"scale", [&](Graph& g, Rng& r) {
         NodeId a = g.parameter(random_normal({5}, r));
         return std::pair{readout(g, g.scale(a, -1.7), r), a};
       }},
      {"reshape", [&](Graph& g, Rng& r) {
         NodeId a = g.parameter(random_normal({2, 6}, r));
         return std::pair{readout(g, g.reshape(a, {3, 4}), r), a};
       }},
      {"subtract_channel_mean", [&](Graph& g, Rng& r) {
         NodeId x = g.parameter(random_normal({3, 2, 4}, r));
         return std::pair{readout(g, g.subtract_channel_mean(x), r), x};
       }},
      {"covariance", [&](Graph& g, Rng& r) {
         NodeId x = g.parameter(random_normal({3, 3, 3}, r));
         return std::pair{readout(g, g.covariance(x), r), x};
       }},
      {"gram", [&](Graph& g, Rng& r) {
         NodeId x = g.parameter(random_normal({4, 6}, r));
         return std::pair{readout(g, g.gram(x), r), x};
       }},
      {"frobenius_sq_diff", [&](Graph& g, Rng& r) {
         NodeId x = g.parameter(random_normal({3, 3}, r));
         return std::pair{g.frobenius_sq_diff(x, g.input(random_normal({3, 3}, r))), x};
       }},
      {"weighted_sum", [&](Graph& g, Rng& r) {
         NodeId x = g.parameter(random_normal({3}, r));
         return std::pair{g.weighted_sum({readout(g, x, r), readout(g, g.scale(x, 2.0), r)}, {0.3, 1.5}), x};
       }},
  };
  for (const auto& [name, build] : ops) {
    double worst = 0.0;
    for (std::uint64_t point = 0; point < 16; ++point) {
      Rng rng(seed * 7919 + point);
      Graph g;
      auto [loss, param] = build(g, rng);
      worst = std::max(worst, grad_check(g, loss, param, {1e-5, 32, point}));
    }
    ck.report("grad_" + name, worst, 1e-5);
  }
}

int cmd_verify(const Options& o) {
  if (!o.sabotage.empty() && o.sabotage != "identityT") {
    throw UsageError("unknown --sabotage mode '" + o.sabotage + "'");
  }
  Checker ck;
  verify_transfer(ck, o);
  if (o.grad_check) verify_gradients(ck, o.seed);
  return ck.all_pass ? kOk : kCheckFailed;
}

// --- bench --------------------------------------------------------------------------

double median_ms(std::size_t runs, const std::function<void()>& fn) {
  for (int w = 0; w < 3; ++w) fn();
  std::vector<double> ms;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  return n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
}

int cmd_bench(const Options& o) {
  if (o.runs < 20) throw UsageError("--runs must be at least 20");
  const ModelSpec spec = ModelSpec::preset(parse_depth(o.depth));
  for (std::size_t s : o.sizes) {
    if (s == 0 || s % spec.encoder.downsample_factor()) {
      throw UsageError("bench size " + std::to_string(s) + " must be a positive multiple of " +
                       std::to_string(spec.encoder.downsample_factor()));
    }
  }
  WeightStore weights = init_encoder_weights(spec.encoder, o.seed);
  weights.merge(init_decoder_weights(spec.encoder, o.seed + 1));
  weights.merge(init_transform_weights(spec.transform, o.seed + 2));

  std::printf("# lintx bench: median milliseconds per image over %zu runs after 3 warmups\n", o.runs);
  std::printf("# stage: %s; depth: %s; encoder/decoder weights are seeded, not trained\n",
              o.pipeline ? "encode + transform + decode" : "transform at the bottleneck", o.depth.c_str());
  std::printf("# absolute timings are NOT comparable to published figures (different encoder, hardware and precision)\n");
  std::printf("kind,size,channels,median_ms,runs\n");
  const std::size_t c = spec.encoder.bottleneck_channels();
  for (TransformKind kind : {TransformKind::closed_form, TransformKind::adain, TransformKind::learned}) {
    StylizeOptions opts;
    opts.kind = kind;
    for (std::size_t s : o.sizes) {
      Rng rng(o.seed + s);
      double ms = 0.0;
      if (o.pipeline) {
        const Tensor content = make_content_image(s, rng), style = make_style_image(s, rng);
        ms = median_ms(o.runs, [&] { stylize_image(content, style, spec, weights, opts); });
      } else {
        const std::size_t side = s / spec.encoder.downsample_factor();
        const FeatureMap fc(random_uniform({c, side * side}, rng), side, side);
        const FeatureMap fs(random_uniform({c, side * side}, rng), side, side);
        ms = median_ms(o.runs, [&] {
          switch (kind) {
            case TransformKind::closed_form:
              apply_transform(fc, closed_form_T(covariance(fc), covariance(fs)), channel_mean(fs));
              break;
            case TransformKind::adain:
              adain_transform(fc, fs, opts.adain_eps);
              break;
            case TransformKind::learned:
              stylize_features(fc, fs, spec.transform, weights);
              break;
          }
        });
      }
      std::printf("%s,%zu,%zu,%.4f,%zu\n", kind_name(kind), s, c, ms, o.runs);
      std::fflush(stdout);
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lintx: linear style transfer"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.set_config("--config", "", "Read defaults from a file of key = value lines");
  app.add_option("--content", o.content, "Content image (stylize) or frame/image directory");
  app.add_option("--style", o.style, "Style image, or style image directory for train-transform");
  app.add_option("--out", o.out, "Output image, frame directory or weight file");
  app.add_option("--weights", o.weights, "LSTW weight file");
  app.add_option("--depth", o.depth, "Encoder preset")->check(CLI::IsMember({"shallow", "deep"}));
  app.add_option("--kind", o.kind, "Transform")->check(CLI::IsMember({"closed_form", "adain", "learned"}));
  app.add_option("--alpha", o.alpha, "Blend between content (0) and transfer (1)")->check(CLI::Range(0.0, 1.0));
  app.add_option("--mask", o.mask, "Content region mask (PGM/PPM, one region per byte value)");
  app.add_option("--style-mask", o.style_mask, "Style region mask; unmatched labels share one region");
  app.add_option("--seed", o.seed, "Seed for initialization and synthetic data");
  app.add_flag("--report", o.report, "Print covariance and affinity residuals");
  app.add_option("--sizes", o.sizes, "Benchmark image sizes")->delimiter(',');
  app.add_option("--steps", o.steps, "Training steps");

  app.add_subcommand("stylize", "Stylize one image");
  app.add_subcommand("stylize-video", "Stylize every frame of a directory with one style");
  app.add_subcommand("train-decoder", "Initialize the encoder and pretrain the decoder");
  app.add_subcommand("train-transform", "Train the transformation module");
  CLI::App* verify = app.add_subcommand("verify", "Run the invariant self-checks");
  verify->add_option("--sabotage", o.sabotage, "Inject a fault (identityT)");
  verify->add_flag("--grad-check", o.grad_check, "Also finite-difference check every autodiff op");
  CLI::App* bench = app.add_subcommand("bench", "Time each transform kind per image size");
  bench->add_flag("--pipeline", o.pipeline, "Time encode + transform + decode instead of the transform");
  bench->add_option("--runs", o.runs, "Timed runs per cell (>= 20)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "stylize") return cmd_stylize(o);
    if (cmd == "stylize-video") return cmd_stylize_video(o);
    if (cmd == "train-decoder") return cmd_train_decoder(o);
    if (cmd == "train-transform") return cmd_train_transform(o);
    if (cmd == "verify") return cmd_verify(o);
    return cmd_bench(o);
  } catch (const IoError& e) {
    std::fprintf(stderr, "lintx %s: %s\n", cmd.c_str(), e.what());
    return kIo;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "lintx %s: %s\n", cmd.c_str(), e.what());
    return kUsage;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "lintx %s: %s\n", cmd.c_str(), e.what());
    return kUsage;
  } catch (const RangeError& e) {
    std::fprintf(stderr, "lintx %s: %s\n", cmd.c_str(), e.what());
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "lintx %s: %s\n", cmd.c_str(), e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lintx %s: %s\n", cmd.c_str(), e.what());
    return kCheckFailed;
  }
}
