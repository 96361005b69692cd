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
// Reverse-mode differentiation over the closed set of operations the style
// networks need. A Graph is built node by node (shapes are inferred and
// checked at construction), leaves are bound to values, and forward() /
// backward() run over the nodes in insertion order, which is topological
// by construction.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "lintx/error.hpp"
#include "lintx/tensor.hpp"

namespace lintx {

enum class Op : std::uint8_t {
  input,
  parameter,
  conv2d,
  relu,
  maxpool2,
  upsample2_nearest,
  linear,
  matmul,
  add,
  scale,
  reshape,
  subtract_channel_mean,
  covariance,
  gram,
  frobenius_sq_diff,
  weighted_sum,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::parameter: return "parameter";
    case Op::conv2d: return "conv2d";
    case Op::relu: return "relu";
    case Op::maxpool2: return "maxpool2";
    case Op::upsample2_nearest: return "upsample2_nearest";
    case Op::linear: return "linear";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::scale: return "scale";
    case Op::reshape: return "reshape";
    case Op::subtract_channel_mean: return "subtract_channel_mean";
    case Op::covariance: return "covariance";
    case Op::gram: return "gram";
    case Op::frobenius_sq_diff: return "frobenius_sq_diff";
    case Op::weighted_sum: return "weighted_sum";
  }
  return "?";
}

struct NodeId {
  std::size_t index = 0;
  bool operator==(const NodeId&) const = default;
};

struct AutoNode {
  Op op = Op::input;
  std::vector<NodeId> inputs;
  Shape shape;
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool bound = false;
  std::string name;
  double factor = 0.0;                // scale
  std::vector<double> weights;        // weighted_sum
  std::vector<std::uint32_t> argmax;  // maxpool2 routing
};

namespace detail {

// Rows of a rank>=2 tensor: dim 0 is the channel, the rest flatten to pixels.
inline std::pair<std::size_t, std::size_t> channels_pixels(const Shape& s) {
  return {s[0], shape_size(s) / s[0]};
}

inline void second_moment(const double* x, std::size_t c, std::size_t n, double* out) {
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i; j < c; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += x[i * n + k] * x[j * n + k];
      out[i * c + j] = s * inv_n;
      out[j * c + i] = out[i * c + j];
    }
}

inline void subtract_row_means(double* x, std::size_t c, std::size_t n) {
  for (std::size_t i = 0; i < c; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += x[i * n + k];
    const double m = s / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) x[i * n + k] -= m;
  }
}

// g += (1/N)(G + Gᵀ)·x for G [c×c], x [c×n].
inline void second_moment_backward(const double* gm, const double* x, std::size_t c,
                                   std::size_t n, double* gx) {
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double w = (gm[i * c + j] + gm[j * c + i]) * inv_n;
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) gx[i * n + k] += w * x[j * n + k];
    }
}

}  // namespace detail

class Graph {
 public:
  // --- leaves ---------------------------------------------------------------

  /// Constant leaf; never receives a gradient.
  NodeId input(Shape shape, std::string name = {}) {
    return leaf(Op::input, std::move(shape), std::move(name), false);
  }
  NodeId input(Tensor value, std::string name = {}) {
    NodeId id = input(value.shape(), std::move(name));
    bind(id, std::move(value));
    return id;
  }
  /// Trainable leaf; backward() populates its gradient.
  NodeId parameter(Shape shape, std::string name = {}) {
    return leaf(Op::parameter, std::move(shape), std::move(name), true);
  }
  NodeId parameter(Tensor value, std::string name = {}) {
    NodeId id = parameter(value.shape(), std::move(name));
    bind(id, std::move(value));
    return id;
  }

  void bind(NodeId id, Tensor value) {
    AutoNode& n = at(id);
    if (n.op != Op::input && n.op != Op::parameter) {
      throw Error("bind: node " + std::to_string(id.index) + " is not a leaf");
    }
    if (value.shape() != n.shape) {
      throw ShapeError("bind '" + n.name + "': expected " + shape_string(n.shape) + ", got " +
                       shape_string(value.shape()));
    }
    n.value = std::move(value);
    n.bound = true;
    forwarded_ = false;
  }

  /// Mutable value of a bound leaf. Invalidates the last forward pass.
  Tensor& leaf_value(NodeId id) {
    AutoNode& n = at(id);
    if (!n.bound) throw Error("leaf_value: node is not bound");
    forwarded_ = false;
    return n.value;
  }

  // --- operations -----------------------------------------------------------

  /// Stride-1 "same" convolution. x [Ci×H×W], w [Co×Ci×k×k] (k odd), b [Co].
  NodeId conv2d(NodeId x, NodeId w, NodeId b) {
    const Shape& xs = shape(x);
    const Shape& ws = shape(w);
    const Shape& bs = shape(b);
    if (xs.size() != 3 || ws.size() != 4 || bs.size() != 1 || ws[1] != xs[0] ||
        ws[2] != ws[3] || ws[2] % 2 == 0 || bs[0] != ws[0]) {
      throw ShapeError("conv2d: incompatible input " + shape_string(xs) + ", weight " +
                       shape_string(ws) + ", bias " + shape_string(bs));
    }
    return op(Op::conv2d, {x, w, b}, {ws[0], xs[1], xs[2]});
  }

  NodeId relu(NodeId x) { return op(Op::relu, {x}, shape(x)); }

  /// 2×2 max pooling with stride 2; ties route to the first row-major maximum.
  NodeId maxpool2(NodeId x) {
    const Shape& s = shape(x);
    if (s.size() != 3 || s[1] % 2 || s[2] % 2) {
      throw ShapeError("maxpool2: expected [C x even H x even W], got " + shape_string(s));
    }
    return op(Op::maxpool2, {x}, {s[0], s[1] / 2, s[2] / 2});
  }

  NodeId upsample2_nearest(NodeId x) {
    const Shape& s = shape(x);
    if (s.size() != 3) throw ShapeError("upsample2_nearest: expected rank 3");
    return op(Op::upsample2_nearest, {x}, {s[0], s[1] * 2, s[2] * 2});
  }

  /// W·x + b with x [in], W [out×in], b [out].
  NodeId linear(NodeId x, NodeId w, NodeId b) {
    const Shape& xs = shape(x);
    const Shape& ws = shape(w);
    const Shape& bs = shape(b);
    if (xs.size() != 1 || ws.size() != 2 || bs.size() != 1 || ws[1] != xs[0] || bs[0] != ws[0]) {
      throw ShapeError("linear: incompatible input " + shape_string(xs) + ", weight " +
                       shape_string(ws) + ", bias " + shape_string(bs));
    }
    return op(Op::linear, {x, w, b}, {ws[0]});
  }

  NodeId matmul(NodeId a, NodeId b) {
    const Shape& as = shape(a);
    const Shape& bs = shape(b);
    if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) {
      throw ShapeError("matmul: " + shape_string(as) + " x " + shape_string(bs));
    }
    return op(Op::matmul, {a, b}, {as[0], bs[1]});
  }

  NodeId add(NodeId a, NodeId b) {
    if (shape(a) != shape(b)) {
      throw ShapeError("add: " + shape_string(shape(a)) + " vs " + shape_string(shape(b)));
    }
    return op(Op::add, {a, b}, shape(a));
  }

  NodeId scale(NodeId x, double factor) {
    NodeId id = op(Op::scale, {x}, shape(x));
    at(id).factor = factor;
    return id;
  }

  NodeId reshape(NodeId x, Shape s) {
    if (shape_size(s) != shape_size(shape(x))) {
      throw ShapeError("reshape: " + shape_string(shape(x)) + " to " + shape_string(s));
    }
    for (std::size_t e : s)
      if (e == 0) throw ShapeError("reshape: zero extent");
    return op(Op::reshape, {x}, std::move(s));
  }

  NodeId subtract_channel_mean(NodeId x) {
    require_channels(x, "subtract_channel_mean");
    return op(Op::subtract_channel_mean, {x}, shape(x));
  }

  /// (1/N)·x̄·x̄ᵀ over dim 0 channels, trailing dims flattened to N.
  NodeId covariance(NodeId x) {
    require_channels(x, "covariance");
    const std::size_t c = shape(x)[0];
    return op(Op::covariance, {x}, {c, c});
  }

  /// (1/N)·x·xᵀ, uncentered.
  NodeId gram(NodeId x) {
    require_channels(x, "gram");
    const std::size_t c = shape(x)[0];
    return op(Op::gram, {x}, {c, c});
  }

  /// ‖a − b‖²_F as a [1] tensor.
  NodeId frobenius_sq_diff(NodeId a, NodeId b) {
    if (shape(a) != shape(b)) {
      throw ShapeError("frobenius_sq_diff: " + shape_string(shape(a)) + " vs " +
                       shape_string(shape(b)));
    }
    return op(Op::frobenius_sq_diff, {a, b}, {1});
  }

  NodeId weighted_sum(std::vector<NodeId> xs, std::vector<double> weights) {
    if (xs.empty() || xs.size() != weights.size()) {
      throw ShapeError("weighted_sum: need one weight per term");
    }
    for (NodeId x : xs)
      if (shape(x) != shape(xs[0])) throw ShapeError("weighted_sum: term shapes differ");
    const Shape s = shape(xs[0]);
    NodeId id = op(Op::weighted_sum, std::move(xs), s);
    at(id).weights = std::move(weights);
    return id;
  }

  // --- evaluation -----------------------------------------------------------

  /// Evaluates every node. Values are cached for backward().
  void forward() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) evaluate(i);
    forwarded_ = true;
    inference_ = false;
  }

  /// Evaluates every node but drops intermediate values once their last
  /// consumer has run, keeping only `keep`. backward() is unavailable after.
  void forward_inference(std::span<const NodeId> keep) {
    std::vector<std::size_t> last_use(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      for (NodeId in : nodes_[i].inputs) last_use[in.index] = i;
    std::vector<bool> kept(nodes_.size(), false);
    for (NodeId k : keep) kept.at(k.index) = true;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      evaluate(i);
      for (NodeId in : nodes_[i].inputs) {
        AutoNode& src = nodes_[in.index];
        if (last_use[in.index] == i && !kept[in.index] && src.op != Op::input &&
            src.op != Op::parameter) {
          src.value = Tensor();
        }
      }
    }
    forwarded_ = true;
    inference_ = true;
  }

  /// Gradients of the scalar `loss` with respect to every node that requires one.
  void backward(NodeId loss) {
    if (!forwarded_) throw Error("backward called before forward");
    if (inference_) throw Error("backward unavailable after forward_inference");
    if (shape(loss) != Shape{1}) throw ShapeError("backward: loss must be a [1] tensor");
    for (AutoNode& n : nodes_) n.grad = Tensor();
    nodes_[loss.index].grad = Tensor({1}, 1.0);
    for (std::size_t i = loss.index + 1; i-- > 0;) {
      AutoNode& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      propagate(i);
    }
    for (AutoNode& n : nodes_)
      if (n.op == Op::parameter && n.grad.empty()) n.grad = Tensor(n.shape);
  }

  const Tensor& value(NodeId id) const {
    const AutoNode& n = at(id);
    if (n.value.empty()) throw Error("value: node " + std::to_string(id.index) + " has no value");
    return n.value;
  }

  const Tensor& grad(NodeId id) const {
    const AutoNode& n = at(id);
    if (n.grad.empty()) throw Error("grad: node " + std::to_string(id.index) + " has no gradient");
    return n.grad;
  }

  const Shape& shape(NodeId id) const { return at(id).shape; }
  const AutoNode& node(NodeId id) const { return at(id); }
  std::size_t size() const { return nodes_.size(); }

  std::vector<NodeId> parameters() const {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].op == Op::parameter) out.push_back({i});
    return out;
  }

  /// Distance of the current point from the nearest non-differentiable kink:
  /// the smallest |x| entering a relu and the smallest gap between the two
  /// largest entries of any positive maxpool window. Requires forward().
  double kink_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const AutoNode& n : nodes_) {
      if (n.op == Op::relu) {
        for (double v : nodes_[n.inputs[0].index].value.data()) m = std::min(m, std::abs(v));
      } else if (n.op == Op::maxpool2) {
        const Tensor& x = nodes_[n.inputs[0].index].value;
        for (std::size_t c = 0; c < n.shape[0]; ++c)
          for (std::size_t y = 0; y < n.shape[1]; ++y)
            for (std::size_t xx = 0; xx < n.shape[2]; ++xx) {
              double w[4] = {x(c, 2 * y, 2 * xx), x(c, 2 * y, 2 * xx + 1),
                             x(c, 2 * y + 1, 2 * xx), x(c, 2 * y + 1, 2 * xx + 1)};
              std::sort(w, w + 4);
              if (w[3] > 0.0) m = std::min(m, w[3] - w[2]);
            }
      }
    }
    return m;
  }

 private:
  AutoNode& at(NodeId id) {
    if (id.index >= nodes_.size()) throw Error("invalid node id");
    return nodes_[id.index];
  }
  const AutoNode& at(NodeId id) const {
    if (id.index >= nodes_.size()) throw Error("invalid node id");
    return nodes_[id.index];
  }

  void require_channels(NodeId x, const char* what) const {
    if (shape(x).size() < 2) {
      throw ShapeError(std::string(what) + ": expected rank >= 2, got " + shape_string(shape(x)));
    }
  }

  NodeId leaf(Op kind, Shape s, std::string name, bool requires_grad) {
    for (std::size_t e : s)
      if (e == 0) throw ShapeError("leaf '" + name + "': zero extent");
    AutoNode n;
    n.op = kind;
    n.shape = std::move(s);
    n.name = std::move(name);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    forwarded_ = false;
    return {nodes_.size() - 1};
  }

  NodeId op(Op kind, std::vector<NodeId> inputs, Shape s) {
    AutoNode n;
    n.op = kind;
    n.shape = std::move(s);
    for (NodeId in : inputs) n.requires_grad = n.requires_grad || at(in).requires_grad;
    n.inputs = std::move(inputs);
    nodes_.push_back(std::move(n));
    forwarded_ = false;
    return {nodes_.size() - 1};
  }

  const Tensor& in_value(const AutoNode& n, std::size_t k) const {
    return nodes_[n.inputs[k].index].value;
  }

  // Adds `g` into the gradient slot of input k of node n, if it wants one.
  Tensor* grad_slot(const AutoNode& n, std::size_t k) {
    AutoNode& src = nodes_[n.inputs[k].index];
    if (!src.requires_grad) return nullptr;
    if (src.grad.empty()) src.grad = Tensor(src.shape);
    return &src.grad;
  }

  void evaluate(std::size_t i) {
    AutoNode& n = nodes_[i];
    switch (n.op) {
      case Op::input:
      case Op::parameter:
        if (!n.bound) {
          throw Error("forward: unbound " + std::string(op_name(n.op)) + " '" + n.name + "'");
        }
        return;
      default:
        break;
    }
    Tensor out(n.shape);
    switch (n.op) {
      case Op::conv2d: conv2d_forward(n, out); break;
      case Op::relu: {
        const Tensor& x = in_value(n, 0);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[k] > 0.0 ? x[k] : 0.0;
        break;
      }
      case Op::maxpool2: maxpool_forward(n, out); break;
      case Op::upsample2_nearest: {
        const Tensor& x = in_value(n, 0);
        for (std::size_t c = 0; c < n.shape[0]; ++c)
          for (std::size_t y = 0; y < n.shape[1]; ++y)
            for (std::size_t xx = 0; xx < n.shape[2]; ++xx) out(c, y, xx) = x(c, y / 2, xx / 2);
        break;
      }
      case Op::linear: {
        const Tensor& x = in_value(n, 0);
        const Tensor& w = in_value(n, 1);
        const Tensor& b = in_value(n, 2);
        const std::size_t m = w.dim(0), k = w.dim(1);
        for (std::size_t r = 0; r < m; ++r) {
          double s = 0.0;
          for (std::size_t c = 0; c < k; ++c) s += w(r, c) * x[c];
          out[r] = s + b[r];
        }
        break;
      }
      case Op::matmul: out = lintx::matmul(in_value(n, 0), in_value(n, 1)); break;
      case Op::add: {
        const Tensor& a = in_value(n, 0);
        const Tensor& b = in_value(n, 1);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] + b[k];
        break;
      }
      case Op::scale: {
        const Tensor& x = in_value(n, 0);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = n.factor * x[k];
        break;
      }
      case Op::reshape: out = in_value(n, 0).reshaped(n.shape); break;
      case Op::subtract_channel_mean: {
        out = in_value(n, 0);
        const auto [c, p] = detail::channels_pixels(out.shape());
        detail::subtract_row_means(out.data().data(), c, p);
        break;
      }
      case Op::covariance: {
        Tensor xc = in_value(n, 0);
        const auto [c, p] = detail::channels_pixels(xc.shape());
        detail::subtract_row_means(xc.data().data(), c, p);
        detail::second_moment(xc.data().data(), c, p, out.data().data());
        break;
      }
      case Op::gram: {
        const Tensor& x = in_value(n, 0);
        const auto [c, p] = detail::channels_pixels(x.shape());
        detail::second_moment(x.data().data(), c, p, out.data().data());
        break;
      }
      case Op::frobenius_sq_diff: {
        const Tensor& a = in_value(n, 0);
        const Tensor& b = in_value(n, 1);
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
          const double d = a[k] - b[k];
          s += d * d;
        }
        out[0] = s;
        break;
      }
      case Op::weighted_sum: {
        for (std::size_t t = 0; t < n.inputs.size(); ++t) {
          const Tensor& x = in_value(n, t);
          for (std::size_t k = 0; k < out.size(); ++k) out[k] += n.weights[t] * x[k];
        }
        break;
      }
      default:
        break;
    }
    if (!all_finite(out.data())) {
      throw NumericError("forward: non-finite value at node " + std::to_string(i) + " (" +
                         op_name(n.op) + ")");
    }
    n.value = std::move(out);
  }

  void conv2d_forward(const AutoNode& n, Tensor& out) const {
    const Tensor& x = in_value(n, 0);
    const Tensor& w = in_value(n, 1);
    const Tensor& b = in_value(n, 2);
    const std::size_t ci_n = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const std::size_t co_n = w.dim(0), k = w.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const double* px = x.data().data();
    const double* pw = w.data().data();
    double* po = out.data().data();
    const std::size_t plane = h * wd;
    for (std::size_t co = 0; co < co_n; ++co) {
      double* oplane = po + co * plane;
      std::fill(oplane, oplane + plane, b[co]);
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        const double* iplane = px + ci * plane;
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = pw[((co * ci_n + ci) * k + ky) * k + kx];
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
            const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
            const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
            const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
            const std::size_t x1 = dx > 0 ? wd - static_cast<std::size_t>(dx) : wd;
            const std::size_t span = x1 - x0;
            const std::size_t ix0 = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x0) + dx);
            for (std::size_t y = y0; y < y1; ++y) {
              double* orow = oplane + y * wd + x0;
              const double* irow =
                  iplane + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy) * wd + ix0;
              for (std::size_t j = 0; j < span; ++j) orow[j] += wv * irow[j];
            }
          }
      }
    }
  }

  void conv2d_backward(const AutoNode& n) {
    const Tensor& x = in_value(n, 0);
    const Tensor& w = in_value(n, 1);
    const Tensor& g = n.grad;
    Tensor* gx = grad_slot(n, 0);
    Tensor* gw = grad_slot(n, 1);
    Tensor* gb = grad_slot(n, 2);
    const std::size_t ci_n = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const std::size_t co_n = w.dim(0), k = w.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::size_t plane = h * wd;
    const double* px = x.data().data();
    const double* pw = w.data().data();
    const double* pg = g.data().data();
    for (std::size_t co = 0; co < co_n; ++co) {
      const double* gplane = pg + co * plane;
      if (gb) {
        double s = 0.0;
        for (std::size_t p = 0; p < plane; ++p) s += gplane[p];
        (*gb)[co] += s;
      }
      if (!gx && !gw) continue;
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        const double* iplane = px + ci * plane;
        double* gxplane = gx ? gx->data().data() + ci * plane : nullptr;
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((co * ci_n + ci) * k + ky) * k + kx;
            const double wv = pw[widx];
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
            const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
            const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
            const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
            const std::size_t x1 = dx > 0 ? wd - static_cast<std::size_t>(dx) : wd;
            const std::size_t span = x1 - x0;
            const std::size_t ix0 = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x0) + dx);
            double acc = 0.0;
            for (std::size_t y = y0; y < y1; ++y) {
              const double* grow = gplane + y * wd + x0;
              const std::size_t off =
                  static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy) * wd + ix0;
              if (gw) {
                const double* irow = iplane + off;
                for (std::size_t j = 0; j < span; ++j) acc += grow[j] * irow[j];
              }
              if (gxplane) {
                double* gxrow = gxplane + off;
                for (std::size_t j = 0; j < span; ++j) gxrow[j] += wv * grow[j];
              }
            }
            if (gw) (*gw)[widx] += acc;
          }
      }
    }
  }

  void maxpool_forward(AutoNode& n, Tensor& out) {
    const Tensor& x = in_value(n, 0);
    n.argmax.assign(out.size(), 0);
    const std::size_t h = x.dim(1), wd = x.dim(2);
    std::size_t o = 0;
    for (std::size_t c = 0; c < n.shape[0]; ++c)
      for (std::size_t y = 0; y < n.shape[1]; ++y)
        for (std::size_t xx = 0; xx < n.shape[2]; ++xx, ++o) {
          std::size_t best = (c * h + 2 * y) * wd + 2 * xx;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = (c * h + 2 * y + dy) * wd + 2 * xx + dx;
              if (x[idx] > x[best]) best = idx;
            }
          n.argmax[o] = static_cast<std::uint32_t>(best);
          out[o] = x[best];
        }
  }

  void propagate(std::size_t i) {
    const AutoNode& n = nodes_[i];
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::input:
      case Op::parameter:
        return;
      case Op::conv2d:
        conv2d_backward(n);
        return;
      case Op::relu: {
        if (Tensor* gx = grad_slot(n, 0)) {
          const Tensor& x = in_value(n, 0);
          for (std::size_t k = 0; k < g.size(); ++k)
            if (x[k] > 0.0) (*gx)[k] += g[k];
        }
        return;
      }
      case Op::maxpool2: {
        if (Tensor* gx = grad_slot(n, 0))
          for (std::size_t k = 0; k < g.size(); ++k) (*gx)[n.argmax[k]] += g[k];
        return;
      }
      case Op::upsample2_nearest: {
        if (Tensor* gx = grad_slot(n, 0))
          for (std::size_t c = 0; c < n.shape[0]; ++c)
            for (std::size_t y = 0; y < n.shape[1]; ++y)
              for (std::size_t xx = 0; xx < n.shape[2]; ++xx)
                (*gx)(c, y / 2, xx / 2) += g(c, y, xx);
        return;
      }
      case Op::linear: {
        const Tensor& x = in_value(n, 0);
        const Tensor& w = in_value(n, 1);
        const std::size_t m = w.dim(0), k = w.dim(1);
        if (Tensor* gx = grad_slot(n, 0))
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < k; ++c) (*gx)[c] += w(r, c) * g[r];
        if (Tensor* gw = grad_slot(n, 1))
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < k; ++c) (*gw)(r, c) += g[r] * x[c];
        if (Tensor* gb = grad_slot(n, 2))
          for (std::size_t r = 0; r < m; ++r) (*gb)[r] += g[r];
        return;
      }
      case Op::matmul: {
        const Tensor& a = in_value(n, 0);
        const Tensor& b = in_value(n, 1);
        if (Tensor* ga = grad_slot(n, 0)) *ga = *ga + lintx::matmul(g, transpose(b));
        if (Tensor* gb = grad_slot(n, 1)) *gb = *gb + lintx::matmul(transpose(a), g);
        return;
      }
      case Op::add: {
        for (std::size_t t = 0; t < 2; ++t)
          if (Tensor* gx = grad_slot(n, t))
            for (std::size_t k = 0; k < g.size(); ++k) (*gx)[k] += g[k];
        return;
      }
      case Op::scale: {
        if (Tensor* gx = grad_slot(n, 0))
          for (std::size_t k = 0; k < g.size(); ++k) (*gx)[k] += n.factor * g[k];
        return;
      }
      case Op::reshape: {
        if (Tensor* gx = grad_slot(n, 0))
          for (std::size_t k = 0; k < g.size(); ++k) (*gx)[k] += g[k];
        return;
      }
      case Op::subtract_channel_mean: {
        if (Tensor* gx = grad_slot(n, 0)) {
          Tensor gc = g;
          const auto [c, p] = detail::channels_pixels(gc.shape());
          detail::subtract_row_means(gc.data().data(), c, p);
          for (std::size_t k = 0; k < gc.size(); ++k) (*gx)[k] += gc[k];
        }
        return;
      }
      case Op::covariance: {
        if (Tensor* gx = grad_slot(n, 0)) {
          Tensor xc = in_value(n, 0);
          const auto [c, p] = detail::channels_pixels(xc.shape());
          detail::subtract_row_means(xc.data().data(), c, p);
          Tensor gc(xc.shape());
          detail::second_moment_backward(g.data().data(), xc.data().data(), c, p,
                                         gc.data().data());
          detail::subtract_row_means(gc.data().data(), c, p);
          for (std::size_t k = 0; k < gc.size(); ++k) (*gx)[k] += gc[k];
        }
        return;
      }
      case Op::gram: {
        if (Tensor* gx = grad_slot(n, 0)) {
          const Tensor& x = in_value(n, 0);
          const auto [c, p] = detail::channels_pixels(x.shape());
          detail::second_moment_backward(g.data().data(), x.data().data(), c, p,
                                         gx->data().data());
        }
        return;
      }
      case Op::frobenius_sq_diff: {
        const Tensor& a = in_value(n, 0);
        const Tensor& b = in_value(n, 1);
        Tensor* ga = grad_slot(n, 0);
        Tensor* gb = grad_slot(n, 1);
        for (std::size_t k = 0; k < a.size(); ++k) {
          const double d = 2.0 * (a[k] - b[k]) * g[0];
          if (ga) (*ga)[k] += d;
          if (gb) (*gb)[k] -= d;
        }
        return;
      }
      case Op::weighted_sum: {
        for (std::size_t t = 0; t < n.inputs.size(); ++t)
          if (Tensor* gx = grad_slot(n, t))
            for (std::size_t k = 0; k < g.size(); ++k) (*gx)[k] += n.weights[t] * g[k];
        return;
      }
    }
  }

  std::vector<AutoNode> nodes_;
  bool forwarded_ = false;
  bool inference_ = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t samples = 32;  // coordinates per parameter; all if fewer exist
  std::uint64_t seed = 0;
};

/// Max relative error between backward() and central finite differences of
/// `loss` with respect to the leaf `param`:
///   |analytic − numeric| / max(|analytic|, |numeric|, 1e-8).
inline double grad_check(Graph& graph, NodeId loss, NodeId param,
                         const GradCheckOptions& opts = {}) {
  graph.forward();
  graph.backward(loss);
  const Tensor analytic = graph.grad(param);
  const std::size_t n = analytic.size();

  std::vector<std::size_t> coords(n);
  for (std::size_t i = 0; i < n; ++i) coords[i] = i;
  if (n > opts.samples) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opts.samples);
    std::sort(coords.begin(), coords.end());
  }

  double worst = 0.0;
  for (std::size_t idx : coords) {
    const double original = graph.leaf_value(param)[idx];
    graph.leaf_value(param)[idx] = original + opts.step;
    graph.forward();
    const double plus = graph.value(loss)[0];
    graph.leaf_value(param)[idx] = original - opts.step;
    graph.forward();
    const double minus = graph.value(loss)[0];
    graph.leaf_value(param)[idx] = original;
    const double numeric = (plus - minus) / (2.0 * opts.step);
    const double a = analytic[idx];
    const double err =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, err);
  }
  graph.forward();
  return worst;
}

}  // namespace lintx
