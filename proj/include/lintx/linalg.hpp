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
#include <numeric>
#include <vector>

#include "lintx/tensor.hpp"

namespace lintx {

/// Eigenpairs of a symmetric matrix. Columns of `vectors` are eigenvectors,
/// `values` are sorted descending, and the first component of magnitude
/// above 1e-12 in each eigenvector is positive.
struct EigenDecomp {
  Tensor vectors;
  std::vector<double> values;

  Tensor reconstruct() const {
    const std::size_t n = values.size();
    Tensor a({n, n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += vectors(i, k) * values[k] * vectors(j, k);
        a(i, j) = s;
        a(j, i) = s;
      }
    return a;
  }
};

struct JacobiOptions {
  double tolerance = 1e-12;  // off-diagonal norm relative to ‖a‖_F
  int max_sweeps = 100;
  double symmetry_tolerance = 1e-8;
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
inline EigenDecomp sym_eig(const Tensor& input, const JacobiOptions& opts = {}) {
  require_square(input, "sym_eig");
  require_finite(input, "sym_eig input");
  const std::size_t n = input.dim(0);
  const double norm = frob_norm(input);
  if (asymmetry(input) > opts.symmetry_tolerance * norm) {
    throw ShapeError("sym_eig: input is not symmetric");
  }

  Tensor a({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
  Tensor v = Tensor::identity(n);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  bool converged = false;
  for (int sweep = 0; sweep <= opts.max_sweeps; ++sweep) {
    if (off_norm() <= opts.tolerance * norm) {
      converged = true;
      break;
    }
    if (sweep == opts.max_sweeps) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(p, k) = a(k, p);
          a(k, q) = s * akp + c * akq;
          a(q, k) = a(k, q);
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    throw ConvergenceError("sym_eig: no convergence after " +
                           std::to_string(opts.max_sweeps) + " sweeps");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenDecomp out{Tensor({n, n}), std::vector<double>(n)};
  for (std::size_t col = 0; col < n; ++col) {
    const std::size_t src = order[col];
    out.values[col] = a(src, src);
    double sign = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (std::abs(v(k, src)) > 1e-12) {
        sign = v(k, src) > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, col) = sign * v(k, src);
  }
  require_finite(out.vectors, "sym_eig vectors");
  return out;
}

/// V·diag(max(λ, eps)^exponent)·Vᵀ. `eps` is an absolute eigenvalue floor.
inline Tensor spd_power(const EigenDecomp& eig, double exponent, double eps) {
  if (!(eps > 0.0)) throw RangeError("spd_power: eps must be positive");
  const std::size_t n = eig.values.size();
  std::vector<double> powered(n);
  for (std::size_t k = 0; k < n; ++k) powered[k] = std::pow(std::max(eig.values[k], eps), exponent);
  const Tensor& v = eig.vectors;
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += v(i, k) * powered[k] * v(j, k);
      out(i, j) = s;
      out(j, i) = s;
    }
  return require_finite(out, "spd_power");
}

inline Tensor spd_power(const Tensor& a, double exponent, double eps) {
  if (!(eps > 0.0)) throw RangeError("spd_power: eps must be positive");
  return spd_power(sym_eig(a), exponent, eps);
}

}  // namespace lintx
