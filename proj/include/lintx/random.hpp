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

#include <cstdint>
#include <random>

#include "lintx/tensor.hpp"

namespace lintx {

using Rng = std::mt19937_64;

inline Tensor random_normal(Shape shape, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline Tensor random_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

/// Matrix with orthonormal rows (rows <= cols) or orthonormal columns
/// (rows > cols), from modified Gram-Schmidt on a Gaussian matrix.
inline Tensor random_orthogonal(std::size_t rows, std::size_t cols, Rng& rng) {
  const bool tall = rows > cols;
  const std::size_t k = tall ? cols : rows;  // vectors to orthonormalize
  const std::size_t n = tall ? rows : cols;  // their length
  Tensor q = random_normal({k, n}, rng);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += q(i, c) * q(j, c);
      for (std::size_t c = 0; c < n; ++c) q(i, c) -= dot * q(j, c);
    }
    double norm = 0.0;
    for (std::size_t c = 0; c < n; ++c) norm += q(i, c) * q(i, c);
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < n; ++c) q(i, c) /= norm;
  }
  return tall ? transpose(q) : q;
}

inline Tensor random_orthogonal(std::size_t n, Rng& rng) {
  return random_orthogonal(n, n, rng);
}

/// Q·diag(eigenvalues)·Qᵀ with a seeded random orthogonal Q.
inline Tensor random_spd(std::span<const double> eigenvalues, Rng& rng) {
  const std::size_t n = eigenvalues.size();
  const Tensor q = random_orthogonal(n, rng);
  Tensor a({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += q(i, k) * eigenvalues[k] * q(j, k);
      a(i, j) = s;
      a(j, i) = s;
    }
  return a;
}

}  // namespace lintx
