// Copyright 2026 The mbite Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Reference implementations used only by tests. They share no numerical code
// with the library: plain row-major arrays, textbook loops, no Eigen solvers.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "mbite/linalg.hpp"

namespace oracle {

using C = std::complex<double>;

struct Mat {
  std::size_t n = 0;
  std::vector<C> a;

  explicit Mat(std::size_t dim) : n(dim), a(dim * dim) {}
  C& operator()(std::size_t r, std::size_t c) { return a[r * n + c]; }
  C operator()(std::size_t r, std::size_t c) const { return a[r * n + c]; }

  static Mat identity(std::size_t dim) {
    Mat m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Mat mul(const Mat& x, const Mat& y) {
  Mat out(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.n; ++k)
      for (std::size_t j = 0; j < x.n; ++j) out(i, j) += x(i, k) * y(k, j);
  return out;
}

inline Mat add(const Mat& x, const Mat& y, C s = 1.0) {
  Mat out(x.n);
  for (std::size_t i = 0; i < x.a.size(); ++i) out.a[i] = x.a[i] + s * y.a[i];
  return out;
}

inline Mat scale(const Mat& x, C s) {
  Mat out(x.n);
  for (std::size_t i = 0; i < x.a.size(); ++i) out.a[i] = s * x.a[i];
  return out;
}

/// Kronecker product by index arithmetic.
inline Mat kron(const Mat& x, const Mat& y) {
  Mat out(x.n * y.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.n; ++j)
      for (std::size_t k = 0; k < y.n; ++k)
        for (std::size_t l = 0; l < y.n; ++l)
          out(i * y.n + k, j * y.n + l) = x(i, j) * y(k, l);
  return out;
}

inline Mat pauli(char p) {
  Mat m(2);
  switch (p) {
    case 'I': m(0, 0) = 1.0; m(1, 1) = 1.0; break;
    case 'X': m(0, 1) = 1.0; m(1, 0) = 1.0; break;
    case 'Y': m(0, 1) = C(0, -1); m(1, 0) = C(0, 1); break;
    case 'Z': m(0, 0) = 1.0; m(1, 1) = -1.0; break;
    default: break;
  }
  return m;
}

/// coefficient * P_0 (x) P_1 (x) ..., one character per qubit from "IXYZ".
inline Mat pauli_word(const std::string& word, double coefficient = 1.0) {
  Mat out = Mat::identity(1);
  for (char c : word) out = kron(out, pauli(c));
  return scale(out, coefficient);
}

inline double frobenius(const Mat& x) {
  double s = 0.0;
  for (const C& v : x.a) s += std::norm(v);
  return std::sqrt(s);
}

/// e^{t A} by scaling and squaring around a 30-term Taylor series.
inline Mat exp(const Mat& x, C t) {
  Mat a = scale(x, t);
  const double norm = frobenius(a);
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
  a = scale(a, 1.0 / std::pow(2.0, squarings));
  Mat term = Mat::identity(x.n);
  Mat sum = Mat::identity(x.n);
  for (int k = 1; k <= 30; ++k) {
    term = scale(mul(term, a), 1.0 / k);
    sum = add(sum, term);
  }
  for (int i = 0; i < squarings; ++i) sum = mul(sum, sum);
  return sum;
}

inline std::vector<C> matvec(const Mat& x, const std::vector<C>& v) {
  std::vector<C> out(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.n; ++j) out[i] += x(i, j) * v[j];
  return out;
}

inline void normalize(std::vector<C>& v) {
  double s = 0.0;
  for (const C& c : v) s += std::norm(c);
  s = std::sqrt(s);
  for (C& c : v) c /= s;
}

/// Lowest eigenpair of a Hermitian matrix by power iteration on
/// (shift I - H), shift = max absolute row sum. Returns the energy.
inline double ground_state(const Mat& h, std::vector<C>& vec,
                           int iterations = 200000) {
  double shift = 0.0;
  for (std::size_t i = 0; i < h.n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < h.n; ++j) row += std::abs(h(i, j));
    shift = std::max(shift, row);
  }
  const Mat m = add(scale(Mat::identity(h.n), shift), h, -1.0);
  vec.assign(h.n, C(0.0));
  for (std::size_t i = 0; i < h.n; ++i) vec[i] = C(1.0 + 0.1 * i, 0.05 * i);
  normalize(vec);
  for (int it = 0; it < iterations; ++it) {
    std::vector<C> next = matvec(m, vec);
    normalize(next);
    double diff = 0.0;
    for (std::size_t i = 0; i < h.n; ++i) diff += std::norm(next[i] - vec[i]);
    vec = std::move(next);
    if (diff < 1e-30) break;
  }
  const std::vector<C> hv = matvec(h, vec);
  C e = 0.0;
  for (std::size_t i = 0; i < h.n; ++i) e += std::conj(vec[i]) * hv[i];
  return e.real();
}

inline Mat from_eigen(const mbite::Matrix& m) {
  Mat out(static_cast<std::size_t>(m.rows()));
  for (std::size_t i = 0; i < out.n; ++i)
    for (std::size_t j = 0; j < out.n; ++j)
      out(i, j) = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

inline mbite::Matrix to_eigen(const Mat& m) {
  const auto n = static_cast<Eigen::Index>(m.n);
  mbite::Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(i, j) = m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return out;
}

inline mbite::Vector to_eigen(const std::vector<C>& v) {
  mbite::Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[i];
  }
  return out;
}

/// Largest singular value via power iteration on X^+ X.
inline double spectral_norm(const Mat& x) {
  Mat xh(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.n; ++j) xh(i, j) = std::conj(x(j, i));
  const Mat g = mul(xh, x);
  std::vector<C> v(x.n);
  for (std::size_t i = 0; i < x.n; ++i) v[i] = C(1.0 + 0.37 * i, 0.11 * i);
  normalize(v);
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    std::vector<C> w = matvec(g, v);
    double s = 0.0;
    for (const C& c : w) s += std::norm(c);
    const double next = std::sqrt(s);
    normalize(w);
    v = std::move(w);
    if (std::abs(next - lambda) < 1e-15 * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(lambda);
}

}  // namespace oracle
