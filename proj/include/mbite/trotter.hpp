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


#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mbite/linalg.hpp"
#include "mbite/measurement.hpp"

namespace mbite {

/// H = sum_j H^(j), terms kept in a fixed order j = 1..N.
struct ModelHamiltonian {
  std::string name;
  int num_qubits = 0;
  std::vector<HamiltonianTerm> terms;

  std::size_t num_terms() const noexcept { return terms.size(); }
  std::size_t num_outcomes() const noexcept {
    return std::size_t{1} << terms.size();
  }

  /// Sum of the shifted terms.
  Operator shifted_sum() const {
    const Eigen::Index dim = Eigen::Index{1} << num_qubits;
    Matrix h = Matrix::Zero(dim, dim);
    for (const auto& t : terms) h += t.op().matrix();
    return Operator(std::move(h));
  }

  /// Sum of the bare (unshifted) terms.
  Operator bare_sum() const {
    Matrix h = shifted_sum().matrix();
    double total_shift = 0.0;
    for (const auto& t : terms) total_shift += t.shift();
    h -= total_shift * Matrix::Identity(h.rows(), h.cols());
    return Operator(std::move(h));
  }

  void validate() const {
    if (terms.empty()) throw Error("model '" + name + "' has no terms");
    for (const auto& t : terms) {
      if (t.num_qubits() != num_qubits) {
        throw DimensionError("term '" + t.label() + "' acts on " +
                             std::to_string(t.num_qubits()) +
                             " qubits, model has " +
                             std::to_string(num_qubits));
      }
    }
  }
};

/// Outcome labels k = (k_1, ..., k_N). As an integer, k_1 is the most
/// significant bit, so "01" is index 1.
class OutcomeBitstring {
 public:
  OutcomeBitstring() = default;
  explicit OutcomeBitstring(std::vector<int> bits) : bits_(std::move(bits)) {
    for (int b : bits_) {
      if (b != 0 && b != 1) throw Error("outcome bits must be 0 or 1");
    }
  }

  static OutcomeBitstring from_index(std::size_t index, std::size_t n) {
    if (n < 64 && index >= (std::size_t{1} << n)) {
      throw Error("outcome index out of range");
    }
    std::vector<int> bits(n);
    for (std::size_t j = 0; j < n; ++j) {
      bits[j] = static_cast<int>((index >> (n - 1 - j)) & 1U);
    }
    return OutcomeBitstring(std::move(bits));
  }

  static OutcomeBitstring parse(const std::string& text) {
    std::vector<int> bits;
    for (char c : text) {
      if (c != '0' && c != '1') throw Error("bad outcome label '" + text + "'");
      bits.push_back(c - '0');
    }
    return OutcomeBitstring(std::move(bits));
  }

  std::size_t size() const noexcept { return bits_.size(); }
  int operator[](std::size_t j) const { return bits_.at(j); }
  const std::vector<int>& bits() const noexcept { return bits_; }

  std::size_t index() const noexcept {
    std::size_t k = 0;
    for (int b : bits_) k = (k << 1) | static_cast<std::size_t>(b);
    return k;
  }

  std::string str() const {
    std::string s;
    for (int b : bits_) s.push_back(static_cast<char>('0' + b));
    return s;
  }

  OutcomeBitstring flipped() const {
    std::vector<int> bits(bits_);
    for (int& b : bits) b ^= 1;
    return OutcomeBitstring(std::move(bits));
  }

  friend bool operator==(const OutcomeBitstring&,
                         const OutcomeBitstring&) = default;

 private:
  std::vector<int> bits_;
};

namespace detail {

inline void check_outcome_length(const ModelHamiltonian& model,
                                 const OutcomeBitstring& k) {
  if (k.size() != model.num_terms()) {
    throw Error("outcome bitstring has " + std::to_string(k.size()) +
                " bits, model has " + std::to_string(model.num_terms()) +
                " terms");
  }
}

}  // namespace detail

/// H_k = sum_j (-1)^{k_j} H^(j), using the shifted terms.
inline Operator signed_hamiltonian(const ModelHamiltonian& model,
                                   const OutcomeBitstring& k) {
  detail::check_outcome_length(model, k);
  const Eigen::Index dim = Eigen::Index{1} << model.num_qubits;
  Matrix h = Matrix::Zero(dim, dim);
  for (std::size_t j = 0; j < model.num_terms(); ++j) {
    const double sign = k[j] == 0 ? 1.0 : -1.0;
    h += sign * model.terms[j].op().matrix();
  }
  return Operator(std::move(h));
}

/// Kraus pairs for every term, j = 1..N.
inline std::vector<KrausPair> build_kraus_pairs(const ModelHamiltonian& model,
                                                double epsilon) {
  std::vector<KrausPair> pairs;
  pairs.reserve(model.num_terms());
  for (const auto& t : model.terms) pairs.push_back(build_kraus_pair(t, epsilon));
  return pairs;
}

/// M_k = M^(N)_{k_N} ... M^(1)_{k_1}; term 1 acts first.
inline Operator sequence_operator(const std::vector<KrausPair>& pairs,
                                  const OutcomeBitstring& k) {
  if (k.size() != pairs.size()) throw Error("outcome/pair count mismatch");
  Matrix m = pairs.front()[k[0]].matrix();
  for (std::size_t j = 1; j < pairs.size(); ++j) {
    m = pairs[j][k[j]].matrix() * m;
  }
  return Operator(std::move(m));
}

inline Operator sequence_operator(const ModelHamiltonian& model,
                                  const OutcomeBitstring& k, double epsilon) {
  detail::check_outcome_length(model, k);
  return sequence_operator(build_kraus_pairs(model, epsilon), k);
}

struct ImaginaryTimeResult {
  StateVector state;
  /// Weight of psi0 on the ground space of H.
  double ground_weight = 0.0;
  /// True when psi0 is orthogonal to the ground space (within 1e-12), so the
  /// evolution cannot reach it.
  bool orthogonal_to_ground = false;
};

/// e^{-H tau}|psi0>, renormalized. Evaluated in the eigenbasis with the
/// ground energy subtracted so large tau does not underflow.
inline ImaginaryTimeResult exact_ite(const ModelHamiltonian& model, double tau,
                                     const StateVector& psi0) {
  if (!(tau >= 0.0)) throw Error("exact_ite: tau must be non-negative");
  const Operator h = model.shifted_sum();
  if (psi0.dimension() != h.dimension()) {
    throw DimensionError("exact_ite: state and model dimensions differ");
  }
  const Spectrum sp = eigh(h);
  const double e0 = sp.values[0];
  const Vector coeffs = sp.vectors.adjoint() * psi0.amplitudes();
  double ground_weight = 0.0;
  Vector scaled(coeffs.size());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    const double gap = sp.values[i] - e0;
    if (gap < kTolerance) ground_weight += std::norm(coeffs[i]);
    scaled[i] = coeffs[i] * std::exp(-gap * tau);
  }
  const bool orthogonal = ground_weight < kNormTolerance;
  Vector out = sp.vectors * scaled;
  if (out.norm() < kNormTolerance) {
    throw Error("exact_ite: state decayed to zero");
  }
  return {StateVector(std::move(out)), ground_weight, orthogonal};
}

}  // namespace mbite
