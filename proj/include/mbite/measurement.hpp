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
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mbite/linalg.hpp"
#include "mbite/random.hpp"

namespace mbite {

/// Largest eps * spectral_max accepted for runs. Positivity alone needs < 1.
inline constexpr double kEpsilonValidityBound = 0.5;

/// One summand H^(j) of the model Hamiltonian, shifted by a multiple of the
/// identity so its lowest eigenvalue is exactly zero. Cheap to copy.
class HamiltonianTerm {
 public:
  /// Sum of Pauli strings; the identity shift is computed here.
  static HamiltonianTerm from_strings(std::string label,
                                      std::vector<PauliString> strings,
                                      int num_qubits) {
    Operator unshifted = materialize(strings, num_qubits);
    return HamiltonianTerm(std::move(label), std::move(strings),
                           std::move(unshifted));
  }

  /// Dense Hermitian operator (used where a Pauli expansion would be
  /// exponentially long, e.g. projector terms).
  static HamiltonianTerm from_operator(std::string label, Operator unshifted) {
    return HamiltonianTerm(std::move(label), {}, std::move(unshifted));
  }

  const std::string& label() const noexcept { return d_->label; }
  const std::vector<PauliString>& strings() const noexcept {
    return d_->strings;
  }
  int num_qubits() const noexcept { return d_->op.num_qubits(); }
  /// Identity offset added to the bare operator.
  double shift() const noexcept { return d_->shift; }
  /// Largest eigenvalue of the shifted operator.
  double spectral_max() const noexcept { return d_->spectral_max; }
  /// The shifted, positive semidefinite operator.
  const Operator& op() const noexcept { return d_->op; }

  /// Converts an energy of the shifted operator back to the bare one.
  double unshift(double energy) const noexcept { return energy - d_->shift; }

 private:
  struct Data {
    std::string label;
    std::vector<PauliString> strings;
    double shift = 0.0;
    double spectral_max = 0.0;
    Operator op;
  };

  HamiltonianTerm(std::string label, std::vector<PauliString> strings,
                  Operator unshifted) {
    require_hermitian(unshifted, "HamiltonianTerm");
    const Spectrum sp = eigh(unshifted);
    const double shift = -sp.values[0];
    const Eigen::Index dim = unshifted.matrix().rows();
    Operator shifted(unshifted.matrix() + shift * Matrix::Identity(dim, dim));
    d_ = std::make_shared<const Data>(Data{
        std::move(label), std::move(strings), shift,
        sp.values[sp.values.size() - 1] + shift, std::move(shifted)});
  }

  std::shared_ptr<const Data> d_;
};

/// Throws unless eps > 0 and eps * spectral_max <= bound.
inline void validate_epsilon(const HamiltonianTerm& term, double epsilon,
                             double bound = kEpsilonValidityBound) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error("epsilon must be positive, got " +
                detail::format_double(epsilon));
  }
  if (epsilon * term.spectral_max() > bound) {
    throw Error("epsilon " + detail::format_double(epsilon) +
                " exceeds the validity bound for term '" + term.label() +
                "': eps * spectral_max = " +
                detail::format_double(epsilon * term.spectral_max()) + " > " +
                detail::format_double(bound));
  }
}

/// Two-outcome weak measurement realizing e^{-eps H} (outcome 0) and
/// e^{+eps H} (outcome 1) up to O(eps^2), each scaled by 1/sqrt(2).
struct KrausPair {
  Operator m0;
  Operator m1;
  double epsilon = 0.0;
  HamiltonianTerm term;

  /// ||m0^+ m0 + m1^+ m1 - I||_F
  double completeness_defect() const {
    const Matrix sum = m0.matrix().adjoint() * m0.matrix() +
                       m1.matrix().adjoint() * m1.matrix();
    return (sum - Matrix::Identity(sum.rows(), sum.cols())).norm();
  }

  const Operator& operator[](int outcome) const {
    return outcome == 0 ? m0 : m1;
  }
};

/// m0 = (I - eps H)/sqrt(2), m1 = sqrt(I - m0^+ m0).
inline KrausPair build_kraus_pair(const HamiltonianTerm& term,
                                  double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error("build_kraus_pair: epsilon must be positive");
  }
  const double lowest_m0 =
      (1.0 - epsilon * term.spectral_max()) / std::numbers::sqrt2;
  if (!(lowest_m0 > 0.0)) {
    throw PositivityError(
        "positivity violated for term '" + term.label() +
            "': M0 eigenvalue (1 - eps*" +
            detail::format_double(term.spectral_max()) + ")/sqrt(2) = " +
            detail::format_double(lowest_m0),
        lowest_m0);
  }
  const Eigen::Index dim = term.op().matrix().rows();
  const Matrix identity = Matrix::Identity(dim, dim);
  Operator m0((identity - epsilon * term.op().matrix()) / std::numbers::sqrt2);
  Operator m1 = hermitian_sqrt(
      Operator(identity - m0.matrix().adjoint() * m0.matrix()));
  return {std::move(m0), std::move(m1), epsilon, term};
}

struct OutcomeRecord {
  int outcome = 0;
  double probability = 0.0;
  StateVector post_state;
};

namespace detail {

inline void check_probability(double p0) {
  if (!(p0 >= -kNormTolerance && p0 <= 1.0 + kNormTolerance)) {
    throw Error("outcome probability " + format_double(p0) +
                " outside [0, 1]: broken measurement pair");
  }
}

// Born-rule draw on a raw amplitude vector; one uniform consumed.
// Returns the outcome and leaves the normalized post-state in `psi`.
inline int measure_in_place(const Matrix& m0, const Matrix& m1, Vector& psi,
                            RandomSource& rng, double* probability = nullptr) {
  Vector branch = m0 * psi;
  const double p0 = branch.squaredNorm();
  check_probability(p0);
  const double u = rng.uniform();
  int outcome = 0;
  double p = p0;
  if (u >= p0) {
    outcome = 1;
    branch = m1 * psi;
    p = branch.squaredNorm();
  }
  if (!(p > 0.0)) throw Error("measurement drew a zero-probability outcome");
  psi = branch / std::sqrt(p);
  if (probability != nullptr) *probability = p;
  return outcome;
}

}  // namespace detail

/// Draws an outcome by the Born rule, consuming exactly one uniform from
/// `rng`: outcome 0 iff u < p0.
inline OutcomeRecord sample(const KrausPair& pair, const StateVector& psi,
                            RandomSource& rng) {
  if (psi.dimension() != pair.m0.dimension()) {
    throw DimensionError("sample: state and pair dimensions differ");
  }
  Vector v = psi.amplitudes();
  double p = 0.0;
  const int outcome =
      detail::measure_in_place(pair.m0.matrix(), pair.m1.matrix(), v, rng, &p);
  return {outcome, p, StateVector(std::move(v))};
}

/// System operators induced by coupling to a two-level pointer.
///
/// The pointer starts in |P+> = (|P0> + |P1>)/sqrt(2); system and pointer
/// evolve under exp(-i eps H (x) Y_P) and the pointer is read out in
/// {|P0>, |P1>}. The resulting operators are cos(pi/4 + eps H) and
/// sin(pi/4 + eps H), computed here from the joint unitary itself.
struct PointerMeasurement {
  Operator m0;
  Operator m1;
};

inline PointerMeasurement pointer_operators(const Operator& h,
                                            double epsilon) {
  require_hermitian(h, "pointer_operators");
  Matrix y(2, 2);
  y << 0.0, Complex(0, -1), Complex(0, 1), 0.0;
  const Operator coupling = kron(h, Operator(y));
  const Matrix joint = unitary_exp(coupling, epsilon).matrix();
  // (I (x) <P_b|) U (I (x) |P+>): the pointer is the fastest index.
  const Eigen::Index dim = h.matrix().rows();
  Matrix a0(dim, dim);
  Matrix a1(dim, dim);
  const double r = 1.0 / std::numbers::sqrt2;
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      a0(i, j) = r * (joint(2 * i, 2 * j) + joint(2 * i, 2 * j + 1));
      a1(i, j) = r * (joint(2 * i + 1, 2 * j) + joint(2 * i + 1, 2 * j + 1));
    }
  }
  return {Operator(std::move(a0)), Operator(std::move(a1))};
}

/// Same contract as sample(), realized through the pointer coupling with the
/// term's shifted operator.
inline OutcomeRecord pointer_sample(const HamiltonianTerm& term,
                                    double epsilon, const StateVector& psi,
                                    RandomSource& rng) {
  if (psi.dimension() != term.op().dimension()) {
    throw DimensionError("pointer_sample: state and term dimensions differ");
  }
  const PointerMeasurement ops = pointer_operators(term.op(), epsilon);
  Vector v = psi.amplitudes();
  double p = 0.0;
  const int outcome =
      detail::measure_in_place(ops.m0.matrix(), ops.m1.matrix(), v, rng, &p);
  return {outcome, p, StateVector(std::move(v))};
}

}  // namespace mbite
