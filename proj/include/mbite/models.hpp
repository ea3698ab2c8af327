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
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mbite/evolution.hpp"
#include "mbite/linalg.hpp"
#include "mbite/measurement.hpp"
#include "mbite/stabilizer.hpp"
#include "mbite/trotter.hpp"

namespace mbite {

/// A model with its target recipe, default initial state, the correction
/// strategy it is run with, and the observables worth recording.
struct ModelSetup {
  ModelHamiltonian model;
  TargetSpec target;
  StateVector initial;
  TableOptions table_options;
  std::vector<NamedObservable> observables;
};

inline CorrectionTable build_table(const ModelSetup& setup, double epsilon) {
  return build_table(setup.model, epsilon, setup.target, setup.table_options);
}

/// H = -Z + I on one qubit; |T> = e^{-i Y pi/4}|0> = |+>.
inline ModelSetup single_qubit_model() {
  ModelHamiltonian model{
      "single_qubit", 1,
      {HamiltonianTerm::from_strings("Z", {{-1.0, {{0, Pauli::Z}}}}, 1)}};
  const Operator y = materialize(PauliString{1.0, {{0, Pauli::Y}}}, 1);
  TargetSpec target{OutcomeBitstring::parse("0"),
                    unitary_exp(y, std::numbers::pi / 4), "e^{-iY pi/4}|E0>"};
  return {std::move(model), std::move(target), StateVector::product("-"),
          TableOptions{},
          {{"Z", materialize(PauliString{1.0, {{0, Pauli::Z}}}, 1)}}};
}

/// Open transverse-field Ising chain with H1 = -lambda sum (X_n - 1) and
/// H2 = -omega sum (Z_n Z_{n+1} - 1). Target e^{i Y_last pi/8}|E_0^(00)>.
inline ModelSetup tfim_model(int num_qubits, double lambda = 1.0,
                             double omega = 1.0) {
  if (num_qubits < 2) throw Error("tfim needs at least 2 qubits");
  if (!(lambda >= 0.0) || !(omega >= 0.0)) {
    throw Error("tfim couplings must be non-negative");
  }
  std::vector<PauliString> field;
  std::vector<PauliString> bonds;
  for (int n = 0; n < num_qubits; ++n) {
    field.push_back({-lambda, {{n, Pauli::X}}});
  }
  for (int n = 0; n + 1 < num_qubits; ++n) {
    bonds.push_back({-omega, {{n, Pauli::Z}, {n + 1, Pauli::Z}}});
  }
  ModelHamiltonian model{
      "tfim", num_qubits,
      {HamiltonianTerm::from_strings("field", std::move(field), num_qubits),
       HamiltonianTerm::from_strings("bonds", std::move(bonds), num_qubits)}};
  const Operator y_last =
      materialize(PauliString{1.0, {{num_qubits - 1, Pauli::Y}}}, num_qubits);
  TargetSpec target{OutcomeBitstring::parse("00"),
                    unitary_exp(y_last, -std::numbers::pi / 8),
                    "e^{iY_last pi/8}|E0^(00)>"};
  std::string labels(static_cast<std::size_t>(num_qubits), '+');
  labels.back() = '-';
  TableOptions options;
  options.strategy = CorrectionStrategy::steered;
  Operator energy = model.bare_sum();
  return {std::move(model), std::move(target), StateVector::product(labels),
          options, {{"energy", std::move(energy)}}};
}

/// Unstructured search over D = 2^L items with one marked index.
///
/// Only oracle() reads the solution; every correction is assembled from the
/// oracle and the public uniform state. solution_state() and perp_state()
/// exist for analysis and tests.
class SearchInstance {
 public:
  SearchInstance(int num_qubits, std::size_t solution)
      : num_qubits_(num_qubits), solution_(solution) {
    if (num_qubits < 1) throw Error("search needs at least one qubit");
    if (solution >= dimension()) {
      throw Error("solution index " + std::to_string(solution) +
                  " out of range for D = " + std::to_string(dimension()));
    }
  }

  int num_qubits() const noexcept { return num_qubits_; }
  std::size_t dimension() const noexcept {
    return std::size_t{1} << num_qubits_;
  }

  /// O = I - 2|S><S|.
  Operator oracle() const {
    const auto s = static_cast<Eigen::Index>(solution_);
    Matrix o = Matrix::Identity(static_cast<Eigen::Index>(dimension()),
                                static_cast<Eigen::Index>(dimension()));
    o(s, s) = -1.0;
    return Operator(std::move(o));
  }

  /// G = I - 2|+><+|.
  Operator diffusion() const {
    const StateVector plus = StateVector::uniform(num_qubits_);
    return Operator::identity(num_qubits_) -
           2.0 * Operator::outer(plus, plus);
  }

  /// H_O = (O - I)/2 = -|S><S|.
  Operator oracle_hamiltonian() const {
    return 0.5 * (oracle() - Operator::identity(num_qubits_));
  }

  /// H_G = (G - I)/2 = -|+><+|.
  Operator diffusion_hamiltonian() const {
    return 0.5 * (diffusion() - Operator::identity(num_qubits_));
  }

  std::size_t solution_index() const noexcept { return solution_; }
  StateVector solution_state() const {
    return StateVector::basis(num_qubits_, solution_);
  }
  /// Equal superposition of the non-solution states.
  StateVector perp_state() const {
    Vector v = Vector::Constant(static_cast<Eigen::Index>(dimension()), 1.0);
    v[static_cast<Eigen::Index>(solution_)] = 0.0;
    return StateVector(std::move(v));
  }

 private:
  int num_qubits_;
  std::size_t solution_;
};

/// G O = (I - 2|+><+|)(I - 2|S><S|).
inline Operator grover_rotation(const SearchInstance& inst) {
  return inst.diffusion() * inst.oracle();
}

/// Bloch angle of one oracle-limited correction: 2 arcsin(1/sqrt(D)).
inline double search_angle_budget(std::size_t dimension) {
  return 2.0 * std::asin(1.0 / std::sqrt(static_cast<double>(dimension)));
}

/// e^{[H_O, H_G] phi}, exact. Within span{|S>, |perp>} this is e^{i theta Y/2}
/// with theta = 2 phi sqrt(D-1)/D.
inline Operator commutator_exponential(const SearchInstance& inst, double phi) {
  // [H_O, H_G] is anti-Hermitian; e^{C phi} = e^{-i (iC) phi}.
  const Operator c = commutator(inst.oracle_hamiltonian(),
                                inst.diffusion_hamiltonian());
  return unitary_exp(Complex(0.0, 1.0) * c, phi);
}

/// Commutator parameter phi giving a Bloch rotation theta.
inline double commutator_phi(std::size_t dimension, double theta) {
  const auto d = static_cast<double>(dimension);
  return theta * d / (2.0 * std::sqrt(d - 1.0));
}

/// (e^{-i H_O a} e^{-i H_G a} e^{i H_O a} e^{i H_G a})^n with a = sqrt(|phi|/n),
/// factors applied in the written order. Converges to e^{[H_O, H_G] phi};
/// phi < 0 exchanges the roles of H_O and H_G, which flips the commutator.
inline Operator commutator_rotation(const SearchInstance& inst, double phi,
                                    int n) {
  if (n < 1) throw Error("commutator_rotation needs n >= 1");
  Operator first = inst.oracle_hamiltonian();
  Operator second = inst.diffusion_hamiltonian();
  if (phi < 0.0) std::swap(first, second);
  const double a = std::sqrt(std::abs(phi) / n);
  const Operator step = unitary_exp(second, -a) * unitary_exp(first, -a) *
                        unitary_exp(second, a) * unitary_exp(first, a);
  Operator out = Operator::identity(inst.num_qubits());
  for (int i = 0; i < n; ++i) out = step * out;
  return out;
}

enum class SearchPrimitive {
  /// Exact generator exponential; angle limited by search_angle_budget.
  single_call,
  /// Group-commutator product with n factors; any angle, approximate.
  commutator,
};

/// Y rotation by theta_bloch in span{|S>, |perp>}, identity outside, built
/// from oracle-derived operators only.
inline Operator search_correction(const SearchInstance& inst,
                                  double theta_bloch,
                                  SearchPrimitive primitive =
                                      SearchPrimitive::single_call,
                                  int n = 256) {
  const double phi = commutator_phi(inst.dimension(), theta_bloch);
  if (primitive == SearchPrimitive::commutator) {
    return commutator_rotation(inst, phi, n);
  }
  const double budget = search_angle_budget(inst.dimension());
  if (std::abs(theta_bloch) > budget * (1.0 + 1e-12)) {
    throw Error("correction angle " + detail::format_double(theta_bloch) +
                " exceeds the single-call budget " +
                detail::format_double(budget) + " for D = " +
                std::to_string(inst.dimension()));
  }
  return commutator_exponential(inst, phi);
}

/// Correction angles (k = 0, 1) of the search model, from its reduction
/// to a qubit with M_0 = diag(1, 1 - eps)/sqrt(2) on (|S>, |perp>).
inline std::pair<double, double> search_angles(double epsilon) {
  const double q = std::numbers::pi / 4;
  const double a1 = std::sqrt(0.5);
  const double b1 = std::sqrt(1.0 - 0.5 * (1.0 - epsilon) * (1.0 - epsilon));
  return {2.0 * (std::atan(1.0 - epsilon) - q), 2.0 * (std::atan(b1 / a1) - q)};
}

/// Largest epsilon whose correction angles fit the single-call budget,
/// capped by the validity bound (the search term has spectral_max 1).
inline double search_limited_epsilon(std::size_t dimension) {
  const double budget = search_angle_budget(dimension);
  auto worst = [](double eps) {
    const auto [t0, t1] = search_angles(eps);
    return std::max(std::abs(t0), std::abs(t1));
  };
  double lo = 0.0;
  double hi = kEpsilonValidityBound;
  if (worst(hi) <= budget) return hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (worst(mid) <= budget ? lo : hi) = mid;
  }
  return lo;
}

/// H = -|S><S| (shifted by +I); |T> = (|S> + |perp>)/sqrt(2), reached from
/// the fixed point |S> by an oracle-built rotation; start state |+>.
inline ModelSetup search_model(const SearchInstance& inst,
                               SearchPrimitive primitive =
                                   SearchPrimitive::single_call,
                               int commutator_steps = 256) {
  const int l = inst.num_qubits();
  ModelHamiltonian model{
      "search", l,
      {HamiltonianTerm::from_operator("oracle", inst.oracle_hamiltonian())}};
  TargetSpec target{OutcomeBitstring::parse("0"),
                    commutator_exponential(
                        inst, commutator_phi(inst.dimension(),
                                             -std::numbers::pi / 2)),
                    "e^{[H_O,H_G] phi(-pi/2)}|E0>"};
  TableOptions options;
  options.strategy = CorrectionStrategy::custom;
  options.solver = [inst, primitive, commutator_steps](
                       const Operator& m, const StateVector& t,
                       const OutcomeBitstring&) {
    Vector image = m.matrix() * t.amplitudes();
    image.normalize();
    const double c = std::min(1.0, std::abs(t.amplitudes().dot(image)));
    const double magnitude = 2.0 * std::acos(c);
    CustomCorrection best{Operator::identity(inst.num_qubits()), 0.0};
    double best_residual = stabilization_residual(best.unitary, m, t);
    for (double sign : {1.0, -1.0}) {
      const double theta = sign * magnitude;
      Operator u = search_correction(inst, theta, primitive, commutator_steps);
      const double r = stabilization_residual(u, m, t);
      if (r < best_residual) {
        best_residual = r;
        best = {std::move(u), theta};
      }
    }
    return best;
  };
  if (primitive == SearchPrimitive::commutator) {
    options.residual_threshold = 1e-3;
  }
  const Operator projector =
      Operator::outer(inst.solution_state(), inst.solution_state());
  return {std::move(model), std::move(target), StateVector::uniform(l),
          std::move(options), {{"p_solution", projector}}};
}

}  // namespace mbite
