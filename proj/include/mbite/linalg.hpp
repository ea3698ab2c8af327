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

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/// Dense state vectors and operators over L qubits.
///
/// Conventions used throughout the library:
///  - qubit 0 is the leftmost tensor factor, so in a basis index the qubit q
///    is the bit of weight 2^(L-1-q);
///  - spectral operations go through Hermitian eigendecomposition;
///  - the global-phase gauge makes the largest-magnitude amplitude real
///    positive (first index wins ties within 1e-12).
namespace mbite {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kTolerance = 1e-10;
inline constexpr double kNormTolerance = 1e-12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when an operator that must be positive semidefinite is not.
class PositivityError : public Error {
 public:
  PositivityError(const std::string& what, double eigenvalue)
      : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

namespace detail {

inline int log2_exact(std::size_t dimension) {
  if (dimension < 2 || (dimension & (dimension - 1)) != 0) {
    throw DimensionError("dimension " + std::to_string(dimension) +
                         " is not a power of two >= 2");
  }
  int bits = 0;
  while ((std::size_t{1} << bits) < dimension) ++bits;
  return bits;
}

inline std::string format_double(double value) {
  std::ostringstream out;
  out.precision(6);
  out << value;
  return out.str();
}

// 17 significant digits: round-trips every double.
inline std::string format_exact(double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

// Index of the largest-magnitude entry; earliest index wins near-ties.
inline Eigen::Index gauge_index(const Vector& v) {
  double best = -1.0;
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]);
    if (mag > best + kNormTolerance) {
      best = mag;
      idx = i;
    }
  }
  return idx;
}

}  // namespace detail

/// Multiplies `v` by the global phase that makes its largest-magnitude
/// amplitude real and positive.
inline Vector fix_global_phase(Vector v) {
  const Complex pivot = v[detail::gauge_index(v)];
  if (std::abs(pivot) > 0.0) v *= std::conj(pivot) / std::abs(pivot);
  return v;
}

/// Normalized amplitude vector over 2^L basis states. Immutable.
class StateVector {
 public:
  /// Normalizes `amplitudes`; throws if the length is not 2^L or the norm
  /// vanishes.
  explicit StateVector(Vector amplitudes) : amps_(std::move(amplitudes)) {
    num_qubits_ = detail::log2_exact(static_cast<std::size_t>(amps_.size()));
    const double norm = amps_.norm();
    if (!(norm > kNormTolerance) || !std::isfinite(norm)) {
      throw Error("cannot normalize a state with norm " +
                  detail::format_double(norm));
    }
    amps_ /= norm;
  }

  static StateVector basis(int num_qubits, std::size_t index) {
    const std::size_t dim = std::size_t{1} << num_qubits;
    if (num_qubits < 1 || index >= dim) {
      throw DimensionError("basis index out of range");
    }
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim));
    v[static_cast<Eigen::Index>(index)] = 1.0;
    return StateVector(std::move(v));
  }

  /// Equal superposition sum_n |n> / sqrt(D).
  static StateVector uniform(int num_qubits) {
    if (num_qubits < 1) throw DimensionError("need at least one qubit");
    return StateVector(Vector::Ones(Eigen::Index{1} << num_qubits));
  }

  /// Product state from a string over {0,1,+,-}, qubit 0 first.
  static StateVector product(const std::string& labels) {
    if (labels.empty()) throw DimensionError("empty product-state label");
    Vector v = Vector::Ones(1);
    const double r = 1.0 / std::sqrt(2.0);
    for (char c : labels) {
      Eigen::Vector2cd single;
      switch (c) {
        case '0': single << 1.0, 0.0; break;
        case '1': single << 0.0, 1.0; break;
        case '+': single << r, r; break;
        case '-': single << r, -r; break;
        default:
          throw Error(std::string("unknown product-state label '") + c + "'");
      }
      Vector next(v.size() * 2);
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        next[2 * i] = v[i] * single[0];
        next[2 * i + 1] = v[i] * single[1];
      }
      v = std::move(next);
    }
    return StateVector(std::move(v));
  }

  int num_qubits() const noexcept { return num_qubits_; }
  std::size_t dimension() const noexcept {
    return static_cast<std::size_t>(amps_.size());
  }
  const Vector& amplitudes() const noexcept { return amps_; }
  Complex operator[](std::size_t i) const {
    return amps_[static_cast<Eigen::Index>(i)];
  }

  StateVector with_fixed_phase() const {
    return StateVector(fix_global_phase(amps_));
  }

 private:
  Vector amps_;
  int num_qubits_ = 0;
};

/// Dense 2^L x 2^L complex matrix.
class Operator {
 public:
  explicit Operator(Matrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols()) {
      throw DimensionError("operator must be square");
    }
    num_qubits_ = detail::log2_exact(static_cast<std::size_t>(m_.rows()));
  }

  static Operator identity(int num_qubits) {
    const Eigen::Index dim = Eigen::Index{1} << num_qubits;
    return Operator(Matrix::Identity(dim, dim));
  }

  static Operator zero(int num_qubits) {
    const Eigen::Index dim = Eigen::Index{1} << num_qubits;
    return Operator(Matrix::Zero(dim, dim));
  }

  /// |a><b|
  static Operator outer(const StateVector& a, const StateVector& b) {
    return Operator(a.amplitudes() * b.amplitudes().adjoint());
  }

  int num_qubits() const noexcept { return num_qubits_; }
  std::size_t dimension() const noexcept {
    return static_cast<std::size_t>(m_.rows());
  }
  const Matrix& matrix() const noexcept { return m_; }
  Complex operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

  Operator adjoint() const { return Operator(m_.adjoint()); }

  bool is_hermitian(double tol = kTolerance) const {
    return (m_ - m_.adjoint()).norm() <= tol;
  }

  bool is_unitary(double tol = kTolerance) const {
    const auto dim = m_.rows();
    return (m_.adjoint() * m_ - Matrix::Identity(dim, dim)).norm() <= tol;
  }

  /// Largest singular value.
  double spectral_norm() const {
    return Eigen::JacobiSVD<Matrix>(m_).singularValues()(0);
  }

  double frobenius_norm() const { return m_.norm(); }

  Vector apply(const Vector& v) const {
    check_length(v.size());
    return m_ * v;
  }

  /// Applies the operator and renormalizes.
  StateVector apply(const StateVector& s) const {
    return StateVector(apply(s.amplitudes()));
  }

  friend Operator operator*(const Operator& a, const Operator& b) {
    a.check_length(b.m_.rows());
    return Operator(a.m_ * b.m_);
  }
  friend Operator operator+(const Operator& a, const Operator& b) {
    a.check_length(b.m_.rows());
    return Operator(a.m_ + b.m_);
  }
  friend Operator operator-(const Operator& a, const Operator& b) {
    a.check_length(b.m_.rows());
    return Operator(a.m_ - b.m_);
  }
  friend Operator operator*(Complex s, const Operator& a) {
    return Operator(s * a.m_);
  }
  friend Operator operator*(double s, const Operator& a) {
    return Operator(s * a.m_);
  }

 private:
  void check_length(Eigen::Index n) const {
    if (n != m_.rows()) {
      throw DimensionError("dimension mismatch: operator is " +
                           std::to_string(m_.rows()) + ", argument is " +
                           std::to_string(n));
    }
  }

  Matrix m_;
  int num_qubits_ = 0;
};

enum class Pauli : std::uint8_t { X, Y, Z };

/// coefficient * prod_q P_q, identity on qubits absent from `factors`.
struct PauliString {
  double coefficient = 1.0;
  std::map<int, Pauli> factors;

  PauliString() = default;
  PauliString(double coeff, std::map<int, Pauli> f)
      : coefficient(coeff), factors(std::move(f)) {}
};

/// Returns coefficient * (tensor product of the string's factors).
/// Built row by row: a Pauli string has one nonzero per row, at column
/// row ^ xmask with a phase from the Y and Z factors.
inline Operator materialize(const PauliString& p, int num_qubits) {
  if (num_qubits < 1) throw DimensionError("need at least one qubit");
  std::uint64_t xmask = 0;
  std::uint64_t zmask = 0;
  int num_y = 0;
  for (const auto& [qubit, pauli] : p.factors) {
    if (qubit < 0 || qubit >= num_qubits) {
      throw DimensionError("Pauli factor on qubit " + std::to_string(qubit) +
                           " out of range for L=" + std::to_string(num_qubits));
    }
    const std::uint64_t bit = std::uint64_t{1} << (num_qubits - 1 - qubit);
    if (pauli != Pauli::Z) xmask |= bit;
    if (pauli != Pauli::X) zmask |= bit;
    if (pauli == Pauli::Y) ++num_y;
  }
  // Y = i X Z, so the string is i^{#Y} X^x Z^z.
  static constexpr Complex kIPowers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const Complex global = p.coefficient * kIPowers[num_y % 4];
  const std::uint64_t dim = std::uint64_t{1} << num_qubits;
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(dim),
                          static_cast<Eigen::Index>(dim));
  for (std::uint64_t col = 0; col < dim; ++col) {
    const std::uint64_t row = col ^ xmask;
    const bool negative = (std::popcount(col & zmask) & 1) != 0;
    m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
        negative ? -global : global;
  }
  return Operator(std::move(m));
}

inline Operator materialize(const std::vector<PauliString>& strings,
                            int num_qubits) {
  Operator total = Operator::zero(num_qubits);
  for (const auto& p : strings) total = total + materialize(p, num_qubits);
  return total;
}

inline void require_hermitian(const Operator& a, const char* what) {
  if (!a.is_hermitian()) {
    throw Error(std::string(what) + ": operator is not Hermitian");
  }
}

/// <s|A|s> for Hermitian A.
inline double expectation(const StateVector& s, const Operator& a) {
  if (s.dimension() != a.dimension()) {
    throw DimensionError("expectation: state and operator dimensions differ");
  }
  require_hermitian(a, "expectation");
  const Complex value = s.amplitudes().dot(a.matrix() * s.amplitudes());
  if (std::abs(value.imag()) >= kTolerance) {
    throw Error("expectation: imaginary part " +
                detail::format_double(value.imag()) + " exceeds tolerance");
  }
  return value.real();
}

/// |<a|b>|^2
inline double fidelity(const StateVector& a, const StateVector& b) {
  if (a.dimension() != b.dimension()) {
    throw DimensionError("fidelity: state dimensions differ");
  }
  return std::min(1.0, std::norm(a.amplitudes().dot(b.amplitudes())));
}

/// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
struct Spectrum {
  Eigen::VectorXd values;
  Matrix vectors;
};

inline Spectrum eigh(const Operator& a) {
  require_hermitian(a, "eigh");
  // Symmetrize so rounding in the input cannot leak into the solver.
  const Matrix h = 0.5 * (a.matrix() + a.matrix().adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  if (solver.info() != Eigen::Success) {
    throw Error("eigh: eigendecomposition failed");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

namespace detail {
template <typename F>
Operator spectral_map(const Spectrum& sp, F&& f) {
  const Eigen::Index n = sp.values.size();
  Eigen::VectorXcd mapped(n);
  for (Eigen::Index i = 0; i < n; ++i) mapped[i] = f(sp.values[i]);
  return Operator(sp.vectors * mapped.asDiagonal() * sp.vectors.adjoint());
}
}  // namespace detail

/// Hermitian B >= 0 with B*B = A. Eigenvalues in [-1e-12, 0) are clamped.
inline Operator hermitian_sqrt(const Operator& a) {
  const Spectrum sp = eigh(a);
  const double lowest = sp.values.minCoeff();
  if (lowest < -kNormTolerance) {
    throw PositivityError("hermitian_sqrt: eigenvalue " +
                              detail::format_double(lowest) +
                              " is negative; epsilon too large for the "
                              "term's spectral range",
                          lowest);
  }
  return detail::spectral_map(
      sp, [](double x) { return Complex(std::sqrt(std::max(x, 0.0)), 0.0); });
}

/// e^{-A t} for Hermitian A.
inline Operator matrix_exp_hermitian(const Operator& a, double t) {
  const Spectrum sp = eigh(a);
  return detail::spectral_map(
      sp, [t](double x) { return Complex(std::exp(-x * t), 0.0); });
}

/// e^{-i A t} for Hermitian A.
inline Operator unitary_exp(const Operator& a, double t) {
  const Spectrum sp = eigh(a);
  return detail::spectral_map(
      sp, [t](double x) { return std::exp(Complex(0.0, -x * t)); });
}

/// Lowest eigenpair of a Hermitian operator and the gap to the next level.
struct GroundState {
  double energy = 0.0;
  double gap = 0.0;
  StateVector state;
};

inline GroundState ground_state(const Operator& h) {
  const Spectrum sp = eigh(h);
  const double gap =
      sp.values.size() > 1 ? sp.values[1] - sp.values[0] : 0.0;
  return {sp.values[0], gap,
          StateVector(fix_global_phase(sp.vectors.col(0)))};
}

inline Operator kron(const Operator& a, const Operator& b) {
  const Matrix& x = a.matrix();
  const Matrix& y = b.matrix();
  Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
    }
  }
  return Operator(std::move(out));
}

inline Operator commutator(const Operator& a, const Operator& b) {
  return a * b - b * a;
}

}  // namespace mbite
