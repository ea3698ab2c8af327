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

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mbite/linalg.hpp"
#include "mbite/measurement.hpp"
#include "mbite/random.hpp"
#include "mbite/trotter.hpp"

namespace mbite {

class DegenerateFixedPointError : public Error {
 public:
  DegenerateFixedPointError(const std::string& what, double gap_ratio)
      : Error(what), gap_ratio_(gap_ratio) {}
  /// |lambda_1| / |lambda_2| of the offending operator.
  double gap_ratio() const noexcept { return gap_ratio_; }

 private:
  double gap_ratio_;
};

/// Minimum accepted |lambda_1| / |lambda_2| for a fixed point.
inline constexpr double kMinGapRatio = 1.0 + 1e-6;

struct DominantEigenpair {
  Complex eigenvalue;
  StateVector state;
  double gap_ratio = 0.0;
};

inline DominantEigenpair dominant_eigenpair(const Operator& m) {
  Eigen::ComplexEigenSolver<Matrix> solver(m.matrix());
  if (solver.info() != Eigen::Success) {
    throw Error("fixed_point: eigendecomposition failed");
  }
  const auto& values = solver.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    order[static_cast<std::size_t>(i)] = i;
  }
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(values[a]) > std::abs(values[b]);
  });
  const double top = std::abs(values[order[0]]);
  const double second = order.size() > 1 ? std::abs(values[order[1]]) : 0.0;
  const double ratio = second > 0.0 ? top / second
                                    : std::numeric_limits<double>::infinity();
  if (!(ratio >= kMinGapRatio)) {
    throw DegenerateFixedPointError(
        "degenerate fixed point: |lambda1|/|lambda2| = " +
            detail::format_double(ratio) + " (|lambda1| = " +
            detail::format_double(top) + ", |lambda2| = " +
            detail::format_double(second) + ")",
        ratio);
  }
  return {values[order[0]],
          StateVector(fix_global_phase(solver.eigenvectors().col(order[0]))),
          ratio};
}

/// Dominant right eigenvector of M, phase-gauged.
inline StateVector fixed_point(const Operator& m) {
  return dominant_eigenpair(m).state;
}

/// Minimal rotation carrying M|T>/||M|T>|| onto |T> inside
/// span{|T>, M|T>}; identity on the orthogonal complement.
inline Operator correction_span_rotation(const Operator& m,
                                         const StateVector& target) {
  if (m.dimension() != target.dimension()) {
    throw DimensionError("correction_span_rotation: dimension mismatch");
  }
  const Vector& t = target.amplitudes();
  Vector image = m.matrix() * t;
  const double norm = image.norm();
  if (!(norm > kNormTolerance)) {
    throw Error("correction_span_rotation: M annihilates the target");
  }
  image /= norm;
  const Complex overlap = t.dot(image);
  if (std::abs(overlap) > 0.0) image *= std::conj(overlap) / std::abs(overlap);
  const double c = std::clamp(t.dot(image).real(), -1.0, 1.0);
  Vector w = image - c * t;
  const double s = w.norm();
  const Eigen::Index dim = t.size();
  Matrix u = Matrix::Identity(dim, dim);
  if (s < 1e-14) return Operator(std::move(u));
  w /= s;
  u += (c - 1.0) * (t * t.adjoint() + w * w.adjoint()) +
       s * (t * w.adjoint() - w * t.adjoint());
  return Operator(std::move(u));
}

/// Bloch-sphere angle of a single-qubit rotation exp(i theta Y / 2), read
/// after removing the global phase through det(U).
inline double bloch_angle(const Operator& u) {
  if (u.dimension() != 2) throw DimensionError("bloch_angle needs one qubit");
  const Complex phase = std::sqrt(u.matrix().determinant());
  const Matrix r = u.matrix() / phase;
  return 2.0 * std::atan2(r(0, 1).real(), r(0, 0).real());
}

/// 1 - |<T| U M |T>|^2 / ||M|T>||^2.
inline double stabilization_residual(const Operator& u, const Operator& m,
                                     const StateVector& target) {
  const Vector image = u.matrix() * (m.matrix() * target.amplitudes());
  const double norm2 = image.squaredNorm();
  if (!(norm2 > 0.0)) return 1.0;
  return std::max(0.0, 1.0 - std::norm(target.amplitudes().dot(image)) / norm2);
}

/// Lower bound on the per-step contraction of the mean infidelity that no
/// choice of corrections can beat: the largest eigenvalue of
/// R = sum_k M_k^+ |m_k><m_k| M_k (m_k = normalized M_k|T>) restricted to
/// the orthogonal complement of |T>.
inline double contraction_rate_bound(const std::vector<Operator>& sequence,
                                     const StateVector& target) {
  const Vector& t = target.amplitudes();
  const Eigen::Index dim = t.size();
  Matrix r = Matrix::Zero(dim, dim);
  for (const auto& m : sequence) {
    Vector mk = m.matrix() * t;
    mk.normalize();
    const Vector row = m.matrix().adjoint() * mk;
    r += row * row.adjoint();
  }
  const Matrix p = Matrix::Identity(dim, dim) - t * t.adjoint();
  const Matrix block = p * r * p;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (block + block.adjoint()));
  return solver.eigenvalues().maxCoeff();
}

namespace detail {

struct GslVectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct GslFdfDeleter {
  void operator()(gsl_multimin_fdfminimizer* s) const {
    gsl_multimin_fdfminimizer_free(s);
  }
};
struct GslFDeleter {
  void operator()(gsl_multimin_fminimizer* s) const {
    gsl_multimin_fminimizer_free(s);
  }
};
using GslVector = std::unique_ptr<gsl_vector, GslVectorDeleter>;

inline GslVector make_gsl_vector(const std::vector<double>& x) {
  GslVector v(gsl_vector_alloc(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) gsl_vector_set(v.get(), i, x[i]);
  return v;
}

inline std::vector<double> from_gsl(const gsl_vector* v) {
  std::vector<double> x(v->size);
  for (std::size_t i = 0; i < v->size; ++i) x[i] = gsl_vector_get(v, i);
  return x;
}

inline bool is_real(const Matrix& m) {
  return m.imag().cwiseAbs().maxCoeff() <= kNormTolerance;
}

// Real orthonormal basis of the complement of unit vector t (D x (D-1)).
inline Eigen::MatrixXd complement_basis(const Eigen::VectorXd& t) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(t);
  const Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(t.size() - 1);
}

}  // namespace detail

/// Tuning for the steered corrections.
struct SteeredOptions {
  /// Steps n of the averaged channel in the objective; 0 means ceil(20/eps).
  int horizon = 0;
  int restarts = 3;
  int max_iterations = 400;
  double initial_scale = 0.5;
  std::uint64_t seed = 1;
};

struct SteeredReport {
  /// 1 - <T|Phi^n(I/D)|T> at the optimum.
  double objective = 0.0;
  /// The same quantity for the plain span rotations.
  double span_objective = 0.0;
  int horizon = 0;
  int iterations = 0;
  int best_restart = 0;
};

/// Objective and gradient of the steered problem.
///
/// Outcome k applies K_k = (|T><T| + Q C_k Q^T) N_k with N_k = R_k M_k
/// (span rotation after measurement), Q an orthonormal basis of the
/// complement of |T>, and C_k = exp(A_k) for an antisymmetric A_k. Every
/// K_k maps |T> onto a multiple of |T>, whatever the parameters. The objective is log(1 - <T|Phi^n(I/D)|T>) for the
/// averaged channel Phi(rho) = sum_k K_k rho K_k^T, i.e. the log mean
/// infidelity after n steps over Haar-random initial states.
class SteeredObjective {
 public:
  SteeredObjective(std::vector<Eigen::MatrixXd> n_ops, Eigen::VectorXd target,
                   int horizon)
      : n_(std::move(n_ops)),
        t_(std::move(target)),
        q_(detail::complement_basis(t_)),
        horizon_(horizon) {
    const Eigen::Index c = q_.cols();
    per_outcome_ = static_cast<std::size_t>(c * (c - 1) / 2);
  }

  std::size_t num_parameters() const noexcept {
    return per_outcome_ * n_.size();
  }
  int horizon() const noexcept { return horizon_; }

  /// Correction unitaries (as real orthogonal matrices) for parameters x,
  /// including the span rotation folded into N_k.
  std::vector<Eigen::MatrixXd> steering(const std::vector<double>& x) const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(n_.size());
    for (std::size_t k = 0; k < n_.size(); ++k) {
      out.push_back(t_ * t_.transpose() +
                    q_ * generator(x, k).exp() * q_.transpose());
    }
    return out;
  }

  /// 1 - <T|Phi^n(I/D)|T>.
  double infidelity(const std::vector<double>& x) const {
    std::vector<Eigen::MatrixXd> kraus = channel(x);
    Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(t_.size(), t_.size()) /
                          static_cast<double>(t_.size());
    for (int s = 0; s < horizon_; ++s) rho = step(kraus, rho);
    return 1.0 - t_.dot(rho * t_);
  }

  /// log infidelity; fills `grad` when non-null.
  double evaluate(const std::vector<double>& x,
                  std::vector<double>* grad) const {
    const std::size_t nk = n_.size();
    const Eigen::Index dim = t_.size();
    std::vector<Eigen::MatrixXd> a(nk);
    std::vector<Eigen::MatrixXd> c(nk);
    std::vector<Eigen::MatrixXd> kraus(nk);
    for (std::size_t k = 0; k < nk; ++k) {
      a[k] = generator(x, k);
      c[k] = a[k].exp();
      kraus[k] = (t_ * t_.transpose() + q_ * c[k] * q_.transpose()) * n_[k];
    }
    std::vector<Eigen::MatrixXd> rhos;
    rhos.reserve(static_cast<std::size_t>(horizon_));
    Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(dim, dim) /
                          static_cast<double>(dim);
    for (int s = 0; s < horizon_; ++s) {
      if (grad != nullptr) rhos.push_back(rho);
      rho = step(kraus, rho);
    }
    const double j = std::max(1.0 - t_.dot(rho * t_), 1e-300);
    if (grad == nullptr) return std::log(j);

    // Adjoint pass: sigma_s = Phi*^{n-s}(|T><T|).
    std::vector<Eigen::MatrixXd> g(nk, Eigen::MatrixXd::Zero(dim, dim));
    Eigen::MatrixXd sigma = t_ * t_.transpose();
    for (int s = horizon_ - 1; s >= 0; --s) {
      const Eigen::MatrixXd& rs = rhos[static_cast<std::size_t>(s)];
      Eigen::MatrixXd next = Eigen::MatrixXd::Zero(dim, dim);
      for (std::size_t k = 0; k < nk; ++k) {
        const Eigen::MatrixXd sk = sigma * kraus[k];
        g[k].noalias() += sk * rs;
        next.noalias() += kraus[k].transpose() * sk;
      }
      sigma = std::move(next);
    }
    grad->assign(num_parameters(), 0.0);
    const Eigen::Index cdim = q_.cols();
    for (std::size_t k = 0; k < nk; ++k) {
      // dJ/dK = -2 g; chain through K = (TT^T + Q C Q^T) N, then through
      // exp: the adjoint of its Frechet derivative at A is the derivative at
      // A^T, read off the top-right block of exp([[A^T, G], [0, A^T]]).
      const Eigen::MatrixXd dk = -2.0 * g[k] / j;
      const Eigen::MatrixXd dc = q_.transpose() * dk * n_[k].transpose() * q_;
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * cdim, 2 * cdim);
      block.topLeftCorner(cdim, cdim) = a[k].transpose();
      block.bottomRightCorner(cdim, cdim) = a[k].transpose();
      block.topRightCorner(cdim, cdim) = dc;
      const Eigen::MatrixXd da =
          Eigen::MatrixXd(block.exp()).topRightCorner(cdim, cdim);
      std::size_t p = k * per_outcome_;
      for (Eigen::Index r = 0; r < cdim; ++r) {
        for (Eigen::Index col = r + 1; col < cdim; ++col) {
          (*grad)[p++] = da(r, col) - da(col, r);
        }
      }
    }
    return std::log(j);
  }

 private:
  Eigen::MatrixXd generator(const std::vector<double>& x,
                            std::size_t k) const {
    const Eigen::Index cdim = q_.cols();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(cdim, cdim);
    std::size_t p = k * per_outcome_;
    for (Eigen::Index r = 0; r < cdim; ++r) {
      for (Eigen::Index col = r + 1; col < cdim; ++col) {
        a(r, col) = x[p];
        a(col, r) = -x[p];
        ++p;
      }
    }
    return a;
  }

  std::vector<Eigen::MatrixXd> channel(const std::vector<double>& x) const {
    std::vector<Eigen::MatrixXd> u = steering(x);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = u[k] * n_[k];
    return u;
  }

  static Eigen::MatrixXd step(const std::vector<Eigen::MatrixXd>& kraus,
                              const Eigen::MatrixXd& rho) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rho.rows(), rho.cols());
    for (const auto& k : kraus) out.noalias() += k * rho * k.transpose();
    return out;
  }

  std::vector<Eigen::MatrixXd> n_;
  Eigen::VectorXd t_;
  Eigen::MatrixXd q_;
  int horizon_;
  std::size_t per_outcome_ = 0;
};

struct SteeredSolution {
  std::vector<Operator> corrections;
  std::vector<double> parameters;
  SteeredReport report;
};

/// Optimizes the steered corrections with GSL's BFGS from seeded random
/// starts. Requires real M_k and |T> (true for the stoquastic models here).
inline SteeredSolution solve_steered(const std::vector<Operator>& sequence,
                                     const StateVector& target,
                                     double epsilon,
                                     const SteeredOptions& options = {}) {
  if (!detail::is_real(target.amplitudes())) {
    throw Error("steered corrections need a real target state");
  }
  std::vector<Eigen::MatrixXd> n_ops;
  std::vector<Eigen::MatrixXd> spans;
  for (const auto& m : sequence) {
    if (!detail::is_real(m.matrix())) {
      throw Error("steered corrections need real sequence operators");
    }
    const Eigen::MatrixXd r =
        correction_span_rotation(m, target).matrix().real();
    spans.push_back(r);
    n_ops.push_back(r * m.matrix().real());
  }
  const int horizon = options.horizon > 0
                          ? options.horizon
                          : static_cast<int>(std::ceil(20.0 / epsilon));
  const SteeredObjective objective(std::move(n_ops),
                                   target.amplitudes().real(), horizon);
  const std::size_t np = objective.num_parameters();

  SteeredReport report;
  report.horizon = horizon;
  std::vector<double> best(np, 0.0);
  report.span_objective = objective.infidelity(best);
  double best_value = std::log(std::max(report.span_objective, 1e-300));

  if (np > 0) {
    gsl_set_error_handler_off();
    gsl_multimin_function_fdf fdf;
    fdf.n = np;
    fdf.params = const_cast<SteeredObjective*>(&objective);
    fdf.f = [](const gsl_vector* v, void* p) {
      return static_cast<const SteeredObjective*>(p)->evaluate(
          detail::from_gsl(v), nullptr);
    };
    fdf.df = [](const gsl_vector* v, void* p, gsl_vector* g) {
      std::vector<double> grad;
      static_cast<const SteeredObjective*>(p)->evaluate(detail::from_gsl(v),
                                                        &grad);
      for (std::size_t i = 0; i < grad.size(); ++i) gsl_vector_set(g, i, grad[i]);
    };
    fdf.fdf = [](const gsl_vector* v, void* p, double* f, gsl_vector* g) {
      std::vector<double> grad;
      *f = static_cast<const SteeredObjective*>(p)->evaluate(
          detail::from_gsl(v), &grad);
      for (std::size_t i = 0; i < grad.size(); ++i) gsl_vector_set(g, i, grad[i]);
    };
    for (int restart = 0; restart < options.restarts; ++restart) {
      RandomSource rng = RandomSource::stream(options.seed,
                                              static_cast<std::uint64_t>(restart));
      std::vector<double> x0(np);
      for (double& v : x0) v = options.initial_scale * rng.normal();
      detail::GslVector start = detail::make_gsl_vector(x0);
      std::unique_ptr<gsl_multimin_fdfminimizer, detail::GslFdfDeleter> s(
          gsl_multimin_fdfminimizer_alloc(
              gsl_multimin_fdfminimizer_vector_bfgs2, np));
      gsl_multimin_fdfminimizer_set(s.get(), &fdf, start.get(), 0.05, 0.1);
      int iter = 0;
      while (iter < options.max_iterations) {
        ++iter;
        if (gsl_multimin_fdfminimizer_iterate(s.get()) != GSL_SUCCESS) break;
        if (gsl_multimin_test_gradient(s->gradient, 1e-7) == GSL_SUCCESS) break;
      }
      report.iterations += iter;
      if (std::isfinite(s->f) && s->f < best_value) {
        best_value = s->f;
        best = detail::from_gsl(s->x);
        report.best_restart = restart;
      }
    }
  }
  report.objective = objective.infidelity(best);

  SteeredSolution out;
  const std::vector<Eigen::MatrixXd> steer = objective.steering(best);
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    out.corrections.emplace_back(Matrix((steer[k] * spans[k]).cast<Complex>()));
  }
  out.parameters = std::move(best);
  out.report = report;
  return out;
}

/// U = e^{i sum theta_n Y_n} e^{i sum chi_n Z_n Y_{n+1}} e^{i sum xi_n Y_n}.
struct TfimAnsatz {
  std::vector<double> theta;
  std::vector<double> chi;
  std::vector<double> xi;

  static std::size_t size(int num_qubits) {
    return static_cast<std::size_t>(3 * num_qubits - 1);
  }

  static TfimAnsatz unpack(const std::vector<double>& x, int num_qubits) {
    const auto l = static_cast<std::size_t>(num_qubits);
    TfimAnsatz a;
    a.theta.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(l));
    a.chi.assign(x.begin() + static_cast<std::ptrdiff_t>(l),
                 x.begin() + static_cast<std::ptrdiff_t>(2 * l - 1));
    a.xi.assign(x.begin() + static_cast<std::ptrdiff_t>(2 * l - 1), x.end());
    return a;
  }

  Operator unitary(int num_qubits) const {
    std::vector<PauliString> outer;
    std::vector<PauliString> middle;
    std::vector<PauliString> inner;
    for (int n = 0; n < num_qubits; ++n) {
      const auto i = static_cast<std::size_t>(n);
      outer.push_back({theta[i], {{n, Pauli::Y}}});
      inner.push_back({xi[i], {{n, Pauli::Y}}});
      if (n + 1 < num_qubits) {
        middle.push_back({chi[i], {{n, Pauli::Z}, {n + 1, Pauli::Y}}});
      }
    }
    // e^{iG} = unitary_exp(G, -1).
    Operator u = unitary_exp(materialize(outer, num_qubits), -1.0);
    if (!middle.empty()) {
      u = u * unitary_exp(materialize(middle, num_qubits), -1.0);
    }
    return u * unitary_exp(materialize(inner, num_qubits), -1.0);
  }
};

struct AnsatzSolution {
  Operator unitary;
  TfimAnsatz parameters;
  double residual = 1.0;
};

/// Fits the TFIM ansatz to the stabilization condition for one M_k with
/// Nelder-Mead restarts. Stops at residual <= 1e-6 or reports the best seen.
inline AnsatzSolution solve_tfim_ansatz(const Operator& m,
                                        const StateVector& target,
                                        int num_qubits, int restarts = 8,
                                        std::uint64_t seed = 7) {
  if (num_qubits < 1 || m.num_qubits() != num_qubits ||
      target.num_qubits() != num_qubits) {
    throw DimensionError("solve_tfim_ansatz: dimension mismatch");
  }
  struct Problem {
    const Operator* m;
    const StateVector* target;
    int l;
  } problem{&m, &target, num_qubits};
  gsl_set_error_handler_off();
  gsl_multimin_function f;
  f.n = TfimAnsatz::size(num_qubits);
  f.params = &problem;
  f.f = [](const gsl_vector* v, void* p) {
    const auto* pr = static_cast<const Problem*>(p);
    const TfimAnsatz a = TfimAnsatz::unpack(detail::from_gsl(v), pr->l);
    return stabilization_residual(a.unitary(pr->l), *pr->m, *pr->target);
  };

  std::vector<double> best(f.n, 0.0);
  double best_value = f.f(detail::make_gsl_vector(best).get(), &problem);
  RandomSource rng(seed);
  for (int r = 0; r < restarts && best_value > 1e-6; ++r) {
    std::vector<double> x0(f.n, 0.0);
    if (r > 0) {
      for (double& v : x0) v = 0.5 * rng.normal();
    }
    detail::GslVector start = detail::make_gsl_vector(x0);
    detail::GslVector step = detail::make_gsl_vector(std::vector<double>(f.n, 0.2));
    std::unique_ptr<gsl_multimin_fminimizer, detail::GslFDeleter> s(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, f.n));
    gsl_multimin_fminimizer_set(s.get(), &f, start.get(), step.get());
    for (int iter = 0; iter < 20000; ++iter) {
      if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
      if (s->fval < 1e-13) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), 1e-12) ==
          GSL_SUCCESS) {
        break;
      }
    }
    if (s->fval < best_value) {
      best_value = s->fval;
      best = detail::from_gsl(s->x);
    }
  }
  TfimAnsatz a = TfimAnsatz::unpack(best, num_qubits);
  Operator u = a.unitary(num_qubits);
  const double residual = stabilization_residual(u, m, target);
  return {std::move(u), std::move(a), residual};
}

/// How build_table fills in U_k.
enum class CorrectionStrategy { span, steered, ansatz, custom };

inline const char* to_string(CorrectionStrategy s) {
  switch (s) {
    case CorrectionStrategy::span: return "span";
    case CorrectionStrategy::steered: return "steered";
    case CorrectionStrategy::ansatz: return "ansatz";
    case CorrectionStrategy::custom: return "custom";
  }
  return "unknown";
}

/// |T> = V |E_0^(k)> for the fixed point of outcome `outcome`.
struct TargetSpec {
  OutcomeBitstring outcome;
  Operator v;
  std::string description;
};

/// A correction produced by a model-specific solver.
struct CustomCorrection {
  Operator unitary;
  std::optional<double> angle;
};

using CorrectionSolver = std::function<CustomCorrection(
    const Operator& m, const StateVector& target, const OutcomeBitstring& k)>;

struct TableOptions {
  CorrectionStrategy strategy = CorrectionStrategy::span;
  SteeredOptions steered;
  CorrectionSolver solver;
  /// Throw when a residual exceeds the threshold.
  bool strict = true;
  double residual_threshold = 1e-8;
};

struct CorrectionEntry {
  OutcomeBitstring k;
  Operator sequence;
  Operator unitary;
  double residual = 0.0;
  /// Bloch angle, when the correction is a single rotation.
  std::optional<double> angle;
};

struct CorrectionTable {
  double epsilon = 0.0;
  CorrectionStrategy strategy = CorrectionStrategy::span;
  StateVector fixed_point;
  StateVector target;
  Operator v;
  std::string target_description;
  std::vector<CorrectionEntry> entries;
  std::optional<SteeredReport> steered;

  const CorrectionEntry& operator[](std::size_t k) const {
    return entries.at(k);
  }
  std::size_t size() const noexcept { return entries.size(); }

  double max_residual() const {
    double r = 0.0;
    for (const auto& e : entries) r = std::max(r, e.residual);
    return r;
  }

  std::vector<Operator> sequence_operators() const {
    std::vector<Operator> out;
    for (const auto& e : entries) out.push_back(e.sequence);
    return out;
  }
};

/// Enumerates every outcome k, builds M_k, and solves for U_k.
inline CorrectionTable build_table(const ModelHamiltonian& model,
                                   double epsilon, const TargetSpec& spec,
                                   const TableOptions& options = {}) {
  model.validate();
  for (const auto& t : model.terms) validate_epsilon(t, epsilon);
  if (!spec.v.is_unitary()) throw Error("target V is not unitary");
  const std::vector<KrausPair> pairs = build_kraus_pairs(model, epsilon);
  const std::size_t n = model.num_terms();

  std::vector<Operator> sequence;
  for (std::size_t k = 0; k < model.num_outcomes(); ++k) {
    sequence.push_back(
        sequence_operator(pairs, OutcomeBitstring::from_index(k, n)));
  }
  detail::check_outcome_length(model, spec.outcome);
  StateVector e0 = fixed_point(sequence[spec.outcome.index()]);
  StateVector target = spec.v.apply(e0).with_fixed_phase();

  CorrectionTable table{epsilon, options.strategy, e0, target, spec.v,
                        spec.description, {}, std::nullopt};
  std::vector<Operator> unitaries;
  std::vector<std::optional<double>> angles(sequence.size());
  switch (options.strategy) {
    case CorrectionStrategy::span:
      for (const auto& m : sequence) {
        unitaries.push_back(correction_span_rotation(m, target));
      }
      break;
    case CorrectionStrategy::steered: {
      SteeredSolution sol =
          solve_steered(sequence, target, epsilon, options.steered);
      unitaries = std::move(sol.corrections);
      table.steered = sol.report;
      break;
    }
    case CorrectionStrategy::ansatz:
      for (const auto& m : sequence) {
        unitaries.push_back(
            solve_tfim_ansatz(m, target, model.num_qubits).unitary);
      }
      break;
    case CorrectionStrategy::custom:
      if (!options.solver) throw Error("custom strategy needs a solver");
      for (std::size_t k = 0; k < sequence.size(); ++k) {
        CustomCorrection c = options.solver(
            sequence[k], target, OutcomeBitstring::from_index(k, n));
        unitaries.push_back(std::move(c.unitary));
        angles[k] = c.angle;
      }
      break;
  }

  for (std::size_t k = 0; k < sequence.size(); ++k) {
    CorrectionEntry e{OutcomeBitstring::from_index(k, n), sequence[k],
                      unitaries[k], 0.0, angles[k]};
    if (!e.unitary.is_unitary()) {
      throw Error("correction for k=" + e.k.str() + " is not unitary");
    }
    e.residual = stabilization_residual(e.unitary, e.sequence, target);
    if (!e.angle && model.num_qubits == 1) e.angle = bloch_angle(e.unitary);
    if (options.strict && e.residual > options.residual_threshold) {
      throw Error("correction for k=" + e.k.str() + " has residual " +
                  detail::format_double(e.residual));
    }
    table.entries.push_back(std::move(e));
  }
  return table;
}

/// Writes one record per outcome:
///
///   k <bitstring> residual <r> dim <D>
///   D lines of D space-separated "re,im" pairs (row-major U_k)
inline void export_table(std::ostream& out, const CorrectionTable& table) {
  out << "# correction table: strategy " << to_string(table.strategy)
      << " epsilon " << detail::format_double(table.epsilon) << "\n";
  for (const auto& e : table.entries) {
    const Matrix& u = e.unitary.matrix();
    out << "k " << e.k.str() << " residual " << detail::format_exact(e.residual)
        << " dim " << u.rows() << "\n";
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      for (Eigen::Index c = 0; c < u.cols(); ++c) {
        if (c > 0) out << ' ';
        out << detail::format_exact(u(r, c).real()) << ','
            << detail::format_exact(u(r, c).imag());
      }
      out << '\n';
    }
  }
}

struct ExportedCorrection {
  OutcomeBitstring k;
  double residual = 0.0;
  Matrix unitary;
};

/// Reads the format written by export_table.
inline std::vector<ExportedCorrection> import_table(std::istream& in) {
  std::vector<ExportedCorrection> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream header(line);
    std::string tag_k, bits, tag_r, tag_d;
    double residual = 0.0;
    Eigen::Index dim = 0;
    if (!(header >> tag_k >> bits >> tag_r >> residual >> tag_d >> dim) ||
        tag_k != "k" || tag_r != "residual" || tag_d != "dim" || dim < 1) {
      throw Error("malformed table record: " + line);
    }
    Matrix u(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
      if (!std::getline(in, line)) throw Error("truncated table record");
      std::istringstream row(line);
      for (Eigen::Index c = 0; c < dim; ++c) {
        std::string pair;
        if (!(row >> pair)) throw Error("short matrix row");
        const auto comma = pair.find(',');
        if (comma == std::string::npos) throw Error("bad entry " + pair);
        u(r, c) = Complex(std::stod(pair.substr(0, comma)),
                          std::stod(pair.substr(comma + 1)));
      }
    }
    out.push_back({OutcomeBitstring::parse(bits), residual, std::move(u)});
  }
  return out;
}

}  // namespace mbite
