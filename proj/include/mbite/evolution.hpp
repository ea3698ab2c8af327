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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mbite/linalg.hpp"
#include "mbite/measurement.hpp"
#include "mbite/random.hpp"
#include "mbite/stabilizer.hpp"
#include "mbite/trotter.hpp"

namespace mbite {

enum class Backend { kraus, pointer };

inline const char* to_string(Backend b) {
  return b == Backend::kraus ? "kraus" : "pointer";
}

struct NamedObservable {
  std::string name;
  Operator op;
};

struct TrajectoryOptions {
  bool correction = true;
  Backend backend = Backend::kraus;
  /// Expectation values recorded at every step.
  std::vector<NamedObservable> observables;
  /// End the trajectory once the fidelity reaches this value.
  std::optional<double> stop_fidelity;
};

/// One run of the protocol. Index 0 of each trace is the initial state;
/// index s is the state after step s. The traces are shorter than the
/// requested step count only when TrajectoryOptions::stop_fidelity fired.
struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::size_t num_terms = 0;
  /// Outcome k of each step as an integer (k_1 most significant).
  std::vector<std::uint32_t> outcomes;
  /// Fidelity to |T> before the final V^+.
  std::vector<double> fidelity;
  std::vector<std::vector<double>> observables;
  StateVector final_state;

  OutcomeBitstring outcome(std::size_t step) const {
    return OutcomeBitstring::from_index(outcomes.at(step), num_terms);
  }
  std::size_t steps() const noexcept { return outcomes.size(); }
};

/// Prepared protocol: measurement operators, corrections and target.
/// Immutable; safe to share across threads.
class Evolver {
 public:
  Evolver(const ModelHamiltonian& model, CorrectionTable table,
          TrajectoryOptions options = {})
      : table_(std::move(table)), options_(std::move(options)) {
    model.validate();
    num_terms_ = model.num_terms();
    for (const auto& term : model.terms) {
      if (options_.backend == Backend::kraus) {
        const KrausPair p = build_kraus_pair(term, table_.epsilon);
        m0_.push_back(p.m0.matrix());
        m1_.push_back(p.m1.matrix());
      } else {
        const PointerMeasurement p = pointer_operators(term.op(), table_.epsilon);
        m0_.push_back(p.m0.matrix());
        m1_.push_back(p.m1.matrix());
      }
    }
    for (const auto& e : table_.entries) corrections_.push_back(e.unitary.matrix());
    for (const auto& o : options_.observables) {
      require_hermitian(o.op, "observable");
      if (o.op.dimension() != table_.target.dimension()) {
        throw DimensionError("observable '" + o.name + "' has wrong dimension");
      }
    }
  }

  const CorrectionTable& table() const noexcept { return table_; }
  const TrajectoryOptions& options() const noexcept { return options_; }

  TrajectoryRecord run(const StateVector& psi0, int steps,
                       RandomSource& rng) const {
    if (steps < 1) throw Error("trajectory needs at least one step");
    if (psi0.dimension() != table_.target.dimension()) {
      throw DimensionError("initial state has wrong dimension");
    }
    const Vector& target = table_.target.amplitudes();
    TrajectoryRecord rec{rng.seed(), num_terms_, {}, {}, {}, psi0};
    const auto n = static_cast<std::size_t>(steps);
    rec.outcomes.reserve(n);
    rec.fidelity.reserve(n + 1);
    rec.observables.assign(options_.observables.size(), {});
    Vector psi = psi0.amplitudes();
    record(psi, target, rec);
    for (std::size_t s = 0; s < n; ++s) {
      std::uint32_t k = 0;
      for (std::size_t j = 0; j < num_terms_; ++j) {
        const int bit = detail::measure_in_place(m0_[j], m1_[j], psi, rng);
        k = (k << 1) | static_cast<std::uint32_t>(bit);
      }
      if (options_.correction) {
        psi = corrections_[k] * psi;
        psi.normalize();
      }
      if (!psi.allFinite()) {
        throw Error("non-finite amplitude at step " + std::to_string(s + 1));
      }
      rec.outcomes.push_back(k);
      record(psi, target, rec);
      if (options_.stop_fidelity && rec.fidelity.back() >= *options_.stop_fidelity) {
        break;
      }
    }
    rec.final_state = StateVector(table_.v.matrix().adjoint() * psi);
    return rec;
  }

 private:
  void record(const Vector& psi, const Vector& target,
              TrajectoryRecord& rec) const {
    rec.fidelity.push_back(std::min(1.0, std::norm(target.dot(psi))));
    for (std::size_t i = 0; i < options_.observables.size(); ++i) {
      rec.observables[i].push_back(
          psi.dot(options_.observables[i].op.matrix() * psi).real());
    }
  }

  CorrectionTable table_;
  TrajectoryOptions options_;
  std::size_t num_terms_ = 0;
  std::vector<Matrix> m0_;
  std::vector<Matrix> m1_;
  std::vector<Matrix> corrections_;
};

inline TrajectoryRecord run_trajectory(const ModelHamiltonian& model,
                                       const CorrectionTable& table,
                                       const StateVector& psi0, int steps,
                                       std::uint64_t seed,
                                       const TrajectoryOptions& options = {}) {
  RandomSource rng(seed);
  return Evolver(model, table, options).run(psi0, steps, rng);
}

class InsufficientPointsError : public Error {
 public:
  using Error::Error;
};

struct LogInfidelityFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least-squares line through (step, ln(1 - F)) for the steps whose mean
/// fidelity lies in [lo, hi] (and below 1 - 1e-12).
inline LogInfidelityFit fit_log_infidelity(const std::vector<double>& mean,
                                           double lo = 0.2, double hi = 0.99) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t s = 0; s < mean.size(); ++s) {
    const double f = mean[s];
    if (f >= lo && f <= hi && f < 1.0 - kNormTolerance) {
      xs.push_back(static_cast<double>(s));
      ys.push_back(std::log(1.0 - f));
    }
  }
  if (xs.size() < 10) {
    throw InsufficientPointsError(
        "insufficient points in fit window: " + std::to_string(xs.size()) +
        " < 10");
  }
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LogInfidelityFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points = xs.size();
  return fit;
}

/// First step s >= 1 with fidelity >= threshold.
inline std::optional<int> first_passage(const std::vector<double>& fidelity,
                                        double threshold = 0.9) {
  for (std::size_t s = 1; s < fidelity.size(); ++s) {
    if (fidelity[s] >= threshold) return static_cast<int>(s);
  }
  return std::nullopt;
}

struct EnsembleSummary {
  std::size_t num_trajectories = 0;
  std::vector<double> mean_fidelity;
  /// NaN when the fit window holds too few points.
  double log_infidelity_slope = std::numeric_limits<double>::quiet_NaN();
  double log_infidelity_intercept = std::numeric_limits<double>::quiet_NaN();
  double slope_r2 = std::numeric_limits<double>::quiet_NaN();
  std::string fit_error;
};

struct EnsembleResult {
  EnsembleSummary summary;
  std::vector<TrajectoryRecord> trajectories;
};

struct EnsembleOptions {
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
  bool keep_trajectories = true;
  double fit_lo = 0.2;
  double fit_hi = 0.99;
};

/// Supplies the initial state of trajectory i; may draw from that
/// trajectory's own stream before any measurement.
using InitialState =
    std::function<StateVector(std::size_t index, RandomSource& rng)>;

inline InitialState fixed_initial_state(StateVector psi0) {
  return [psi0 = std::move(psi0)](std::size_t, RandomSource&) { return psi0; };
}

inline InitialState random_initial_state(int num_qubits) {
  return [num_qubits](std::size_t, RandomSource& rng) {
    return random_state(num_qubits, rng);
  };
}

/// Trajectory i uses RandomSource::stream(base_seed, i). Results are written
/// to per-index slots and reduced in index order, so they do not depend on
/// the thread count.
inline EnsembleResult run_ensemble(const Evolver& evolver,
                                   const InitialState& initial, int steps,
                                   std::size_t num_trajectories,
                                   std::uint64_t base_seed,
                                   const EnsembleOptions& options = {}) {
  if (num_trajectories < 1) throw Error("ensemble needs a trajectory");
  if (steps < 1) throw Error("trajectory needs at least one step");
  std::vector<std::optional<TrajectoryRecord>> slots(num_trajectories);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= num_trajectories) return;
      try {
        RandomSource rng = RandomSource::stream(base_seed, i);
        const StateVector psi0 = initial(i, rng);
        slots[i] = evolver.run(psi0, steps, rng);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(num_trajectories);
        return;
      }
    }
  };
  unsigned threads = options.threads != 0
                         ? options.threads
                         : std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, num_trajectories));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleResult out;
  EnsembleSummary& sum = out.summary;
  sum.num_trajectories = num_trajectories;
  sum.mean_fidelity.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  // A stopped trajectory holds its last fidelity for the remaining steps.
  for (const auto& rec : slots) {
    for (std::size_t s = 0; s < sum.mean_fidelity.size(); ++s) {
      sum.mean_fidelity[s] +=
          rec->fidelity[std::min(s, rec->fidelity.size() - 1)];
    }
  }
  for (double& f : sum.mean_fidelity) f /= static_cast<double>(num_trajectories);
  try {
    const LogInfidelityFit fit =
        fit_log_infidelity(sum.mean_fidelity, options.fit_lo, options.fit_hi);
    sum.log_infidelity_slope = fit.slope;
    sum.log_infidelity_intercept = fit.intercept;
    sum.slope_r2 = fit.r2;
  } catch (const InsufficientPointsError& e) {
    sum.fit_error = e.what();
  }
  if (options.keep_trajectories) {
    out.trajectories.reserve(num_trajectories);
    for (auto& rec : slots) out.trajectories.push_back(std::move(*rec));
  }
  return out;
}

}  // namespace mbite
