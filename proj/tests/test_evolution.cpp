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


#include <gtest/gtest.h>

#include <cmath>

#include "mbite/evolution.hpp"
#include "mbite/models.hpp"

namespace mbite {
namespace {

struct ExampleOne {
  ModelSetup setup = single_qubit_model();
  CorrectionTable table = build_table(setup, 0.1);
};

// Exact ensemble mean of <T|rho_s|T> from the averaged channel.
std::vector<double> channel_mean(const CorrectionTable& table,
                                 const StateVector& psi0, int steps) {
  Matrix rho = psi0.amplitudes() * psi0.amplitudes().adjoint();
  const Vector& t = table.target.amplitudes();
  std::vector<double> out{t.dot(rho * t).real()};
  for (int s = 0; s < steps; ++s) {
    Matrix next = Matrix::Zero(rho.rows(), rho.cols());
    for (const auto& e : table.entries) {
      const Matrix k = e.unitary.matrix() * e.sequence.matrix();
      next += k * rho * k.adjoint();
    }
    rho = next;
    out.push_back(t.dot(rho * t).real());
  }
  return out;
}

TEST(Trajectory, ExampleOneConvergesFromMinus) {
  const ExampleOne ex;
  const Evolver evolver(ex.setup.model, ex.table,
                        {true, Backend::kraus, ex.setup.observables, std::nullopt});
  const std::size_t n = 2000;
  const EnsembleResult r = run_ensemble(
      evolver, fixed_initial_state(StateVector::product("-")), 200, n, 1);
  std::size_t converged = 0;
  for (const auto& rec : r.trajectories) {
    ASSERT_EQ(rec.fidelity.size(), 201u);
    ASSERT_EQ(rec.outcomes.size(), 200u);
    EXPECT_NEAR(rec.fidelity[0], 0.0, 1e-15);
    EXPECT_NEAR(fidelity(rec.final_state, StateVector::product("0")),
                rec.fidelity.back(), 1e-12);
    converged += rec.fidelity.back() >= 0.99;
  }
  // Slow stragglers exist (about 1%); the bulk has converged.
  EXPECT_GE(static_cast<double>(converged) / n, 0.98);
  EXPECT_GE(r.summary.mean_fidelity.back(), 0.99);
}

TEST(Trajectory, ExactMeanIsNonDecreasingAndMatchesEnsemble) {
  const ExampleOne ex;
  const StateVector minus = StateVector::product("-");
  const std::vector<double> exact = channel_mean(ex.table, minus, 200);
  for (std::size_t s = 1; s < exact.size(); ++s) {
    EXPECT_GE(exact[s], exact[s - 1] - 1e-14);
  }
  const Evolver evolver(ex.setup.model, ex.table);
  const std::size_t n = 2000;
  const EnsembleResult r =
      run_ensemble(evolver, fixed_initial_state(minus), 200, n, 77, {1, false});
  for (std::size_t s = 0; s < exact.size(); ++s) {
    const double f = exact[s];
    const double sigma = std::sqrt(std::max(f * (1.0 - f), 1e-4) / n);
    EXPECT_NEAR(r.summary.mean_fidelity[s], f, 5.0 * sigma) << "step " << s;
  }
}

TEST(Trajectory, UncorrectedEndsInAPole) {
  const ExampleOne ex;
  TrajectoryOptions opt{false, Backend::kraus, ex.setup.observables, std::nullopt};
  const Evolver evolver(ex.setup.model, ex.table, opt);
  int positive = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    RandomSource rng(seed);
    const TrajectoryRecord rec = evolver.run(StateVector::product("-"), 500, rng);
    const double z = rec.observables[0].back();
    EXPECT_GE(std::abs(z), 0.99);
    positive += z > 0.0;
  }
  EXPECT_GT(positive, 0);
  EXPECT_LT(positive, 40);
}

TEST(Trajectory, RejectsZeroStepsAndWrongDimension) {
  const ExampleOne ex;
  const Evolver evolver(ex.setup.model, ex.table);
  RandomSource rng(1);
  EXPECT_THROW(evolver.run(StateVector::product("-"), 0, rng), Error);
  EXPECT_THROW(evolver.run(StateVector::product("--"), 3, rng), DimensionError);
}

TEST(Trajectory, TargetIsStabilizedInOneStep) {
  const ExampleOne ex;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TrajectoryRecord rec =
        run_trajectory(ex.setup.model, ex.table, ex.table.target, 1, seed);
    EXPECT_GE(rec.fidelity[1], 1.0 - ex.table.max_residual() - 1e-12);
    EXPECT_GE(rec.fidelity[1], 1.0 - 1e-8);
  }
}

TEST(Trajectory, OutcomesAreBitstrings) {
  ModelSetup s = tfim_model(2);
  s.table_options.strategy = CorrectionStrategy::span;
  const CorrectionTable table = build_table(s, 0.05);
  const TrajectoryRecord rec =
      run_trajectory(s.model, table, s.initial, 50, 3);
  for (std::size_t i = 0; i < rec.steps(); ++i) {
    EXPECT_LT(rec.outcomes[i], 4u);
    EXPECT_EQ(rec.outcome(i).index(), rec.outcomes[i]);
    EXPECT_EQ(rec.outcome(i).size(), 2u);
  }
}

TEST(Trajectory, StopFidelityTruncates) {
  const ExampleOne ex;
  TrajectoryOptions opt;
  opt.stop_fidelity = 0.9;
  const TrajectoryRecord rec =
      run_trajectory(ex.setup.model, ex.table, StateVector::product("-"), 500, 4, opt);
  EXPECT_LT(rec.steps(), 500u);
  EXPECT_GE(rec.fidelity.back(), 0.9);
  EXPECT_EQ(first_passage(rec.fidelity, 0.9), static_cast<int>(rec.steps()));
}

TEST(Trajectory, PointerBackendConverges) {
  const ExampleOne ex;
  TrajectoryOptions opt;
  opt.backend = Backend::pointer;
  const Evolver evolver(ex.setup.model, ex.table, opt);
  const EnsembleResult r = run_ensemble(
      evolver, fixed_initial_state(StateVector::product("-")), 300, 50, 5);
  EXPECT_GE(r.summary.mean_fidelity.back(), 0.99);
}

TEST(Ensemble, SingleTrajectoryEqualsRunTrajectory) {
  const ExampleOne ex;
  const Evolver evolver(ex.setup.model, ex.table);
  const StateVector minus = StateVector::product("-");
  const EnsembleResult r =
      run_ensemble(evolver, fixed_initial_state(minus), 60, 1, 123);
  const TrajectoryRecord direct = run_trajectory(
      ex.setup.model, ex.table, minus, 60, RandomSource::stream(123, 0).seed());
  EXPECT_EQ(r.trajectories[0].outcomes, direct.outcomes);
  EXPECT_EQ(r.trajectories[0].fidelity, direct.fidelity);
  EXPECT_EQ(r.summary.mean_fidelity, direct.fidelity);
}

TEST(Ensemble, DeterministicAndThreadCountIndependent) {
  const ExampleOne ex;
  const Evolver evolver(ex.setup.model, ex.table);
  const InitialState init = random_initial_state(1);
  EnsembleOptions one;
  one.threads = 1;
  EnsembleOptions four;
  four.threads = 4;
  const EnsembleResult a = run_ensemble(evolver, init, 80, 37, 9, one);
  const EnsembleResult b = run_ensemble(evolver, init, 80, 37, 9, four);
  const EnsembleResult c = run_ensemble(evolver, init, 80, 37, 9, one);
  EXPECT_EQ(a.summary.mean_fidelity, b.summary.mean_fidelity);
  EXPECT_EQ(a.summary.mean_fidelity, c.summary.mean_fidelity);
  for (std::size_t i = 0; i < 37; ++i) {
    EXPECT_EQ(a.trajectories[i].outcomes, b.trajectories[i].outcomes);
    EXPECT_EQ(a.trajectories[i].seed, 9u ^ i);
  }
  const EnsembleResult d = run_ensemble(evolver, init, 80, 37, 10, one);
  EXPECT_NE(a.summary.mean_fidelity, d.summary.mean_fidelity);
}

TEST(Ensemble, StoppedTrajectoriesHoldLastValue) {
  const ExampleOne ex;
  TrajectoryOptions opt;
  opt.stop_fidelity = 0.5;
  const Evolver evolver(ex.setup.model, ex.table, opt);
  const EnsembleResult r = run_ensemble(
      evolver, fixed_initial_state(StateVector::product("-")), 100, 1, 2);
  const auto& f = r.trajectories[0].fidelity;
  for (std::size_t s = f.size(); s < r.summary.mean_fidelity.size(); ++s) {
    EXPECT_EQ(r.summary.mean_fidelity[s], f.back());
  }
}

TEST(Ensemble, RejectsEmptyInput) {
  const ExampleOne ex;
  const Evolver evolver(ex.setup.model, ex.table);
  const InitialState init = fixed_initial_state(StateVector::product("-"));
  EXPECT_THROW(run_ensemble(evolver, init, 10, 0, 1), Error);
  EXPECT_THROW(run_ensemble(evolver, init, 0, 3, 1), Error);
}

TEST(Ensemble, ExampleOneLogInfidelityIsLinear) {
  const ExampleOne ex;
  const Evolver evolver(ex.setup.model, ex.table);
  EnsembleOptions opt;
  opt.keep_trajectories = false;
  const EnsembleResult r = run_ensemble(
      evolver, fixed_initial_state(StateVector::product("-")), 200, 1000, 1, opt);
  EXPECT_TRUE(r.summary.fit_error.empty());
  EXPECT_LT(r.summary.log_infidelity_slope, 0.0);
  EXPECT_GE(r.summary.slope_r2, 0.98);
  EXPECT_TRUE(r.trajectories.empty());
}

TEST(Fit, SyntheticExponential) {
  std::vector<double> f;
  for (int t = 0; t <= 200; ++t) f.push_back(1.0 - std::exp(-0.05 * t));
  const LogInfidelityFit fit = fit_log_infidelity(f);
  EXPECT_NEAR(fit.slope, -0.05, 1e-6);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-6);
  EXPECT_GE(fit.r2, 1.0 - 1e-9);
  EXPECT_GE(fit.points, 10u);
}

TEST(Fit, ConstantMeanHasInsufficientPoints) {
  const std::vector<double> f(100, 0.1);
  try {
    fit_log_infidelity(f);
    FAIL() << "expected InsufficientPointsError";
  } catch (const InsufficientPointsError& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient points"),
              std::string::npos);
  }
}

TEST(FirstPassage, SkipsInitialState) {
  EXPECT_EQ(first_passage({0.95, 0.1, 0.92}, 0.9), 2);
  EXPECT_FALSE(first_passage({0.95, 0.1, 0.2}, 0.9).has_value());
}

}  // namespace
}  // namespace mbite
