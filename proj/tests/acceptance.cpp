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


// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mbite/experiment.hpp"
#include "oracles.hpp"

namespace {

using namespace mbite;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::vector<std::pair<std::string, ModelSetup>> all_models() {
  std::vector<std::pair<std::string, ModelSetup>> out;
  out.emplace_back("single_qubit", single_qubit_model());
  out.emplace_back("tfim L=2", tfim_model(2));
  out.emplace_back("tfim L=3", tfim_model(3));
  out.emplace_back("search D=4", search_model(SearchInstance(2, 1)));
  out.emplace_back("search D=8", search_model(SearchInstance(3, 5)));
  return out;
}

Outcome kraus_completeness() {
  double worst = 0.0;
  for (const auto& [name, setup] : all_models()) {
    for (double eps : {0.01, 0.05, 0.1}) {
      for (const auto& p : build_kraus_pairs(setup.model, eps)) {
        worst = std::max(worst, p.completeness_defect());
      }
    }
  }
  return {worst <= 1e-10, "max defect " + fmt(worst, 3)};
}

Outcome angle_reproduction() {
  const CorrectionTable t = build_table(single_qubit_model(), 0.1);
  const double a0 = *t[0].angle;
  const double a1 = *t[1].angle;
  const double q = std::numbers::pi / 4;
  const double c0 = 2.0 * (std::atan(0.8) - q);
  const double c1 = 2.0 * (std::atan(std::sqrt(0.68 / 0.5)) - q);
  auto round_to = [](double v, int places) {
    const double s = std::pow(10.0, places);
    return std::round(v * s) / s;
  };
  const bool closed = std::abs(a0 - c0) <= 1e-12 && std::abs(a1 - c1) <= 1e-12;
  const bool two = round_to(a0, 2) == -0.22 && round_to(a1, 2) == 0.15;
  // Quoted to four decimals, with the last digit one unit off the closed
  // form; accept one unit in the last place.
  const bool four =
      std::abs(a0 - (-0.2214)) <= 1e-4 && std::abs(a1 - 0.1532) <= 1e-4;
  return {closed && two && four,
          "theta_0 " + fmt(a0, 8) + ", theta_1 " + fmt(a1, 8) +
              " (closed-form deviation " +
              fmt(std::max(std::abs(a0 - c0), std::abs(a1 - c1)), 2) +
              "; 4-decimal rounding " + fmt(round_to(a0, 4), 4) + ", " +
              fmt(round_to(a1, 4), 4) + " vs quoted -0.2214, 0.1532)"};
}

struct ConvergenceCase {
  std::string name;
  ModelSetup setup;
  double epsilon;
};

Outcome deterministic_convergence() {
  std::vector<ConvergenceCase> cases;
  cases.push_back({"single_qubit", single_qubit_model(), 0.1});
  cases.push_back({"tfim L=2", tfim_model(2), 0.05});
  cases.push_back({"tfim L=3", tfim_model(3), 0.05});
  bool ok = true;
  std::ostringstream detail;
  for (const auto& c : cases) {
    const int steps = static_cast<int>(std::ceil(20.0 / c.epsilon));
    const CorrectionTable table = build_table(c.setup, c.epsilon);
    const Evolver evolver(c.setup.model, table);

    const EnsembleResult random = run_ensemble(
        evolver, random_initial_state(c.setup.model.num_qubits), steps, 20, 1);
    std::size_t reached = 0;
    double weakest = 1.0;
    for (const auto& rec : random.trajectories) {
      const double best =
          *std::max_element(rec.fidelity.begin() + 1, rec.fidelity.end());
      weakest = std::min(weakest, best);
      reached += best >= 0.99;
    }

    EnsembleOptions opt;
    opt.keep_trajectories = false;
    const EnsembleResult mean = run_ensemble(
        evolver, fixed_initial_state(c.setup.initial), steps, 1000, 2, opt);
    const double r2 = mean.summary.slope_r2;
    const bool case_ok = reached == 20 && std::isfinite(r2) && r2 >= 0.98;
    ok = ok && case_ok;
    detail << "\n    " << c.name << ": " << reached
           << "/20 random states reach 0.99 (weakest max " << fmt(weakest, 5)
           << "); mean-curve R^2 " << fmt(r2, 5) << ", slope "
           << fmt(mean.summary.log_infidelity_slope, 4) << ", final mean F "
           << fmt(mean.summary.mean_fidelity.back(), 5);
  }
  return {ok, detail.str()};
}

Outcome uncorrected_bimodality() {
  const ModelSetup s = single_qubit_model();
  const CorrectionTable table = build_table(s, 0.1);
  TrajectoryOptions opt{false, Backend::kraus, s.observables, std::nullopt};
  const Evolver evolver(s.model, table, opt);
  const std::size_t n = 400;
  const EnsembleResult r =
      run_ensemble(evolver, fixed_initial_state(s.initial), 500, n, 3);
  std::size_t polarized = 0;
  std::size_t positive = 0;
  for (const auto& rec : r.trajectories) {
    const double z = rec.observables[0].back();
    polarized += std::abs(z) >= 0.99;
    positive += z > 0.0;
  }
  const double frac = static_cast<double>(positive) / static_cast<double>(n);
  const double sigma = std::sqrt(0.25 / static_cast<double>(n));
  const bool ok = polarized == n && std::abs(frac - 0.5) <= 3.0 * sigma;
  return {ok, std::to_string(polarized) + "/400 with |<Z>| >= 0.99, positive "
                  "fraction " + fmt(frac, 4) + " (3 sigma = " +
                  fmt(3.0 * sigma, 3) + ")"};
}

Outcome trotter_second_order() {
  double lo = 1e300;
  double hi = 0.0;
  for (const auto& [name, setup] : all_models()) {
    const auto& m = setup.model;
    for (std::size_t i = 0; i < m.num_outcomes(); ++i) {
      const OutcomeBitstring k = OutcomeBitstring::from_index(i, m.num_terms());
      const double norm = std::pow(2.0, -0.5 * static_cast<double>(m.num_terms()));
      const Operator hk = signed_hamiltonian(m, k);
      double err[2];
      const double eps[2] = {0.02, 0.01};
      for (int e = 0; e < 2; ++e) {
        const Matrix diff = sequence_operator(m, k, eps[e]).matrix() -
                            norm * matrix_exp_hermitian(hk, eps[e]).matrix();
        err[e] = Operator(diff).spectral_norm();
      }
      lo = std::min(lo, err[0] / err[1]);
      hi = std::max(hi, err[0] / err[1]);
    }
  }
  return {lo >= 3.4 && hi <= 4.6,
          "ratio range [" + fmt(lo, 4) + ", " + fmt(hi, 4) + "]"};
}

Outcome go_identity() {
  double literal = 0.0;
  double corrected = 0.0;
  for (int l : {2, 3, 4, 6}) {
    const SearchInstance inst(l, 1);
    const auto d = static_cast<double>(inst.dimension());
    Matrix basis(static_cast<Eigen::Index>(inst.dimension()), 2);
    basis.col(0) = inst.solution_state().amplitudes();
    basis.col(1) = inst.perp_state().amplitudes();
    const Matrix sub = basis.adjoint() * grover_rotation(inst).matrix() * basis;
    const double c = (d - 2.0) / d;
    const double y = 2.0 * std::sqrt(d - 1.0) / d;
    Matrix stated(2, 2);
    stated << c, -y, y, c;  // c I - i y Y
    Matrix derived(2, 2);
    derived << -c, -y, y, -c;  // -c I - i y Y
    literal = std::max(literal, (sub - stated).norm());
    corrected = std::max(corrected, (sub - derived).norm());
  }
  return {literal <= 1e-10,
          "max deviation from ((D-2)/D)I - 2i(sqrt(D-1)/D)Y: " +
              fmt(literal, 4) + "; from -((D-2)/D)I - 2i(sqrt(D-1)/D)Y: " +
              fmt(corrected, 3)};
}

Outcome commutator_convergence() {
  const SearchInstance inst(2, 1);
  const Operator exact = commutator_exponential(inst, 0.5);
  std::vector<double> errs;
  for (int n : {16, 64, 256}) {
    errs.push_back((commutator_rotation(inst, 0.5, n) - exact).spectral_norm());
  }
  const bool ok = errs[0] > errs[1] && errs[1] > errs[2] && errs[2] <= 1e-2;
  return {ok, "errors " + fmt(errs[0], 4) + ", " + fmt(errs[1], 4) + ", " +
                  fmt(errs[2], 4) + " at n = 16, 64, 256"};
}

Outcome search_scaling() {
  std::ostringstream detail;
  SweepConfig eps_sweep;
  eps_sweep.variable = "epsilon";
  eps_sweep.values = {0.02, 0.04, 0.08};
  eps_sweep.base.model = "search";
  eps_sweep.base.dim = 16;
  eps_sweep.base.trajectories = 200;
  eps_sweep.base.seed = 4;
  const SweepResult er = run_sweep(eps_sweep);
  const double exponent = er.t90_fit->slope;
  std::size_t censored = 0;
  for (const auto& p : er.points) censored += p.censored;
  const bool exp_ok = std::abs(exponent + 2.0) <= 0.3 && censored == 0;

  // Correction angles over eps in [0.01, 0.1].
  const SearchInstance inst(4, 3);
  const ModelSetup setup = search_model(inst);
  std::vector<double> xs;
  std::vector<std::vector<double>> ys(2);
  for (int i = 1; i <= 10; ++i) {
    const double eps = 0.01 * i;
    const CorrectionTable t = build_table(setup, eps);
    xs.push_back(eps);
    for (std::size_t k = 0; k < 2; ++k) ys[k].push_back(*t[k].angle);
  }
  const LinearFit f0 = linear_fit(xs, ys[0]);
  const LinearFit f1 = linear_fit(xs, ys[1]);
  const bool lin_ok = f0.r2 >= 0.95 && f1.r2 >= 0.95;

  SweepConfig dim_sweep;
  dim_sweep.variable = "dimension";
  dim_sweep.values = {4, 8, 16, 32};
  dim_sweep.base.model = "search";
  dim_sweep.base.trajectories = 400;
  dim_sweep.base.seed = 5;
  const SweepResult dr = run_sweep(dim_sweep);
  const double dslope = dr.t90_fit->slope;
  std::size_t dcens = 0;
  for (const auto& p : dr.points) dcens += p.censored;
  const bool dim_ok = std::abs(dslope - 1.0) <= 0.3 && dcens == 0;

  detail << "\n    T90 vs eps exponent " << fmt(exponent, 4) << " (mean T90";
  for (const auto& p : er.points) detail << ' ' << fmt(p.mean_t90, 5);
  detail << ", censored " << censored << ")"
         << "\n    theta(eps) linear fit R^2 " << fmt(f0.r2, 6) << ", "
         << fmt(f1.r2, 6) << "\n    T90 vs D slope " << fmt(dslope, 4)
         << " (mean T90";
  for (const auto& p : dr.points) detail << ' ' << fmt(p.mean_t90, 5);
  detail << " at eps";
  for (const auto& p : dr.points) detail << ' ' << fmt(p.epsilon, 4);
  detail << ", censored " << dcens << ")";
  return {exp_ok && lin_ok && dim_ok, detail.str()};
}

Outcome backend_equivalence() {
  const HamiltonianTerm term = single_qubit_model().model.terms[0];
  RandomSource rng(31);
  bool ok = true;
  std::ostringstream detail;
  for (double eps : {0.1, 0.05}) {
    const KrausPair k = build_kraus_pair(term, eps);
    const PointerMeasurement p = pointer_operators(term.op(), eps);
    double dp = 0.0;
    double fmin = 1.0;
    for (int i = 0; i < 50; ++i) {
      const StateVector psi = random_state(1, rng);
      for (int b = 0; b < 2; ++b) {
        const Vector vk = k[b].matrix() * psi.amplitudes();
        const Vector vp = (b == 0 ? p.m0 : p.m1).matrix() * psi.amplitudes();
        dp = std::max(dp, std::abs(vk.squaredNorm() - vp.squaredNorm()));
        fmin = std::min(fmin, fidelity(StateVector(vk), StateVector(vp)));
      }
    }
    ok = ok && dp <= 5.0 * eps * eps && fmin >= 1.0 - 10.0 * eps * eps;
    detail << (eps == 0.1 ? "" : "; ") << "eps " << eps << ": max |dp| "
           << fmt(dp, 3) << " (bound " << fmt(5 * eps * eps, 3)
           << "), min fidelity " << fmt(fmin, 6);
  }
  return {ok, detail.str()};
}

Outcome oracle_equivalence() {
  std::vector<std::pair<std::string, ModelSetup>> models;
  models.emplace_back("single_qubit", single_qubit_model());
  models.emplace_back("tfim L=2", tfim_model(2));
  models.emplace_back("search D=2", search_model(SearchInstance(1, 1)));
  double worst = 1.0;
  for (const auto& [name, s] : models) {
    std::vector<oracle::C> vec;
    oracle::ground_state(oracle::from_eigen(s.model.shifted_sum().matrix()), vec);
    const StateVector ref(oracle::to_eigen(vec));
    const auto r =
        exact_ite(s.model, 60.0, StateVector::uniform(s.model.num_qubits));
    worst = std::min(worst, fidelity(r.state, ref));
  }
  return {worst >= 1.0 - 1e-8, "min fidelity " + fmt(worst, 15)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"kraus_completeness", kraus_completeness},
      {"angle_reproduction", angle_reproduction},
      {"deterministic_convergence", deterministic_convergence},
      {"uncorrected_bimodality", uncorrected_bimodality},
      {"trotter_second_order", trotter_second_order},
      {"go_identity", go_identity},
      {"commutator_convergence", commutator_convergence},
      {"search_scaling", search_scaling},
      {"backend_equivalence", backend_equivalence},
      {"oracle_equivalence", oracle_equivalence},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    std::printf("%s %s (%.1fs): %s\n", o.passed ? "PASS" : "FAIL", name.c_str(),
                secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.passed ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
