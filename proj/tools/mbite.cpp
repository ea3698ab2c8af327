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


// mbite: run, sweep and verify measurement-driven imaginary time evolution.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mbite/experiment.hpp"

namespace {

struct RunFlags {
  std::optional<std::string> config;
  std::optional<std::string> model;
  std::optional<int> qubits;
  std::optional<double> lambda;
  std::optional<double> omega;
  std::optional<std::size_t> dim;
  std::optional<std::string> solution;
  std::optional<double> epsilon;
  std::optional<int> steps;
  std::optional<std::size_t> trajectories;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> correction;
  std::optional<std::string> backend;
  std::optional<std::string> strategy;
  std::optional<std::string> initial;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  bool no_trajectories = false;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--config", f.config, "JSON config file (flags override)");
  app->add_option("--model", f.model, "single_qubit | tfim | search");
  app->add_option("-L,--qubits", f.qubits, "Number of qubits");
  app->add_option("--lambda", f.lambda, "TFIM field strength");
  app->add_option("--omega", f.omega, "TFIM coupling strength");
  app->add_option("--dim", f.dim, "Search dimension (power of two)");
  app->add_option("--solution", f.solution, "Search solution index or random");
  app->add_option("--epsilon", f.epsilon, "Measurement strength");
  app->add_option("--steps", f.steps, "Steps per trajectory");
  app->add_option("--trajectories", f.trajectories, "Number of trajectories");
  app->add_option("--seed", f.seed, "Base seed");
  app->add_option("--correction", f.correction, "on | off");
  app->add_option("--backend", f.backend, "kraus | pointer");
  app->add_option("--strategy", f.strategy,
                  "default | span | steered | ansatz");
  app->add_option("--initial", f.initial,
                  "default | random | product labels such as +-0");
  app->add_option("--out", f.out, "Output directory");
  app->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  app->add_flag("--no-trajectories", f.no_trajectories,
                "Skip trajectories.csv");
}

template <typename T>
void overlay(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

void apply_flags(const RunFlags& f, mbite::RunConfig& c) {
  overlay(f.model, c.model);
  overlay(f.qubits, c.qubits);
  overlay(f.lambda, c.lambda);
  overlay(f.omega, c.omega);
  overlay(f.dim, c.dim);
  overlay(f.solution, c.solution);
  overlay(f.epsilon, c.epsilon);
  overlay(f.steps, c.steps);
  overlay(f.trajectories, c.trajectories);
  overlay(f.seed, c.seed);
  if (f.correction) mbite::parse_on_off(*f.correction, c.correction);
  if (f.backend) c.backend = mbite::parse_backend(*f.backend);
  overlay(f.strategy, c.strategy);
  overlay(f.initial, c.initial);
  overlay(f.out, c.out);
  overlay(f.threads, c.threads);
  if (f.no_trajectories) c.write_trajectories = false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measurement-driven imaginary time evolution"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Run a trajectory ensemble");
  add_run_flags(run, run_flags);

  RunFlags sweep_flags;
  std::optional<std::string> variable;
  std::optional<std::vector<double>> values;
  std::optional<double> threshold;
  std::optional<int> max_steps;
  CLI::App* sweep = app.add_subcommand("sweep", "Sweep epsilon or dimension");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--variable", variable, "epsilon | dimension");
  sweep->add_option("--values", values, "Strictly increasing sweep values")
      ->delimiter(',');
  sweep->add_option("--threshold", threshold, "Fidelity threshold for T90");
  sweep->add_option("--max-steps", max_steps, "Step cap per point");

  mbite::VerifyOptions verify_options;
  CLI::App* verify = app.add_subcommand("verify", "Run the invariant checks");
  verify->add_flag("--corrupt-kraus", verify_options.corrupt_kraus)
      ->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      mbite::RunConfig config;
      if (run_flags.config) {
        mbite::apply_json(mbite::read_json_file(*run_flags.config), config);
      }
      apply_flags(run_flags, config);
      return mbite::cmd_run(config);
    }
    if (sweep->parsed()) {
      mbite::SweepConfig s;
      if (sweep_flags.config) {
        mbite::apply_sweep_json(mbite::read_json_file(*sweep_flags.config), s);
      }
      apply_flags(sweep_flags, s.base);
      overlay(variable, s.variable);
      overlay(values, s.values);
      overlay(threshold, s.threshold);
      overlay(max_steps, s.max_steps);
      return mbite::cmd_sweep(s);
    }
    return mbite::cmd_verify(verify_options);
  } catch (const mbite::DegenerateFixedPointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mbite::kExitDegenerate;
  } catch (const mbite::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mbite::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mbite::kExitConfigError;
  }
}
