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
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mbite/evolution.hpp"
#include "mbite/linalg.hpp"
#include "mbite/measurement.hpp"
#include "mbite/models.hpp"
#include "mbite/stabilizer.hpp"
#include "mbite/trotter.hpp"

namespace mbite {

using Json = nlohmann::ordered_json;

/// Process exit codes of the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitConfigError = 2,
  kExitDegenerate = 3,
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string model = "single_qubit";
  /// 0 picks the model default (1 for single_qubit, 2 otherwise).
  int qubits = 0;
  double lambda = 1.0;
  double omega = 1.0;
  /// Search dimension D; 0 means 2^qubits.
  std::size_t dim = 0;
  /// Search solution index, or "random" (drawn from the seed).
  std::string solution = "random";
  double epsilon = 0.1;
  /// 0 means ceil(20 / epsilon).
  int steps = 0;
  std::size_t trajectories = 100;
  std::uint64_t seed = 1;
  bool correction = true;
  Backend backend = Backend::kraus;
  /// default | span | steered | ansatz
  std::string strategy = "default";
  /// default | random | product labels over {0,1,+,-}
  std::string initial = "default";
  std::string out = "out";
  unsigned threads = 0;
  double fit_lo = 0.2;
  double fit_hi = 0.99;
  /// Keep per-trajectory traces in trajectories.csv.
  bool write_trajectories = true;
};

namespace detail {

template <typename T>
void read_key(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

}  // namespace detail

inline Json to_json(const RunConfig& c) {
  return Json{{"model", c.model},
              {"qubits", c.qubits},
              {"lambda", c.lambda},
              {"omega", c.omega},
              {"dim", c.dim},
              {"solution", c.solution},
              {"epsilon", c.epsilon},
              {"steps", c.steps},
              {"trajectories", c.trajectories},
              {"seed", c.seed},
              {"correction", c.correction ? "on" : "off"},
              {"backend", to_string(c.backend)},
              {"strategy", c.strategy},
              {"initial", c.initial},
              {"out", c.out},
              {"threads", c.threads},
              {"fit_lo", c.fit_lo},
              {"fit_hi", c.fit_hi},
              {"write_trajectories", c.write_trajectories}};
}

inline void parse_on_off(const std::string& text, bool& out) {
  if (text == "on") {
    out = true;
  } else if (text == "off") {
    out = false;
  } else {
    throw ConfigError("correction must be 'on' or 'off', got '" + text + "'");
  }
}

inline Backend parse_backend(const std::string& text) {
  if (text == "kraus") return Backend::kraus;
  if (text == "pointer") return Backend::pointer;
  throw ConfigError("backend must be 'kraus' or 'pointer', got '" + text + "'");
}

/// Overlays the keys present in `j` onto `c`. Accepts a flat document or a
/// run.json (whose "config" member is used).
inline void apply_json(const Json& doc, RunConfig& c) {
  const Json& j = doc.contains("config") ? doc.at("config") : doc;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known = {
      "model", "qubits", "lambda", "omega", "dim", "solution", "epsilon",
      "steps", "trajectories", "seed", "correction", "backend", "strategy",
      "initial", "out", "threads", "fit_lo", "fit_hi", "write_trajectories"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw ConfigError("unknown config key '" + item.key() + "'");
    }
  }
  detail::read_key(j, "model", c.model);
  detail::read_key(j, "qubits", c.qubits);
  detail::read_key(j, "lambda", c.lambda);
  detail::read_key(j, "omega", c.omega);
  detail::read_key(j, "dim", c.dim);
  if (j.contains("solution")) {
    const Json& s = j.at("solution");
    c.solution = s.is_string() ? s.get<std::string>() : s.dump();
  }
  detail::read_key(j, "epsilon", c.epsilon);
  detail::read_key(j, "steps", c.steps);
  detail::read_key(j, "trajectories", c.trajectories);
  detail::read_key(j, "seed", c.seed);
  if (j.contains("correction")) {
    const Json& v = j.at("correction");
    if (v.is_boolean()) {
      c.correction = v.get<bool>();
    } else {
      std::string text;
      detail::read_key(j, "correction", text);
      parse_on_off(text, c.correction);
    }
  }
  if (j.contains("backend")) {
    std::string text;
    detail::read_key(j, "backend", text);
    c.backend = parse_backend(text);
  }
  detail::read_key(j, "strategy", c.strategy);
  detail::read_key(j, "initial", c.initial);
  detail::read_key(j, "out", c.out);
  detail::read_key(j, "threads", c.threads);
  detail::read_key(j, "fit_lo", c.fit_lo);
  detail::read_key(j, "fit_hi", c.fit_hi);
  detail::read_key(j, "write_trajectories", c.write_trajectories);
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

/// A configuration with every default filled in, plus the model it names.
struct ResolvedRun {
  RunConfig config;
  ModelSetup setup;
  std::optional<SearchInstance> search;
};

namespace detail {

inline std::size_t parse_index(const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || text.empty() || text[0] == '-') {
    throw ConfigError("solution must be 'random' or an index, got '" + text +
                      "'");
  }
  return static_cast<std::size_t>(v);
}

inline void apply_strategy(const std::string& name, ModelSetup& setup) {
  if (name == "default") return;
  const std::string& model = setup.model.name;
  if (model == "search") {
    throw ConfigError("the search model only supports strategy 'default'");
  }
  if (name == "span") {
    setup.table_options.strategy = CorrectionStrategy::span;
  } else if (name == "steered" && model == "tfim") {
    setup.table_options.strategy = CorrectionStrategy::steered;
  } else if (name == "ansatz" && model == "tfim") {
    setup.table_options.strategy = CorrectionStrategy::ansatz;
    setup.table_options.strict = false;
  } else {
    throw ConfigError("strategy '" + name + "' is not available for model '" +
                      model + "'");
  }
}

}  // namespace detail

/// Validates a configuration, fills defaults and builds its model.
inline ResolvedRun resolve(RunConfig c) {
  if (!(c.epsilon > 0.0) || !std::isfinite(c.epsilon)) {
    throw ConfigError("epsilon must be positive");
  }
  if (c.steps < 0) throw ConfigError("steps must be positive");
  if (c.trajectories < 1) throw ConfigError("trajectories must be positive");
  if (!(c.fit_lo < c.fit_hi)) throw ConfigError("fit_lo must be below fit_hi");
  if (c.qubits < 0 || c.qubits > 12) {
    throw ConfigError("qubits must be between 1 and 12");
  }
  std::optional<SearchInstance> search;
  ModelSetup setup = [&]() -> ModelSetup {
    if (c.model == "single_qubit") {
      if (c.qubits == 0) c.qubits = 1;
      if (c.qubits != 1) throw ConfigError("single_qubit has exactly 1 qubit");
      return single_qubit_model();
    }
    if (c.model == "tfim") {
      if (c.qubits == 0) c.qubits = 2;
      if (c.qubits < 2) throw ConfigError("tfim needs at least 2 qubits");
      if (!(c.lambda >= 0.0) || !(c.omega >= 0.0)) {
        throw ConfigError("tfim couplings must be non-negative");
      }
      return tfim_model(c.qubits, c.lambda, c.omega);
    }
    if (c.model == "search") {
      if (c.dim != 0) {
        if (c.dim < 2 || (c.dim & (c.dim - 1)) != 0) {
          throw ConfigError("dim must be a power of two >= 2");
        }
        const int l = std::countr_zero(c.dim);
        if (c.qubits != 0 && c.qubits != l) {
          throw ConfigError("dim and qubits disagree");
        }
        c.qubits = l;
      }
      if (c.qubits == 0) c.qubits = 2;
      c.dim = std::size_t{1} << c.qubits;
      std::size_t solution = 0;
      if (c.solution == "random") {
        solution = RandomSource(detail::derived_seed(c.seed, 0x5EA4C4))
                       .next_u64() %
                   c.dim;
      } else {
        solution = detail::parse_index(c.solution);
      }
      if (solution >= c.dim) throw ConfigError("solution index out of range");
      c.solution = std::to_string(solution);
      search.emplace(c.qubits, solution);
      return search_model(*search);
    }
    throw ConfigError("unknown model '" + c.model +
                      "' (expected single_qubit, tfim or search)");
  }();
  detail::apply_strategy(c.strategy, setup);
  for (const auto& t : setup.model.terms) {
    try {
      validate_epsilon(t, c.epsilon);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (c.steps == 0) c.steps = static_cast<int>(std::ceil(20.0 / c.epsilon));
  if (c.initial != "default" && c.initial != "random") {
    if (c.initial.size() != static_cast<std::size_t>(c.qubits)) {
      throw ConfigError("initial state labels must have one character per "
                        "qubit");
    }
    try {
      setup.initial = StateVector::product(c.initial);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  return {std::move(c), std::move(setup), std::move(search)};
}

/// 17 significant digits, the CSV number format.
inline std::string csv_number(double v) { return detail::format_exact(v); }

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

inline Json table_json(const CorrectionTable& table) {
  Json residuals = Json::object();
  Json angles = Json::object();
  for (const auto& e : table.entries) {
    residuals[e.k.str()] = e.residual;
    if (e.angle) angles[e.k.str()] = *e.angle;
  }
  Json j{{"strategy", to_string(table.strategy)},
         {"target", table.target_description},
         {"max_residual", table.max_residual()},
         {"residuals", residuals},
         {"angles", angles}};
  if (table.steered) {
    j["steered"] = {{"objective", table.steered->objective},
                    {"span_objective", table.steered->span_objective},
                    {"horizon", table.steered->horizon},
                    {"iterations", table.steered->iterations}};
  }
  j["contraction_rate_bound"] =
      contraction_rate_bound(table.sequence_operators(), table.target);
  return j;
}

inline Json model_json(const ResolvedRun& run) {
  Json terms = Json::array();
  for (const auto& t : run.setup.model.terms) {
    terms.push_back({{"label", t.label()},
                     {"shift", t.shift()},
                     {"spectral_max", t.spectral_max()}});
  }
  return {{"name", run.setup.model.name},
          {"qubits", run.setup.model.num_qubits},
          {"terms", terms}};
}

struct RunArtifacts {
  CorrectionTable table;
  EnsembleResult ensemble;
  double wall_seconds = 0.0;
};

/// Builds the table and runs the ensemble; no file output.
inline RunArtifacts execute(const ResolvedRun& run,
                            std::optional<double> stop_fidelity = {},
                            bool keep_trajectories = true) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig& c = run.config;
  CorrectionTable table = build_table(run.setup, c.epsilon);
  TrajectoryOptions options{c.correction, c.backend, run.setup.observables,
                            stop_fidelity};
  const Evolver evolver(run.setup.model, table, options);
  const InitialState initial =
      c.initial == "random" ? random_initial_state(c.qubits)
                            : fixed_initial_state(run.setup.initial);
  EnsembleOptions eo;
  eo.threads = c.threads;
  eo.keep_trajectories = keep_trajectories;
  eo.fit_lo = c.fit_lo;
  eo.fit_hi = c.fit_hi;
  EnsembleResult ensemble =
      run_ensemble(evolver, initial, c.steps, c.trajectories, c.seed, eo);
  const double wall = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  return {std::move(table), std::move(ensemble), wall};
}

inline void write_trajectories_csv(std::ostream& out,
                                   const std::vector<NamedObservable>& obs,
                                   const std::vector<TrajectoryRecord>& recs) {
  out << "traj_id,step,fidelity";
  for (const auto& o : obs) out << ',' << o.name;
  out << '\n';
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const TrajectoryRecord& r = recs[i];
    for (std::size_t s = 0; s < r.fidelity.size(); ++s) {
      out << i << ',' << s << ',' << csv_number(r.fidelity[s]);
      for (const auto& trace : r.observables) out << ',' << csv_number(trace[s]);
      out << '\n';
    }
  }
}

inline void write_summary_csv(std::ostream& out, const EnsembleSummary& sum) {
  out << "step,mean_fidelity,log_infidelity\n";
  for (std::size_t s = 0; s < sum.mean_fidelity.size(); ++s) {
    const double f = sum.mean_fidelity[s];
    out << s << ',' << csv_number(f) << ',' << csv_number(std::log(1.0 - f))
        << '\n';
  }
}

inline Json summary_json(const EnsembleSummary& sum) {
  Json j{{"trajectories", sum.num_trajectories},
         {"final_mean_fidelity", sum.mean_fidelity.back()}};
  if (sum.fit_error.empty()) {
    j["fit"] = {{"slope", sum.log_infidelity_slope},
                {"intercept", sum.log_infidelity_intercept},
                {"r2", sum.slope_r2}};
  } else {
    j["fit"] = {{"error", sum.fit_error}};
  }
  return j;
}

/// `run`: writes trajectories.csv, summary.csv, run.json and table.txt.
inline int cmd_run(const RunConfig& config, std::ostream& log = std::cout) {
  const ResolvedRun run = resolve(config);
  RunArtifacts art = execute(run, std::nullopt, run.config.write_trajectories);
  const std::filesystem::path dir(run.config.out);
  std::filesystem::create_directories(dir);
  if (run.config.write_trajectories) {
    std::ofstream f = open_output(dir / "trajectories.csv");
    write_trajectories_csv(f, run.setup.observables, art.ensemble.trajectories);
  }
  {
    std::ofstream f = open_output(dir / "summary.csv");
    write_summary_csv(f, art.ensemble.summary);
  }
  {
    std::ofstream f = open_output(dir / "table.txt");
    export_table(f, art.table);
  }
  Json doc{{"config", to_json(run.config)},
           {"model", model_json(run)},
           {"table", table_json(art.table)},
           {"summary", summary_json(art.ensemble.summary)},
           {"wall_time_seconds", art.wall_seconds}};
  {
    std::ofstream f = open_output(dir / "run.json");
    f << doc.dump(2) << '\n';
  }
  log << "model " << run.setup.model.name << ", " << run.config.trajectories
      << " trajectories x " << run.config.steps << " steps\n"
      << "final mean fidelity "
      << csv_number(art.ensemble.summary.mean_fidelity.back()) << "\n"
      << "wrote " << dir.string() << "\n";
  return kExitOk;
}

struct SweepConfig {
  /// epsilon | dimension
  std::string variable = "epsilon";
  std::vector<double> values;
  double threshold = 0.9;
  /// Step cap per point; 0 means max(ceil(20/eps), ceil(20/eps^2)).
  int max_steps = 0;
  RunConfig base;
};

inline void apply_sweep_json(const Json& j, SweepConfig& s) {
  if (!j.is_object()) throw ConfigError("sweep config must be an object");
  Json run = j.contains("base") ? j.at("base") : Json::object();
  for (const auto& item : j.items()) {
    const std::string& k = item.key();
    if (k != "variable" && k != "values" && k != "threshold" &&
        k != "max_steps" && k != "base") {
      throw ConfigError("unknown sweep key '" + k + "'");
    }
  }
  detail::read_key(j, "variable", s.variable);
  detail::read_key(j, "values", s.values);
  detail::read_key(j, "threshold", s.threshold);
  detail::read_key(j, "max_steps", s.max_steps);
  apply_json(run, s.base);
}

struct SweepPoint {
  double value = 0.0;
  double epsilon = 0.0;
  std::size_t dim = 0;
  std::vector<double> angles;
  double mean_t90 = 0.0;
  std::size_t censored = 0;
  std::size_t trajectories = 0;
  int max_steps = 0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x,
                            const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error("linear fit needs at least two points");
  }
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

struct SweepResult {
  std::vector<SweepPoint> points;
  /// log mean T90 against log value.
  std::optional<LinearFit> t90_fit;
  /// theta_k against epsilon, one per outcome (epsilon sweeps only).
  std::vector<LinearFit> angle_fits;
};

/// Runs every point of a sweep; T90 per trajectory is the first step with
/// fidelity >= threshold, censored trajectories contribute max_steps.
inline SweepResult run_sweep(const SweepConfig& sweep) {
  if (sweep.values.empty()) throw ConfigError("sweep values are empty");
  for (std::size_t i = 1; i < sweep.values.size(); ++i) {
    if (!(sweep.values[i] > sweep.values[i - 1])) {
      throw ConfigError("sweep values must be strictly increasing");
    }
  }
  if (sweep.variable != "epsilon" && sweep.variable != "dimension") {
    throw ConfigError("sweep variable must be 'epsilon' or 'dimension'");
  }
  if (!(sweep.threshold > 0.0 && sweep.threshold <= 1.0)) {
    throw ConfigError("threshold must lie in (0, 1]");
  }
  SweepResult result;
  for (double value : sweep.values) {
    RunConfig c = sweep.base;
    if (sweep.variable == "epsilon") {
      c.epsilon = value;
    } else {
      if (c.model != "search") {
        throw ConfigError("dimension sweeps need the search model");
      }
      const auto d = static_cast<std::size_t>(value);
      if (static_cast<double>(d) != value) {
        throw ConfigError("dimension values must be integers");
      }
      c.dim = d;
      c.qubits = 0;
      c.epsilon = search_limited_epsilon(d);
    }
    const int cap = sweep.max_steps > 0
                        ? sweep.max_steps
                        : static_cast<int>(std::max(
                              std::ceil(20.0 / c.epsilon),
                              std::ceil(20.0 / (c.epsilon * c.epsilon))));
    c.steps = cap;
    const ResolvedRun run = resolve(c);
    RunArtifacts art = execute(run, sweep.threshold);
    SweepPoint p;
    p.value = value;
    p.epsilon = run.config.epsilon;
    p.dim = std::size_t{1} << run.config.qubits;
    for (const auto& e : art.table.entries) {
      p.angles.push_back(e.angle.value_or(std::nan("")));
    }
    double total = 0.0;
    for (const auto& rec : art.ensemble.trajectories) {
      const std::optional<int> t = first_passage(rec.fidelity, sweep.threshold);
      if (t) {
        total += *t;
      } else {
        total += cap;
        ++p.censored;
      }
    }
    p.trajectories = art.ensemble.trajectories.size();
    p.mean_t90 = total / static_cast<double>(p.trajectories);
    p.max_steps = cap;
    result.points.push_back(std::move(p));
  }
  if (result.points.size() >= 2) {
    std::vector<double> x, y;
    for (const auto& p : result.points) {
      x.push_back(std::log(p.value));
      y.push_back(std::log(p.mean_t90));
    }
    result.t90_fit = linear_fit(x, y);
  }
  if (sweep.variable == "epsilon" && result.points.size() >= 2) {
    for (std::size_t k = 0; k < result.points.front().angles.size(); ++k) {
      std::vector<double> x, y;
      for (const auto& p : result.points) {
        if (std::isfinite(p.angles[k])) {
          x.push_back(p.epsilon);
          y.push_back(p.angles[k]);
        }
      }
      if (x.size() >= 2) result.angle_fits.push_back(linear_fit(x, y));
    }
  }
  return result;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  const std::size_t nk = r.points.empty() ? 0 : r.points.front().angles.size();
  out << "value,epsilon,dim";
  for (std::size_t k = 0; k < nk; ++k) out << ",theta_" << k;
  out << ",mean_t90,censored,trajectories,max_steps\n";
  for (const auto& p : r.points) {
    out << csv_number(p.value) << ',' << csv_number(p.epsilon) << ',' << p.dim;
    for (double a : p.angles) out << ',' << csv_number(a);
    out << ',' << csv_number(p.mean_t90) << ',' << p.censored << ','
        << p.trajectories << ',' << p.max_steps << '\n';
  }
}

/// `sweep`: writes sweep.csv and sweep.json (fits) to base.out.
inline int cmd_sweep(const SweepConfig& sweep, std::ostream& log = std::cout) {
  const SweepResult r = run_sweep(sweep);
  const std::filesystem::path dir(sweep.base.out);
  std::filesystem::create_directories(dir);
  {
    std::ofstream f = open_output(dir / "sweep.csv");
    write_sweep_csv(f, r);
  }
  Json fits = Json::object();
  if (r.t90_fit) {
    fits["t90_loglog"] = {{"slope", r.t90_fit->slope},
                          {"intercept", r.t90_fit->intercept},
                          {"r2", r.t90_fit->r2}};
  }
  Json angle_fits = Json::array();
  for (const auto& f : r.angle_fits) {
    angle_fits.push_back(
        {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}});
  }
  fits["theta_vs_epsilon"] = angle_fits;
  Json values = Json::array();
  for (double v : sweep.values) values.push_back(v);
  Json doc{{"variable", sweep.variable},
           {"values", values},
           {"threshold", sweep.threshold},
           {"max_steps", sweep.max_steps},
           {"base", to_json(sweep.base)},
           {"fits", fits}};
  {
    std::ofstream f = open_output(dir / "sweep.json");
    f << doc.dump(2) << '\n';
  }
  for (const auto& p : r.points) {
    log << sweep.variable << ' ' << csv_number(p.value) << ": mean T90 "
        << csv_number(p.mean_t90) << " (" << p.censored << " censored)\n";
  }
  if (r.t90_fit) {
    log << "log-log T90 slope " << csv_number(r.t90_fit->slope) << "\n";
  }
  return kExitOk;
}

struct VerifyOptions {
  /// Test hook: perturbs one Kraus pair before the completeness check.
  bool corrupt_kraus = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::vector<std::pair<std::string, ModelSetup>> verify_models() {
  std::vector<std::pair<std::string, ModelSetup>> out;
  out.emplace_back("single_qubit", single_qubit_model());
  out.emplace_back("tfim L=2", tfim_model(2));
  out.emplace_back("tfim L=3", tfim_model(3));
  out.emplace_back("search D=8", search_model(SearchInstance(3, 5)));
  return out;
}

inline std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

}  // namespace detail

/// The invariant suite behind `verify`. Deterministic.
inline std::vector<CheckResult> run_verify(const VerifyOptions& options = {}) {
  std::vector<CheckResult> out;
  const auto models = detail::verify_models();

  {
    double worst = 0.0;
    for (const auto& [name, setup] : models) {
      for (double eps : {0.01, 0.05, 0.1}) {
        for (const auto& term : setup.model.terms) {
          KrausPair p = build_kraus_pair(term, eps);
          if (options.corrupt_kraus) {
            p.m1 = Operator(1.01 * p.m1.matrix());
          }
          worst = std::max(worst, p.completeness_defect());
        }
      }
    }
    out.push_back({"kraus completeness", worst <= kTolerance,
                   "max defect " + detail::sci(worst)});
  }

  {
    double worst_unitary = 0.0;
    double worst_residual = 0.0;
    for (const auto& [name, setup] : models) {
      if (setup.model.name == "tfim" && setup.model.num_qubits > 2) continue;
      const CorrectionTable t = build_table(setup, 0.05);
      for (const auto& e : t.entries) {
        const Matrix& u = e.unitary.matrix();
        worst_unitary = std::max(
            worst_unitary,
            (u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).norm());
        worst_residual = std::max(worst_residual, e.residual);
      }
      worst_unitary = std::max(
          worst_unitary, (t.v.matrix().adjoint() * t.v.matrix() -
                          Matrix::Identity(t.v.matrix().rows(),
                                           t.v.matrix().cols()))
                             .norm());
    }
    out.push_back({"correction unitarity", worst_unitary <= kTolerance,
                   "max defect " + detail::sci(worst_unitary)});
    out.push_back({"stabilization", worst_residual <= 1e-8,
                   "max residual " + detail::sci(worst_residual)});
  }

  {
    double lo = 1e300;
    double hi = 0.0;
    for (const auto& [name, setup] : models) {
      const std::size_t n = setup.model.num_terms();
      const double scale = std::pow(2.0, -0.5 * static_cast<double>(n));
      for (std::size_t k = 0; k < setup.model.num_outcomes(); ++k) {
        const OutcomeBitstring bits = OutcomeBitstring::from_index(k, n);
        const Operator hk = signed_hamiltonian(setup.model, bits);
        double err[2];
        const double eps[2] = {0.02, 0.01};
        for (int i = 0; i < 2; ++i) {
          const Matrix diff =
              sequence_operator(setup.model, bits, eps[i]).matrix() -
              scale * matrix_exp_hermitian(hk, eps[i]).matrix();
          err[i] = Operator(diff).spectral_norm();
        }
        const double ratio = err[0] / err[1];
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
    }
    out.push_back({"trotter second order", lo >= 3.4 && hi <= 4.6,
                   "halving ratios in [" + detail::format_double(lo) + ", " +
                       detail::format_double(hi) + "]"});
  }

  {
    const ModelSetup sq = single_qubit_model();
    const HamiltonianTerm& term = sq.model.terms.front();
    double worst_dp = 0.0;
    double worst_fid = 0.0;
    bool ok = true;
    for (double eps : {0.1, 0.05}) {
      const KrausPair kp = build_kraus_pair(term, eps);
      const PointerMeasurement pm = pointer_operators(term.op(), eps);
      RandomSource rng(2024);
      for (int i = 0; i < 50; ++i) {
        const StateVector psi = random_state(1, rng);
        for (int b = 0; b < 2; ++b) {
          const Vector a = kp[b].matrix() * psi.amplitudes();
          const Vector p =
              (b == 0 ? pm.m0 : pm.m1).matrix() * psi.amplitudes();
          const double dp = std::abs(a.squaredNorm() - p.squaredNorm());
          const double infid =
              1.0 - std::norm(a.normalized().dot(p.normalized()));
          worst_dp = std::max(worst_dp, dp / (eps * eps));
          worst_fid = std::max(worst_fid, infid / (eps * eps));
          ok = ok && dp <= 5 * eps * eps && infid <= 10 * eps * eps;
        }
      }
    }
    out.push_back({"backend equivalence", ok,
                   "max |dp|/eps^2 " + detail::format_double(worst_dp) +
                       ", max (1-F)/eps^2 " + detail::format_double(worst_fid)});
  }

  {
    const SearchInstance inst(3, 5);
    const ModelSetup setup = search_model(inst);
    const CorrectionTable table = build_table(setup, 0.1);
    const Evolver ev(setup.model, table, {});
    const Vector s = inst.solution_state().amplitudes();
    const Vector perp = inst.perp_state().amplitudes();
    double worst = 0.0;
    RandomSource rng(99);
    StateVector psi = setup.initial;
    for (int step = 0; step < 50; ++step) {
      const TrajectoryRecord rec = ev.run(psi, 1, rng);
      // final_state is V^+ psi; undo to get the in-protocol state.
      psi = table.v.apply(rec.final_state);
      const Vector& v = psi.amplitudes();
      const Vector leak = v - s * s.dot(v) - perp * perp.dot(v);
      worst = std::max(worst, leak.norm());
    }
    out.push_back({"search confinement", worst <= kTolerance,
                   "max leakage " + detail::sci(worst)});
  }

  {
    double worst = 0.0;
    for (int l : {2, 3, 4, 6}) {
      const SearchInstance inst(l, 1);
      const auto d = static_cast<double>(inst.dimension());
      const Vector s = inst.solution_state().amplitudes();
      const Vector perp = inst.perp_state().amplitudes();
      Matrix basis(static_cast<Eigen::Index>(inst.dimension()), 2);
      basis.col(0) = s;
      basis.col(1) = perp;
      const Matrix sub =
          basis.adjoint() * grover_rotation(inst).matrix() * basis;
      Matrix expected(2, 2);
      const double c = (d - 2.0) / d;
      const double y = 2.0 * std::sqrt(d - 1.0) / d;
      // -c I - i y Y with Y = [[0, -i], [i, 0]].
      expected << -c, -y, y, -c;
      worst = std::max(worst, (sub - expected).norm());
    }
    out.push_back({"GO identity", worst <= kTolerance,
                   "max deviation " + detail::sci(worst)});
  }
  return out;
}

/// `verify`: prints a pass/fail table; exit 0 iff every check passes.
inline int cmd_verify(const VerifyOptions& options = {},
                      std::ostream& log = std::cout) {
  const std::vector<CheckResult> checks = run_verify(options);
  bool all = true;
  for (const auto& c : checks) {
    log << std::left << std::setw(24) << c.name << (c.passed ? "PASS  " : "FAIL  ")
        << c.detail << '\n';
    all = all && c.passed;
  }
  if (!all) {
    log << "failed:";
    for (const auto& c : checks) {
      if (!c.passed) log << ' ' << c.name << ';';
    }
    log << '\n';
  }
  return all ? kExitOk : kExitVerifyFailed;
}

}  // namespace mbite
