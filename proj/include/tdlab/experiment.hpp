#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tdlab/analysis.hpp"
#include "tdlab/io.hpp"
#include "tdlab/objectives.hpp"
#include "tdlab/solvers.hpp"

namespace tdlab {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitIo = 3,
};

/// Command-line overrides applied on top of the JSON config.
struct CliOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

/// A prediction problem with linear features, or a control problem.
struct LinearProblem {
  Mrp mrp;
  FeatureMap phi;
  UpdateDistribution d;
  std::optional<Vector> restart;
  std::optional<CounterExampleParams> counterexample;
};

struct Problem {
  std::optional<LinearProblem> linear;
  std::optional<ControlProblem> control;
  Eigen::Index dim() const;
};

struct SweepAxes {
  std::vector<double> epsilon;
  std::vector<double> gamma;
  std::vector<double> d1;
  std::vector<std::size_t> K;
};

/// Parsed experiment document. `echo` is the effective configuration (file
/// contents with command-line overrides applied); feeding it back in
/// reproduces every output.
struct ExperimentConfig {
  Json echo;
  Json problem;
  Json objective;
  std::string algorithm = "exact";
  SolverConfig solver;
  std::optional<Vector> theta0;
  std::optional<SweepAxes> sweep;
  std::vector<std::size_t> check_K{1, 2, 5, 20, 100};
  std::size_t check_samples = 1000;
  ProbeBox probe_box;
  std::size_t safedist_trials = 1000;
  std::string out_dir = "tdlab_out";
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

ExperimentConfig parse_experiment(const Json& doc, const CliOptions& overrides = {});

/// Builds the problem block. Exactly one source: {"builtin": "counterexample",
/// "epsilon", "gamma", "d1"}, an inline MRP with "Phi" and "d" ("d" may be
/// "stationary"), or {"control": {...}}.
Problem build_problem(const Json& problem);

/// {"loss": "quadratic"|"huber"|"logcosh"|"control", "delta", "scale",
///  "ridge", "greedify": "max"|"softmax", "tau"}.
ObjectivePtr build_objective(const Json& objective, const Problem& problem);

struct SweepRow {
  std::optional<double> epsilon;
  double gamma = 0.0;
  std::optional<double> d1;
  std::optional<std::size_t> K;
  std::optional<double> rho;
  bool converged = false;
  std::string predicted;
  std::string observed;
  std::optional<double> max_ratio;
};

/// Evaluates every grid cell (epsilon, gamma, d1, K nested in that order) on
/// up to cfg.workers threads; rows come back in grid order.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// Subcommands. Each returns an ExitCode and never throws; diagnostics go to
/// `err`, reports to `out`.
int cmd_run(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_check(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_safedist(const CliOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace tdlab
