#include "tdlab/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "tdlab/errors.hpp"

namespace tdlab {

namespace {

// ---------------------------------------------------------------------------
// Config field access. Every error names the dotted field path.

const Json* find(const Json& obj, const char* name) {
  if (!obj.is_object()) return nullptr;
  const auto it = obj.find(name);
  return it == obj.end() ? nullptr : &*it;
}

const Json& require(const Json& obj, const std::string& path, const char* name) {
  const Json* j = find(obj, name);
  if (!j) throw ConfigError(fmt::format("missing required field \"{}{}\"", path, name));
  return *j;
}

double as_double(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  throw ConfigError(fmt::format("field \"{}\" must be a number", path));
}

std::uint64_t as_uint(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) {
    return static_cast<std::uint64_t>(j.get<long long>());
  }
  throw ConfigError(fmt::format("field \"{}\" must be a nonnegative integer", path));
}

std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(fmt::format("field \"{}\" must be a string", path));
  return j.get<std::string>();
}

Vector as_vector(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(fmt::format("field \"{}\" must be an array", path));
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = as_double(j[i], fmt::format("{}[{}]", path, i));
  }
  return v;
}

std::vector<double> as_doubles(const Json& j, const std::string& path) {
  const Vector v = as_vector(j, path);
  return {v.data(), v.data() + v.size()};
}

std::vector<std::size_t> as_counts(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(fmt::format("field \"{}\" must be an array", path));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(static_cast<std::size_t>(as_uint(j[i], fmt::format("{}[{}]", path, i))));
  }
  return out;
}

template <class T, class Parse>
void read_optional(const Json& obj, const char* name, const std::string& path, T& target,
                   Parse parse) {
  if (const Json* j = find(obj, name)) target = parse(*j, path + name);
}

// ---------------------------------------------------------------------------
// I/O

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config file \"{}\"", path));
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(fmt::format("config \"{}\" is not valid JSON: {}", path, e.what()));
  }
}

std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory \"{}\": {}", dir, ec.message()));
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(fmt::format("cannot write \"{}\"", path.string()));
  os << contents;
  os.flush();
  if (!os) throw IoError(fmt::format("failed writing \"{}\"", path.string()));
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SingularSystem& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

std::string vec_str(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_number(v(i));
  }
  return s + "]";
}

// ---------------------------------------------------------------------------
// Shared pieces of the subcommands

Trajectory run_solver(const std::string& algorithm, const Objective& obj, const Vector& theta0,
                      const SolverConfig& sc, std::optional<Vector> theta_star) {
  if (algorithm == "gradient") return solve_gradient(obj, theta0, sc, std::move(theta_star));
  return solve_exact(obj, theta0, sc, std::move(theta_star));
}

Vector initial_theta(const ExperimentConfig& cfg, Eigen::Index dim) {
  if (!cfg.theta0) return Vector::Ones(dim);
  if (cfg.theta0->size() != dim) {
    throw ConfigError(fmt::format("field \"solver.theta0\" must have {} entries", dim));
  }
  return *cfg.theta0;
}

/// Fixed point for objectives without an affine gradient, found by running
/// exact iterations to the residual tolerance.
std::optional<Vector> search_fixed_point(const Objective& obj, const Vector& theta0,
                                         const SolverConfig& sc) {
  if (obj.linear_system()) return std::nullopt;
  SolverConfig long_run = sc;
  long_run.T = std::max<std::size_t>(sc.T, 10000);
  try {
    return locate_fixed_point(obj, theta0, long_run);
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

struct ConstantsSummary {
  std::optional<ForceConstants> analytic;
  ForceConstants estimated;
  const ForceConstants& best() const { return analytic ? *analytic : estimated; }
  const char* basis() const { return analytic ? "analytic" : "estimated"; }
};

ConstantsSummary summarize_constants(const Objective& obj, const ExperimentConfig& cfg) {
  return {obj.analytic_constants(),
          estimate_constants(obj, cfg.probe_box, cfg.check_samples, cfg.seed)};
}

Json constants_json(const ForceConstants& c) {
  Json j;
  j["F_theta"] = json_number(c.F_theta);
  j["F_w"] = json_number(c.F_w);
  j["L"] = json_number(c.L);
  j["eta"] = json_number(c.eta());
  j["kappa"] = json_number(c.kappa());
  if (c.estimated) j["note"] = "sampled bounds, not certificates";
  return j;
}

std::string sigma_status(const ForceConstants& c, double sigma) {
  if (!c.valid()) return "constants invalid (F_w <= 0 or F_w > L)";
  if (c.kappa() == 0.0) return "non-expansion only, convergence not certified";
  if (c.eta() >= 1.0) return "no contraction certified (eta >= 1)";
  return sigma < 1.0 ? "contraction certified" : "no contraction certified";
}

const char* predicted_label(double rho) {
  switch (classify_factor(rho)) {
    case ContractionClass::Contractive:
      return "converges";
    case ContractionClass::Expansive:
      return "diverges";
    case ContractionClass::NonContractive:
      break;
  }
  return "boundary";
}

bool is_builtin(const Json& problem) { return find(problem, "builtin") != nullptr; }

}  // namespace

Eigen::Index Problem::dim() const {
  if (linear) return linear->phi.features();
  if (control) return control->dim();
  return 0;
}

ExperimentConfig parse_experiment(const Json& doc, const CliOptions& o) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  Json echo = doc;
  if (o.out_dir) echo["output"]["dir"] = *o.out_dir;
  if (o.seed) echo["seed"] = *o.seed;
  if (o.workers) echo["workers"] = *o.workers;
  cfg.echo = echo;

  cfg.problem = require(echo, "", "problem");
  if (!cfg.problem.is_object()) throw ConfigError("field \"problem\" must be an object");
  cfg.objective = echo.contains("objective") ? echo["objective"] : Json{{"loss", "quadratic"}};
  if (!cfg.objective.is_object()) throw ConfigError("field \"objective\" must be an object");

  if (const Json* s = find(echo, "solver")) {
    const std::string p = "solver.";
    read_optional(*s, "algorithm", p, cfg.algorithm, as_string);
    if (cfg.algorithm != "exact" && cfg.algorithm != "gradient") {
      throw ConfigError("field \"solver.algorithm\" must be \"exact\" or \"gradient\"");
    }
    read_optional(*s, "T", p, cfg.solver.T, as_uint);
    read_optional(*s, "K", p, cfg.solver.K, as_uint);
    if (const Json* a = find(*s, "alpha")) cfg.solver.alpha = as_double(*a, "solver.alpha");
    read_optional(*s, "inner_tol", p, cfg.solver.inner_tol, as_double);
    read_optional(*s, "divergence_guard", p, cfg.solver.divergence_guard, as_double);
    read_optional(*s, "step_tol", p, cfg.solver.step_tol, as_double);
    read_optional(*s, "residual_tol", p, cfg.solver.residual_tol, as_double);
    if (const Json* t = find(*s, "theta0")) cfg.theta0 = as_vector(*t, "solver.theta0");
  }
  try {
    cfg.solver.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }

  if (const Json* sw = find(echo, "sweep")) {
    SweepAxes axes;
    const std::string p = "sweep.";
    read_optional(*sw, "epsilon", p, axes.epsilon, as_doubles);
    read_optional(*sw, "gamma", p, axes.gamma, as_doubles);
    read_optional(*sw, "d1", p, axes.d1, as_doubles);
    read_optional(*sw, "K", p, axes.K, as_counts);
    cfg.sweep = std::move(axes);
  }

  if (const Json* c = find(echo, "check")) {
    read_optional(*c, "K", "check.", cfg.check_K, as_counts);
    read_optional(*c, "samples", "check.", cfg.check_samples, as_uint);
    if (const Json* box = find(*c, "probe_box")) {
      const Vector b = as_vector(*box, "check.probe_box");
      if (b.size() != 2 || !(b(0) < b(1))) {
        throw ConfigError("field \"check.probe_box\" must be [lo, hi] with lo < hi");
      }
      cfg.probe_box = {b(0), b(1)};
    }
    if (cfg.check_samples < 100) throw ConfigError("field \"check.samples\" must be >= 100");
  }
  if (const Json* s = find(echo, "safedist")) {
    read_optional(*s, "trials", "safedist.", cfg.safedist_trials, as_uint);
  }
  if (const Json* out = find(echo, "output")) {
    read_optional(*out, "dir", "output.", cfg.out_dir, as_string);
  }
  read_optional(echo, "seed", "", cfg.seed, as_uint);
  if (const Json* w = find(echo, "workers")) {
    cfg.workers = static_cast<unsigned>(as_uint(*w, "workers"));
    if (cfg.workers == 0) throw ConfigError("field \"workers\" must be >= 1");
  }
  return cfg;
}

Problem build_problem(const Json& problem) {
  const int sources = (find(problem, "builtin") ? 1 : 0) + (find(problem, "control") ? 1 : 0) +
                      (find(problem, "P") ? 1 : 0);
  if (sources != 1) {
    throw ConfigError(
        "field \"problem\" must have exactly one source: \"builtin\", \"control\", or an inline "
        "MRP with \"P\"");
  }
  Problem out;
  if (const Json* b = find(problem, "builtin")) {
    if (as_string(*b, "problem.builtin") != "counterexample") {
      throw ConfigError("field \"problem.builtin\" must be \"counterexample\"");
    }
    CounterExampleParams params;
    params.epsilon = as_double(require(problem, "problem.", "epsilon"), "problem.epsilon");
    params.gamma = as_double(require(problem, "problem.", "gamma"), "problem.gamma");
    read_optional(problem, "d1", "problem.", params.d1, as_double);
    CounterExample ce = counterexample_build(params);
    out.linear.emplace(LinearProblem{std::move(ce.mrp), std::move(ce.phi), std::move(ce.d),
                                     std::move(ce.restart), params});
    return out;
  }
  if (const Json* c = find(problem, "control")) {
    out.control = control_problem_from_json(*c);
    return out;
  }

  Mrp mrp = mrp_from_json(problem);
  FeatureMap phi = feature_map_from_json(problem);
  std::optional<Vector> restart;
  if (const Json* r = find(problem, "restart")) restart = as_vector(*r, "problem.restart");
  const Json& d = require(problem, "problem.", "d");
  std::optional<UpdateDistribution> dist;
  if (d.is_string()) {
    if (d.get<std::string>() != "stationary") {
      throw ConfigError("field \"problem.d\" must be an array or \"stationary\"");
    }
    dist = stationary_distribution(mrp, restart);
  } else {
    dist = UpdateDistribution(as_vector(d, "problem.d"));
  }
  out.linear.emplace(
      LinearProblem{std::move(mrp), std::move(phi), std::move(*dist), std::move(restart), {}});
  return out;
}

ObjectivePtr build_objective(const Json& objective, const Problem& problem) {
  std::string loss = "quadratic";
  read_optional(objective, "loss", "objective.", loss, as_string);
  ObjectivePtr obj;
  if (loss == "control") {
    if (!problem.control) throw ConfigError("objective \"control\" needs a \"problem.control\" block");
    ControlProblem cp = *problem.control;
    std::string g = "max";
    read_optional(objective, "greedify", "objective.", g, as_string);
    if (g == "max") {
      cp.greedify = Greedification::Max;
    } else if (g == "softmax") {
      cp.greedify = Greedification::Softmax;
      cp.tau = as_double(require(objective, "objective.", "tau"), "objective.tau");
    } else {
      throw ConfigError("field \"objective.greedify\" must be \"max\" or \"softmax\"");
    }
    obj = control_quadratic(cp);
  } else {
    if (!problem.linear) {
      throw ConfigError(fmt::format("objective \"{}\" needs a prediction problem", loss));
    }
    const LinearProblem& lp = *problem.linear;
    if (loss == "quadratic") {
      obj = quadratic_linear(lp.mrp, lp.phi, lp.d);
    } else if (loss == "huber") {
      obj = huber_linear(lp.mrp, lp.phi, lp.d,
                         as_double(require(objective, "objective.", "delta"), "objective.delta"));
    } else if (loss == "logcosh") {
      obj = logistic_linear(lp.mrp, lp.phi, lp.d,
                            as_double(require(objective, "objective.", "scale"), "objective.scale"));
    } else {
      throw ConfigError(
          "field \"objective.loss\" must be \"quadratic\", \"huber\", \"logcosh\" or \"control\"");
    }
  }
  if (const Json* r = find(objective, "ridge")) {
    obj = ridge_regularized(std::move(obj), as_double(*r, "objective.ridge"));
  }
  return obj;
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

struct SweepCell {
  std::optional<double> epsilon;
  std::optional<double> gamma;
  std::optional<double> d1;
  std::optional<std::size_t> K;
};

template <class T>
std::vector<std::optional<T>> axis_values(const std::vector<T>& axis) {
  if (axis.empty()) return {std::nullopt};
  return {axis.begin(), axis.end()};
}

std::vector<SweepCell> grid(const SweepAxes& axes) {
  std::vector<SweepCell> cells;
  for (const auto& e : axis_values(axes.epsilon)) {
    for (const auto& g : axis_values(axes.gamma)) {
      for (const auto& d : axis_values(axes.d1)) {
        for (const auto& k : axis_values(axes.K)) cells.push_back({e, g, d, k});
      }
    }
  }
  return cells;
}

SweepRow evaluate_cell(const ExperimentConfig& cfg, const SweepCell& cell) {
  Json problem = cfg.problem;
  if (cell.epsilon) problem["epsilon"] = *cell.epsilon;
  if (cell.d1) problem["d1"] = *cell.d1;
  if (cell.gamma) {
    if (find(problem, "control")) {
      problem["control"]["gamma"] = *cell.gamma;
    } else {
      problem["gamma"] = *cell.gamma;
    }
  }
  const Problem p = build_problem(problem);
  const ObjectivePtr obj = build_objective(cfg.objective, p);
  SolverConfig sc = cfg.solver;
  if (cell.K) sc.K = *cell.K;
  const Trajectory traj = run_solver(cfg.algorithm, *obj, initial_theta(cfg, obj->dim()), sc,
                                     std::nullopt);

  SweepRow row;
  row.gamma = p.linear ? p.linear->mrp.gamma : p.control->gamma;
  if (p.linear && p.linear->counterexample) {
    row.epsilon = p.linear->counterexample->epsilon;
    row.d1 = p.linear->counterexample->d1;
  }
  if (cfg.algorithm == "gradient") row.K = sc.K;
  if (const auto* sys = obj->linear_system()) {
    row.rho = cfg.algorithm == "gradient"
                  ? spectral_radius(iteration_matrix(*sys, traj.alpha, sc.K))
                  : spectral_radius(sys->A());
    row.predicted = predicted_label(*row.rho);
  } else {
    row.predicted = "unknown";
  }
  row.converged = traj.converged;
  row.observed = to_string(observed_verdict(traj));
  row.max_ratio = traj.max_ratio();
  return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("missing required field \"sweep\"");
  const SweepAxes& axes = *cfg.sweep;
  if (axes.epsilon.empty() && axes.gamma.empty() && axes.d1.empty() && axes.K.empty()) {
    throw ConfigError("field \"sweep\" needs at least one nonempty axis");
  }
  if ((!axes.epsilon.empty() || !axes.d1.empty()) && !is_builtin(cfg.problem)) {
    throw ConfigError("fields \"sweep.epsilon\" and \"sweep.d1\" need the builtin counterexample");
  }
  if (!axes.K.empty() && cfg.algorithm != "gradient") {
    throw ConfigError("field \"sweep.K\" needs \"solver.algorithm\": \"gradient\"");
  }

  const std::vector<SweepCell> cells = grid(axes);
  std::vector<std::optional<SweepRow>> rows(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        rows[i] = evaluate_cell(cfg, cells[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned extra = std::min<std::size_t>(cfg.workers, cells.size()) - 1;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < extra; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<SweepRow> out;
  out.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*rows[i]));
  }
  return out;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  os << "epsilon,gamma,d1,rho,converged,predicted,observed,K,max_ratio\n";
  for (const auto& r : rows) {
    os << opt(r.epsilon) << ',' << format_number(r.gamma) << ',' << opt(r.d1) << ','
       << opt(r.rho) << ',' << (r.converged ? "true" : "false") << ',' << r.predicted << ','
       << r.observed << ',' << (r.K ? std::to_string(*r.K) : std::string()) << ','
       << opt(r.max_ratio) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_run(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = parse_experiment(load_json(opts.config_path), opts);
    const Problem problem = build_problem(cfg.problem);
    const ObjectivePtr obj = build_objective(cfg.objective, problem);
    const Vector theta0 = initial_theta(cfg, obj->dim());
    const Trajectory traj =
        run_solver(cfg.algorithm, *obj, theta0, cfg.solver, search_fixed_point(*obj, theta0, cfg.solver));

    out << fmt::format("objective: {} (dim {})\n", obj->name(), obj->dim());
    out << fmt::format("algorithm: {}", traj.algorithm);
    if (traj.algorithm == "gradient") {
      out << fmt::format(", K = {}, alpha = {}", traj.K, format_number(traj.alpha));
    }
    out << fmt::format("\nsteps: {}, converged: {}, diverged: {}\n", traj.steps(),
                       traj.converged ? "yes" : "no", traj.diverged ? "yes" : "no");
    if (traj.alpha_outside_hypothesis) {
      out << "note: alpha differs from 1/L; the sigma_K contraction bound does not apply\n";
    }
    out << "final theta: " << vec_str(traj.thetas.back()) << '\n';

    Json doc = trajectory_to_json(traj, cfg.echo);
    if (traj.theta_star) {
      out << "theta_star: " << vec_str(*traj.theta_star) << '\n';
      const ConstantsSummary constants = summarize_constants(*obj, cfg);
      const ForceConstants& fc = constants.best();
      if (fc.valid()) {
        const ContractionReport rep = verify_contraction(traj, fc, cfg.solver.K);
        out << fmt::format(
            "contraction ({} constants): predicted sigma {}, max observed ratio {}, margin {}, "
            "bound {} ({} ratios, {} below the roundoff floor)\n",
            constants.basis(), format_number(rep.predicted_sigma),
            format_number(rep.max_observed_ratio), format_number(rep.margin),
            rep.bound_satisfied ? "satisfied" : "VIOLATED", rep.ratios_checked,
            rep.ratios_below_floor);
        doc["report"] = {{"basis", constants.basis()},
                         {"predicted_sigma", json_number(rep.predicted_sigma)},
                         {"max_observed_ratio", json_number(rep.max_observed_ratio)},
                         {"margin", json_number(rep.margin)},
                         {"bound_satisfied", rep.bound_satisfied},
                         {"ratios_checked", rep.ratios_checked},
                         {"ratios_below_floor", rep.ratios_below_floor}};
      } else {
        out << "contraction: constants invalid (F_w <= 0 or F_w > L), report skipped\n";
      }
    } else {
      out << "theta_star: unknown, contraction report skipped\n";
    }

    const auto dir = prepare_out_dir(cfg.out_dir);
    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    write_file(dir / "trajectory.csv", csv.str());
    write_file(dir / "trajectory.json", doc.dump(2) + "\n");
    out << "wrote " << (dir / "trajectory.csv").string() << ", "
        << (dir / "trajectory.json").string() << '\n';
    return kExitOk;
  });
}

int cmd_sweep(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = parse_experiment(load_json(opts.config_path), opts);
    const std::vector<SweepRow> rows = run_sweep(cfg);
    std::ostringstream csv;
    write_sweep_csv(csv, rows);

    Json doc;
    doc["config"] = cfg.echo;
    doc["rows"] = rows.size();
    std::size_t agree = 0;
    std::size_t compared = 0;
    for (const auto& r : rows) {
      if (r.predicted == "converges" || r.predicted == "diverges") {
        ++compared;
        agree += r.predicted == r.observed ? 1 : 0;
      }
    }
    doc["prediction_agreement"] = {{"compared", compared}, {"agree", agree}};

    const auto dir = prepare_out_dir(cfg.out_dir);
    write_file(dir / "sweep.csv", csv.str());
    write_file(dir / "sweep.json", doc.dump(2) + "\n");
    out << fmt::format("{} cells, prediction agrees with observation on {}/{}\n", rows.size(),
                       agree, compared);
    out << "wrote " << (dir / "sweep.csv").string() << ", " << (dir / "sweep.json").string()
        << '\n';
    return kExitOk;
  });
}

int cmd_check(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = parse_experiment(load_json(opts.config_path), opts);
    const Problem problem = build_problem(cfg.problem);
    const ObjectivePtr obj = build_objective(cfg.objective, problem);
    const ConstantsSummary constants = summarize_constants(*obj, cfg);

    Json doc;
    doc["config"] = cfg.echo;
    doc["objective"] = obj->name();
    out << fmt::format("objective: {} (dim {})\n", obj->name(), obj->dim());
    out << fmt::format("{:<10} {:>14} {:>14} {:>14} {:>14} {:>14}\n", "", "F_theta", "F_w", "L",
                       "eta", "kappa");
    auto row = [&](const char* label, const ForceConstants& c) {
      out << fmt::format("{:<10} {:>14.8g} {:>14.8g} {:>14.8g} {:>14.8g} {:>14.8g}\n", label,
                         c.F_theta, c.F_w, c.L, c.eta(), c.kappa());
    };
    if (constants.analytic) {
      row("analytic", *constants.analytic);
      doc["analytic"] = constants_json(*constants.analytic);
    } else {
      doc["analytic"] = nullptr;
    }
    row("estimated", constants.estimated);
    out << "(estimated: sampled bounds, not certificates)\n";
    doc["estimated"] = constants_json(constants.estimated);

    if (const auto* q = dynamic_cast<const QuadraticObjective*>(obj.get())) {
      out << fmt::format(
          "largest real eigenvalue of Mtheta: {:.8g} (F_theta uses the largest singular value "
          "{:.8g})\n",
          q->target_lambda_max(), constants.analytic->F_theta);
      doc["target_lambda_max"] = json_number(q->target_lambda_max());
    }
    if (const auto* c = dynamic_cast<const ControlObjective*>(obj.get())) {
      const double bound = control_lipschitz_bound(c->problem());
      out << fmt::format("control Lipschitz bound on F_theta: {:.8g}\n", bound);
      doc["control_lipschitz_bound"] = json_number(bound);
    }

    const ForceConstants& fc = constants.best();
    Json sigmas = Json::array();
    out << fmt::format("sigma_K ({} constants):\n", constants.basis());
    for (std::size_t K : cfg.check_K) {
      if (!fc.valid() || K < 1) {
        sigmas.push_back({{"K", K}, {"sigma", nullptr}, {"status", sigma_status(fc, 0.0)}});
        continue;
      }
      const double s = sigma_k(fc.kappa(), fc.eta(), K);
      const std::string status = sigma_status(fc, s);
      out << fmt::format("  K = {:<6} sigma_K = {:<14.8g} {}\n", K, s, status);
      sigmas.push_back({{"K", K}, {"sigma", json_number(s)}, {"status", status}});
    }
    doc["sigma_K"] = std::move(sigmas);

    const bool holds = fc.valid() && fc.F_theta < fc.F_w;
    out << fmt::format("hypothesis F_theta < F_w ({}): {}\n", constants.basis(),
                       holds ? "hypothesis holds" : "hypothesis fails");
    doc["hypothesis"] = {{"basis", constants.basis()}, {"holds", holds}};

    const auto dir = prepare_out_dir(cfg.out_dir);
    write_file(dir / "check.json", doc.dump(2) + "\n");
    out << "wrote " << (dir / "check.json").string() << '\n';
    return kExitOk;
  });
}

int cmd_safedist(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = parse_experiment(load_json(opts.config_path), opts);
    const Problem problem = build_problem(cfg.problem);
    if (!problem.linear) throw ConfigError("safedist needs a prediction problem with features");
    const LinearProblem& lp = *problem.linear;
    const SafeDistributionResult res =
        safe_distribution_search(lp.mrp, lp.phi, cfg.safedist_trials, cfg.seed, lp.restart);

    Json doc;
    doc["config"] = cfg.echo;
    doc["best_d"] = to_json(res.best.weights());
    doc["rho"] = json_number(res.rho);
    doc["found_convergent"] = res.found_convergent;
    doc["stationary_rho"] = res.stationary_rho ? json_number(*res.stationary_rho) : Json(nullptr);
    doc["evaluated"] = res.evaluated;
    doc["note"] = "randomized search heuristic, not an optimizer";
    out << "best d: " << vec_str(res.best.weights()) << '\n';
    out << fmt::format("rho = {}, convergent distribution found: {}\n", format_number(res.rho),
                       res.found_convergent ? "yes" : "no");
    if (res.stationary_rho) {
      out << fmt::format("stationary distribution rho = {}\n", format_number(*res.stationary_rho));
    }
    if (lp.counterexample) {
      const double thr =
          counterexample_d1_threshold(lp.counterexample->epsilon, lp.counterexample->gamma);
      out << fmt::format("d1 threshold = {}\n", format_number(thr));
      doc["d1_threshold"] = json_number(thr);
    }
    const auto dir = prepare_out_dir(cfg.out_dir);
    write_file(dir / "safedist.json", doc.dump(2) + "\n");
    out << "wrote " << (dir / "safedist.json").string() << '\n';
    return kExitOk;
  });
}

}  // namespace tdlab
