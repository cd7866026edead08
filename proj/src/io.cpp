#include "tdlab/io.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "tdlab/errors.hpp"

namespace tdlab {

namespace {

const Json& field(const Json& doc, const char* name) {
  if (!doc.is_object() || !doc.contains(name)) {
    throw ConfigError(fmt::format("missing required field \"{}\"", name));
  }
  return doc.at(name);
}

double number(const Json& j, const std::string& name) {
  if (!j.is_number()) throw ConfigError(fmt::format("field \"{}\" must be a number", name));
  return j.get<double>();
}

Vector vector_from(const Json& j, const std::string& name) {
  if (!j.is_array()) throw ConfigError(fmt::format("field \"{}\" must be an array", name));
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], fmt::format("{}[{}]", name, i));
  }
  return v;
}

Matrix matrix_from(const Json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(fmt::format("field \"{}\" must be a nonempty array of rows", name));
  }
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw ConfigError(fmt::format("field \"{}\" row {} must have {} entries", name, r, cols));
    }
    m.row(static_cast<Eigen::Index>(r)) =
        vector_from(j[r], fmt::format("{}[{}]", name, r)).transpose();
  }
  return m;
}

}  // namespace

Mrp mrp_from_json(const Json& doc) {
  const Json& n_field = field(doc, "n");
  if (!n_field.is_number_integer() || n_field.get<long long>() < 1) {
    throw ConfigError("field \"n\" must be a positive integer");
  }
  const auto n = static_cast<Eigen::Index>(n_field.get<long long>());
  Matrix P = matrix_from(field(doc, "P"), "P");
  Vector R = vector_from(field(doc, "R"), "R");
  const double gamma = number(field(doc, "gamma"), "gamma");
  std::vector<bool> terminal(static_cast<std::size_t>(n), false);
  if (const auto it = doc.find("terminal"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError("field \"terminal\" must be an array of booleans");
    terminal.clear();
    for (const auto& t : *it) {
      if (!t.is_boolean()) throw ConfigError("field \"terminal\" must be an array of booleans");
      terminal.push_back(t.get<bool>());
    }
  }
  if (P.rows() != n || P.cols() != n) {
    throw ConfigError(fmt::format("field \"P\" must be {}x{}", n, n));
  }
  if (R.size() != n) throw ConfigError(fmt::format("field \"R\" must have {} entries", n));
  if (terminal.size() != static_cast<std::size_t>(n)) {
    throw ConfigError(fmt::format("field \"terminal\" must have {} entries", n));
  }
  return make_mrp(std::move(P), std::move(R), gamma, std::move(terminal));
}

FeatureMap feature_map_from_json(const Json& doc) {
  return FeatureMap(matrix_from(field(doc, "Phi"), "Phi"));
}

UpdateDistribution distribution_from_json(const Json& doc) {
  return UpdateDistribution(vector_from(field(doc, "d"), "d"));
}

ControlProblem control_problem_from_json(const Json& doc) {
  ControlProblem cp;
  cp.d = vector_from(field(doc, "d"), "d");
  cp.policy = matrix_from(field(doc, "policy"), "policy");
  cp.reward = vector_from(field(doc, "reward"), "reward");
  cp.P = matrix_from(field(doc, "P"), "P");
  cp.gamma = number(field(doc, "gamma"), "gamma");
  const Json& feats = field(doc, "features");
  if (!feats.is_array() || feats.empty() || !feats[0].is_array() || feats[0].empty()) {
    throw ConfigError("field \"features\" must be indexed [state][action] -> feature vector");
  }
  const std::size_t n = feats.size();
  const std::size_t actions = feats[0].size();
  const std::size_t m = feats[0][0].is_array() ? feats[0][0].size() : 0;
  cp.features.assign(actions, Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)));
  for (std::size_t s = 0; s < n; ++s) {
    if (!feats[s].is_array() || feats[s].size() != actions) {
      throw ConfigError(fmt::format("field \"features\"[{}] must list {} actions", s, actions));
    }
    for (std::size_t a = 0; a < actions; ++a) {
      const Vector f = vector_from(feats[s][a], fmt::format("features[{}][{}]", s, a));
      if (static_cast<std::size_t>(f.size()) != m) {
        throw ConfigError(fmt::format("field \"features\"[{}][{}] must have {} entries", s, a, m));
      }
      cp.features[a].row(static_cast<Eigen::Index>(s)) = f.transpose();
    }
  }
  return cp;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{}", x);
}

Json json_number(double x) { return std::isfinite(x) ? Json(x) : Json(format_number(x)); }

Json to_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(json_number(v(i)));
  return arr;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const Eigen::Index m = traj.thetas.empty() ? 0 : traj.thetas.front().size();
  os << 't';
  for (Eigen::Index i = 0; i < m; ++i) os << ",theta_" << i;
  os << ",distance,ratio,grad_residual\n";
  for (std::size_t t = 0; t < traj.thetas.size(); ++t) {
    os << t;
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << format_number(traj.thetas[t](i));
    os << ',';
    if (t < traj.distances.size()) os << format_number(traj.distances[t]);
    os << ',';
    if (t > 0 && t - 1 < traj.ratios.size() && traj.ratios[t - 1]) {
      os << format_number(*traj.ratios[t - 1]);
    }
    os << ',' << format_number(traj.grad_residuals[t]) << '\n';
  }
}

Json trajectory_to_json(const Trajectory& traj, const Json& config) {
  Json out;
  out["config"] = config;
  out["algorithm"] = traj.algorithm;
  if (traj.algorithm == "gradient") {
    out["K"] = traj.K;
    out["alpha"] = traj.alpha;
    out["alpha_outside_hypothesis"] = traj.alpha_outside_hypothesis;
  }
  out["diverged"] = traj.diverged;
  out["converged"] = traj.converged;
  out["theta_star"] = traj.theta_star ? to_json(*traj.theta_star) : Json(nullptr);
  Json rows = Json::array();
  for (std::size_t t = 0; t < traj.thetas.size(); ++t) {
    Json row;
    row["t"] = t;
    row["theta"] = to_json(traj.thetas[t]);
    row["distance"] = t < traj.distances.size() ? json_number(traj.distances[t])
                                                : Json(nullptr);
    row["ratio"] = (t > 0 && t - 1 < traj.ratios.size() && traj.ratios[t - 1])
                       ? json_number(*traj.ratios[t - 1])
                       : Json(nullptr);
    row["grad_residual"] = json_number(traj.grad_residuals[t]);
    rows.push_back(std::move(row));
  }
  out["rows"] = std::move(rows);
  return out;
}

}  // namespace tdlab
