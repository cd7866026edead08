#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "tdlab/linear_td.hpp"
#include "tdlab/mrp.hpp"
#include "tdlab/objectives.hpp"
#include "tdlab/solvers.hpp"

namespace tdlab {

using Json = nlohmann::json;

/// {"n": int, "P": [[...]], "R": [...], "gamma": float, "terminal": [...]}.
/// "terminal" is optional and defaults to no terminal states.
/// Missing or mistyped fields throw ConfigError naming the field.
Mrp mrp_from_json(const Json& doc);

/// {"Phi": [[...]]}.
FeatureMap feature_map_from_json(const Json& doc);

/// {"d": [...]}.
UpdateDistribution distribution_from_json(const Json& doc);

/// {"d", "policy", "reward", "P", "features" (state x action x m), "gamma"};
/// greedification is supplied separately by the objective config.
ControlProblem control_problem_from_json(const Json& doc);

/// Columns: t, theta_0..theta_{m-1}, distance, ratio, grad_residual. Undefined
/// cells are empty. Numbers use the shortest round-trip decimal form.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Full trajectory with the configuration echoed under "config".
Json trajectory_to_json(const Trajectory& traj, const Json& config);

/// Locale-independent shortest round-trip rendering of a double.
std::string format_number(double x);

/// Finite values as JSON numbers; inf/nan as strings.
Json json_number(double x);

Json to_json(const Vector& v);

}  // namespace tdlab
