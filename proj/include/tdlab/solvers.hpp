#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tdlab/objectives.hpp"

namespace tdlab {

struct SolverConfig {
  std::size_t T = 100;                  // outer iterations
  std::size_t K = 1;                    // inner gradient steps (gradient solver)
  std::optional<double> alpha;          // inner step size; 1/L when unset
  double inner_tol = 1e-12;             // generic exact solve: ||grad|| tolerance
  double divergence_guard = 1e12;       // ||theta|| ceiling
  double step_tol = 1e-10;              // converged when ||theta^t - theta^{t-1}|| below
  double residual_tol = 1e-10;          // ... or ||grad_w H(theta, theta)|| below
  std::size_t inner_cap = 1'000'000;    // generic exact solve iteration cap

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
};

/// Outer iterates theta^0..theta^t of one solve plus per-step measurements.
/// `distances` is filled only when the fixed point is known; `ratios[t]` is
/// distances[t+1] / distances[t], defined where distances[t] > 1e-14.
struct Trajectory {
  std::string algorithm;               // "exact" or "gradient"
  std::size_t K = 0;
  double alpha = 0.0;
  bool alpha_outside_hypothesis = false;

  std::vector<Vector> thetas;
  std::optional<Vector> theta_star;
  std::vector<double> distances;
  std::vector<std::optional<double>> ratios;
  std::vector<double> grad_residuals;
  bool diverged = false;
  bool converged = false;

  std::size_t steps() const { return thetas.empty() ? 0 : thetas.size() - 1; }
  /// Largest defined ratio, if any.
  std::optional<double> max_ratio() const;
};

inline constexpr double kRatioFloor = 1e-14;

/// Exact iteration: theta^{t+1} = argmin_w H(theta^t, w). Closed form when the
/// objective's gradient is affine, otherwise inner gradient descent with step
/// 1/L from a warm start at theta^t. Throws NumericalError when an inner solve
/// exceeds cfg.inner_cap iterations.
Trajectory solve_exact(const Objective& obj, const Vector& theta0, const SolverConfig& cfg,
                       std::optional<Vector> theta_star = std::nullopt);

/// Gradient iteration: K gradient steps on w from w^{t,0} = theta^t, then
/// theta^{t+1} = w^{t,K}. Non-finite iterates set `diverged`.
Trajectory solve_gradient(const Objective& obj, const Vector& theta0, const SolverConfig& cfg,
                          std::optional<Vector> theta_star = std::nullopt);

/// argmin_w H(theta, w) by gradient descent from w0 (the generic exact solve).
Vector inner_argmin(const Objective& obj, const Vector& theta, const Vector& w0,
                    const SolverConfig& cfg);

/// ||grad_w H(theta, theta)||; zero exactly at fixed points.
double fixed_point_residual(const Objective& obj, const Vector& theta);

/// Runs exact iterations until the fixed-point residual drops below
/// cfg.residual_tol. Returns nullopt if the run diverges or stalls.
std::optional<Vector> locate_fixed_point(const Objective& obj, const Vector& theta0,
                                         const SolverConfig& cfg);

/// Step size the gradient solver uses when cfg.alpha is unset: 1/L from
/// analytic constants, else from a certified smoothness bound, else from a
/// sampled estimate.
double default_step_size(const Objective& obj);

enum class Verdict { Converges, Diverges, Undetermined };

/// Observed behavior of a finished run: the diverged/converged flags when set,
/// otherwise the growth of the distance (or step length) between the last two
/// quarters of the run.
Verdict observed_verdict(const Trajectory& traj);

const char* to_string(Verdict v);

}  // namespace tdlab
