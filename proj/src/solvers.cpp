#include "tdlab/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "tdlab/errors.hpp"

namespace tdlab {

namespace {

using Step = std::function<Vector(const Vector& theta, std::size_t t)>;

std::optional<Vector> resolve_theta_star(const Objective& obj, std::optional<Vector> given) {
  if (given) {
    if (given->size() != obj.dim()) {
      throw DimensionMismatch(fmt::format("theta_star has length {}, expected {}", given->size(),
                                          obj.dim()));
    }
    return given;
  }
  if (const auto* sys = obj.linear_system()) return sys->theta_star();
  return std::nullopt;
}

void record(Trajectory& traj, const Objective& obj, Vector theta) {
  const bool finite = theta.allFinite();
  traj.grad_residuals.push_back(finite ? fixed_point_residual(obj, theta)
                                       : std::numeric_limits<double>::infinity());
  if (traj.theta_star) {
    const double dist = finite ? (theta - *traj.theta_star).norm()
                               : std::numeric_limits<double>::infinity();
    if (!traj.distances.empty()) {
      const double prev = traj.distances.back();
      traj.ratios.push_back(prev > kRatioFloor ? std::optional<double>(dist / prev)
                                               : std::nullopt);
    }
    traj.distances.push_back(dist);
  }
  traj.thetas.push_back(std::move(theta));
}

Trajectory run(const Objective& obj, const Vector& theta0, const SolverConfig& cfg,
               std::optional<Vector> theta_star, Trajectory traj, const Step& step) {
  if (theta0.size() != obj.dim()) {
    throw DimensionMismatch(
        fmt::format("theta0 has length {}, expected {}", theta0.size(), obj.dim()));
  }
  traj.theta_star = resolve_theta_star(obj, std::move(theta_star));
  record(traj, obj, theta0);
  if (traj.grad_residuals.back() < cfg.residual_tol) {
    traj.converged = true;
    return traj;
  }
  for (std::size_t t = 0; t < cfg.T; ++t) {
    Vector next = step(traj.thetas.back(), t);
    const double moved = (next - traj.thetas.back()).norm();
    record(traj, obj, std::move(next));
    const Vector& theta = traj.thetas.back();
    if (!theta.allFinite() || theta.norm() > cfg.divergence_guard) {
      traj.diverged = true;
      break;
    }
    if (moved < cfg.step_tol || traj.grad_residuals.back() < cfg.residual_tol) {
      traj.converged = true;
      break;
    }
  }
  return traj;
}

}  // namespace

void SolverConfig::validate() const {
  if (T < 1) throw InvalidInput("solver T must be >= 1");
  if (K < 1) throw InvalidInput("solver K must be >= 1");
  if (alpha && !(*alpha > 0.0 && std::isfinite(*alpha))) {
    throw InvalidInput(fmt::format("solver alpha must be positive, got {}", *alpha));
  }
  if (!(inner_tol > 0.0)) throw InvalidInput("solver inner_tol must be positive");
  if (!(divergence_guard > 0.0)) throw InvalidInput("solver divergence_guard must be positive");
  if (!(step_tol >= 0.0) || !(residual_tol >= 0.0)) {
    throw InvalidInput("solver convergence tolerances must be nonnegative");
  }
  if (inner_cap < 1) throw InvalidInput("solver inner_cap must be >= 1");
}

std::optional<double> Trajectory::max_ratio() const {
  std::optional<double> best;
  for (const auto& r : ratios) {
    if (r && (!best || *r > *best)) best = r;
  }
  return best;
}

double fixed_point_residual(const Objective& obj, const Vector& theta) {
  return obj.grad_w(theta, theta).norm();
}

double default_step_size(const Objective& obj) {
  if (auto c = obj.analytic_constants()) return 1.0 / c->L;
  if (auto l = obj.smoothness_bound()) return 1.0 / *l;
  const auto est = estimate_constants(obj, ProbeBox{}, 1000, 0);
  if (!(est.L > 0.0)) throw NumericalError("could not estimate a positive smoothness constant");
  return 1.0 / est.L;
}

Vector inner_argmin(const Objective& obj, const Vector& theta, const Vector& w0,
                    const SolverConfig& cfg) {
  if (const auto* sys = obj.linear_system()) return exact_step(*sys, theta);
  const double alpha = default_step_size(obj);
  const double tol = cfg.inner_tol * std::max(1.0, theta.norm());
  Vector w = w0;
  for (std::size_t k = 0; k < cfg.inner_cap; ++k) {
    const Vector g = obj.grad_w(theta, w);
    if (!g.allFinite()) return Vector::Constant(w.size(), std::nan(""));
    if (g.norm() < tol) return w;
    w -= alpha * g;
  }
  throw NumericalError(
      fmt::format("inner solve did not reach tolerance within {} iterations", cfg.inner_cap));
}

Trajectory solve_exact(const Objective& obj, const Vector& theta0, const SolverConfig& cfg,
                       std::optional<Vector> theta_star) {
  cfg.validate();
  Trajectory traj;
  traj.algorithm = "exact";
  const Step step = [&](const Vector& theta, std::size_t t) -> Vector {
    try {
      return inner_argmin(obj, theta, theta, cfg);
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("outer iteration {}: {}", t, e.what()));
    }
  };
  return run(obj, theta0, cfg, std::move(theta_star), std::move(traj), step);
}

Trajectory solve_gradient(const Objective& obj, const Vector& theta0, const SolverConfig& cfg,
                          std::optional<Vector> theta_star) {
  cfg.validate();
  Trajectory traj;
  traj.algorithm = "gradient";
  traj.K = cfg.K;
  const double nominal = default_step_size(obj);
  traj.alpha = cfg.alpha.value_or(nominal);
  traj.alpha_outside_hypothesis =
      cfg.alpha.has_value() && std::abs(*cfg.alpha - nominal) > 1e-12 * nominal;
  const double alpha = traj.alpha;
  const Step step = [&](const Vector& theta, std::size_t) -> Vector {
    Vector w = theta;
    for (std::size_t k = 0; k < cfg.K; ++k) {
      w -= alpha * obj.grad_w(theta, w);
      if (!w.allFinite()) break;
    }
    return w;
  };
  return run(obj, theta0, cfg, std::move(theta_star), std::move(traj), step);
}

std::optional<Vector> locate_fixed_point(const Objective& obj, const Vector& theta0,
                                         const SolverConfig& cfg) {
  SolverConfig residual_only = cfg;
  residual_only.step_tol = 0.0;
  const Trajectory traj = solve_exact(obj, theta0, residual_only);
  if (traj.diverged || traj.grad_residuals.back() >= cfg.residual_tol) return std::nullopt;
  return traj.thetas.back();
}

Verdict observed_verdict(const Trajectory& traj) {
  if (traj.diverged) return Verdict::Diverges;
  if (traj.converged) return Verdict::Converges;
  std::vector<double> scale;
  if (traj.theta_star) {
    scale = traj.distances;
  } else {
    for (std::size_t t = 1; t < traj.thetas.size(); ++t) {
      scale.push_back((traj.thetas[t] - traj.thetas[t - 1]).norm());
    }
  }
  const std::size_t window = scale.size() / 4;
  if (window == 0) return Verdict::Undetermined;
  const auto end = scale.end();
  const double late = *std::max_element(end - static_cast<std::ptrdiff_t>(window), end);
  const double early = *std::max_element(end - static_cast<std::ptrdiff_t>(2 * window),
                                         end - static_cast<std::ptrdiff_t>(window));
  if (late < early) return Verdict::Converges;
  if (late > early) return Verdict::Diverges;
  return Verdict::Undetermined;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Converges:
      return "converges";
    case Verdict::Diverges:
      return "diverges";
    case Verdict::Undetermined:
      break;
  }
  return "undetermined";
}

}  // namespace tdlab
