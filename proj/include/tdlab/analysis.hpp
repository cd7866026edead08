#pragma once

#include <cstdint>
#include <optional>

#include "tdlab/linear_td.hpp"
#include "tdlab/mrp.hpp"
#include "tdlab/objectives.hpp"
#include "tdlab/solvers.hpp"

namespace tdlab {

/// Ratios within this band of 1 are treated as non-contractive rather than as
/// converging or diverging.
inline constexpr double kBoundaryBand = 1e-6;

/// Per-outer-step contraction factor of K gradient steps with alpha = 1/L:
///   sigma_K = sqrt((1 - kappa)^K (1 - eta^2) + eta^2).
/// kappa = 0 gives 1 (non-expansion only). The value certifies contraction
/// only when eta < 1.
double sigma_k(double kappa, double eta, std::size_t K);

enum class ContractionClass { Contractive, NonContractive, Expansive };

/// Classifies a contraction factor against 1 with the kBoundaryBand exclusion.
ContractionClass classify_factor(double factor);

// Two-state chain with a terminal third state and zero rewards:
// s1 -> s2 surely, s2 -> s2 w.p. 1 - epsilon, s2 -> terminal w.p. epsilon,
// single feature phi = (1, 2, 0).
struct CounterExampleParams {
  double epsilon = 0.1;
  double gamma = 0.9;
  double d1 = 0.5;  // weight on s1; s2 gets 1 - d1
};

struct CounterExample {
  Mrp mrp;
  FeatureMap phi;
  UpdateDistribution d;
  Vector restart;  // episodes restart at s1
};

CounterExample counterexample_build(const CounterExampleParams& p);

/// Uniform weights converge iff gamma < 5 / (6 - 4 epsilon).
double counterexample_gamma_threshold(double epsilon);

/// Exact TD converges iff d1 < (4 - 4 gamma (1 - epsilon)) / (3 + 2 gamma - 4 gamma (1 - epsilon)).
/// Values above 1 mean every d1 is safe.
double counterexample_d1_threshold(double epsilon, double gamma);

struct ContractionReport {
  double predicted_sigma = 0.0;
  double max_observed_ratio = 0.0;  // 0 when no ratio is defined
  bool bound_satisfied = true;
  double margin = 0.0;              // predicted - observed
  std::size_t ratios_checked = 0;
  std::size_t ratios_below_floor = 0;
};

/// Ratios whose starting distance is below this times max(1, ||theta_star||)
/// are roundoff-dominated and not compared.
inline constexpr double kRatioMeasurementFloor = 1e-6;

/// True when ratios[t] is far enough from theta_star to measure.
bool ratio_measurable(const Trajectory& traj, std::size_t t);

/// Compares observed ratios against eta (exact runs) or sigma_K (gradient
/// runs). Throws InvalidInput when the trajectory has no fixed point to
/// measure against.
ContractionReport verify_contraction(const Trajectory& traj, const ForceConstants& fc,
                                     std::size_t K);

/// gamma * sum_s d(s) E_{s'|s}[max_a' ||phi(s', a')||^2]: the Lipschitz bound on
/// grad_w H in theta for linear q, reduced with sum_s d(s) as the total weight.
double control_lipschitz_bound(const ControlProblem& cp);

/// gamma * sum_s d(s) sum_a pi(a|s) ||phi(s,a)|| E_{s'|s}[max_a' ||phi(s', a')||]:
/// the bound before the final per-term reduction.
double control_lipschitz_bound_pairwise(const ControlProblem& cp);

struct ControlLipschitzReport {
  double max_ratio = 0.0;
  double bound = 0.0;
  double pairwise_bound = 0.0;
  double slack = 0.0;  // bound - max_ratio
  bool bound_satisfied = true;
  std::size_t samples = 0;
};

/// Samples (theta1, theta2, w) in `box` and checks every
/// ||grad_w H(theta1, w) - grad_w H(theta2, w)|| / ||theta1 - theta2|| against
/// control_lipschitz_bound + 1e-8.
ControlLipschitzReport control_lipschitz_check(const ControlProblem& cp, std::size_t samples,
                                               std::uint64_t seed, ProbeBox box = {});

struct SafeDistributionResult {
  UpdateDistribution best;
  double rho = 0.0;
  bool found_convergent = false;
  std::optional<double> stationary_rho;
  std::size_t evaluated = 0;
};

/// Randomized search over update distributions on the non-terminal simplex
/// (uniform Dirichlet samples plus the stationary distribution as a seed
/// candidate) for the smallest spectral radius of Mw^{-1} Mtheta. A heuristic,
/// not an optimizer. `restart` feeds the stationary candidate when the MRP has
/// terminal states; uniform over non-terminal states when absent.
SafeDistributionResult safe_distribution_search(const Mrp& m, const FeatureMap& phi,
                                                std::size_t trials, std::uint64_t seed,
                                                std::optional<Vector> restart = std::nullopt);

}  // namespace tdlab
