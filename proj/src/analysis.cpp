#include "tdlab/analysis.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "tdlab/errors.hpp"

namespace tdlab {

double sigma_k(double kappa, double eta, std::size_t K) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) {
    throw InvalidInput(fmt::format("kappa {} outside [0, 1]", kappa));
  }
  if (!(eta >= 0.0)) throw InvalidInput(fmt::format("eta {} is negative", eta));
  if (K < 1) throw InvalidInput("K must be >= 1");
  const double eta2 = eta * eta;
  return std::sqrt(std::pow(1.0 - kappa, static_cast<double>(K)) * (1.0 - eta2) + eta2);
}

ContractionClass classify_factor(double factor) {
  if (factor < 1.0 - kBoundaryBand) return ContractionClass::Contractive;
  if (factor > 1.0 + kBoundaryBand) return ContractionClass::Expansive;
  return ContractionClass::NonContractive;
}

CounterExample counterexample_build(const CounterExampleParams& p) {
  if (!(p.epsilon > 0.0 && p.epsilon <= 1.0)) {
    throw InvalidInput(fmt::format("epsilon {} outside (0, 1]", p.epsilon));
  }
  if (!(p.d1 >= 0.0 && p.d1 < 1.0)) throw InvalidInput(fmt::format("d1 {} outside [0, 1)", p.d1));
  Matrix P(3, 3);
  P << 0.0, 1.0, 0.0,
       0.0, 1.0 - p.epsilon, p.epsilon,
       0.0, 0.0, 1.0;
  Mrp mrp = make_mrp(std::move(P), Vector::Zero(3), p.gamma, {false, false, true});
  Matrix phi(3, 1);
  phi << 1.0, 2.0, 0.0;
  Vector d(3);
  d << p.d1, 1.0 - p.d1, 0.0;
  Vector restart(3);
  restart << 1.0, 0.0, 0.0;
  return {std::move(mrp), FeatureMap(std::move(phi)), UpdateDistribution(std::move(d)),
          std::move(restart)};
}

double counterexample_gamma_threshold(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw InvalidInput(fmt::format("epsilon {} outside [0, 1]", epsilon));
  }
  return 5.0 / (6.0 - 4.0 * epsilon);
}

double counterexample_d1_threshold(double epsilon, double gamma) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw InvalidInput(fmt::format("epsilon {} outside [0, 1]", epsilon));
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw InvalidInput(fmt::format("gamma {} outside [0, 1)", gamma));
  }
  const double bootstrap = 4.0 * gamma * (1.0 - epsilon);
  return (4.0 - bootstrap) / (3.0 + 2.0 * gamma - bootstrap);
}

bool ratio_measurable(const Trajectory& traj, std::size_t t) {
  if (!traj.theta_star || t >= traj.ratios.size() || !traj.ratios[t]) return false;
  return traj.distances[t] >= kRatioMeasurementFloor * std::max(1.0, traj.theta_star->norm());
}

ContractionReport verify_contraction(const Trajectory& traj, const ForceConstants& fc,
                                     std::size_t K) {
  if (!traj.theta_star) {
    throw InvalidInput("verify_contraction needs a trajectory with a known fixed point");
  }
  ContractionReport report;
  report.predicted_sigma = traj.algorithm == "gradient" ? sigma_k(fc.kappa(), fc.eta(), K)
                                                        : fc.eta();
  for (std::size_t t = 0; t < traj.ratios.size(); ++t) {
    if (!traj.ratios[t]) continue;
    if (!ratio_measurable(traj, t)) {
      ++report.ratios_below_floor;
      continue;
    }
    ++report.ratios_checked;
    report.max_observed_ratio = std::max(report.max_observed_ratio, *traj.ratios[t]);
  }
  report.bound_satisfied = report.max_observed_ratio <= report.predicted_sigma + 1e-8;
  report.margin = report.predicted_sigma - report.max_observed_ratio;
  return report;
}

namespace {

// max_a ||phi(s, a)|| per state.
Vector max_feature_norms(const ControlProblem& cp) {
  Vector out = Vector::Zero(cp.states());
  for (const auto& f : cp.features) out = out.cwiseMax(f.rowwise().norm());
  return out;
}

}  // namespace

double control_lipschitz_bound(const ControlProblem& cp) {
  validate_control(cp);
  const Vector top = max_feature_norms(cp);
  const Vector expected = cp.P * top.cwiseAbs2();
  return cp.gamma * cp.d.dot(expected);
}

double control_lipschitz_bound_pairwise(const ControlProblem& cp) {
  validate_control(cp);
  const Vector expected = cp.P * max_feature_norms(cp);
  double total = 0.0;
  for (Eigen::Index s = 0; s < cp.states(); ++s) {
    for (Eigen::Index a = 0; a < cp.actions(); ++a) {
      const double norm = cp.features[static_cast<std::size_t>(a)].row(s).norm();
      total += cp.d(s) * cp.policy(s, a) * norm * expected(s);
    }
  }
  return cp.gamma * total;
}

ControlLipschitzReport control_lipschitz_check(const ControlProblem& cp, std::size_t samples,
                                               std::uint64_t seed, ProbeBox box) {
  const ControlObjective obj(cp);
  ControlLipschitzReport report;
  report.bound = control_lipschitz_bound(cp);
  report.pairwise_bound = control_lipschitz_bound_pairwise(cp);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(box.lo, box.hi);
  const Eigen::Index m = obj.dim();
  auto draw = [&] {
    Vector v(m);
    for (Eigen::Index i = 0; i < m; ++i) v(i) = unif(rng);
    return v;
  };
  while (report.samples < samples) {
    const Vector t1 = draw();
    const Vector t2 = draw();
    const Vector w = draw();
    const double dist = (t1 - t2).norm();
    if (dist < 1e-12) continue;
    const double ratio = (obj.grad_w(t1, w) - obj.grad_w(t2, w)).norm() / dist;
    report.max_ratio = std::max(report.max_ratio, ratio);
    ++report.samples;
  }
  report.slack = report.bound - report.max_ratio;
  report.bound_satisfied = report.max_ratio <= report.bound + 1e-8;
  return report;
}

SafeDistributionResult safe_distribution_search(const Mrp& m, const FeatureMap& phi,
                                                std::size_t trials, std::uint64_t seed,
                                                std::optional<Vector> restart) {
  check_features(m, phi);
  std::vector<Eigen::Index> live;
  for (Eigen::Index s = 0; s < m.size(); ++s) {
    if (!m.terminal[static_cast<std::size_t>(s)]) live.push_back(s);
  }
  if (live.empty()) throw InvalidInput("MRP has no non-terminal states");

  std::optional<SafeDistributionResult> best;
  std::size_t evaluated = 0;
  std::optional<double> stationary_rho;
  auto consider = [&](UpdateDistribution d) -> std::optional<double> {
    try {
      const double rho = predict_convergence(build_system(m, phi, d)).rho;
      ++evaluated;
      if (!best || rho < best->rho) best = SafeDistributionResult{std::move(d), rho, false, std::nullopt, 0};
      return rho;
    } catch (const SingularSystem&) {
      return std::nullopt;
    }
  };

  if (m.has_terminal() && !restart) {
    Vector uniform = Vector::Zero(m.size());
    for (auto s : live) uniform(s) = 1.0;
    restart = uniform;
  }
  try {
    stationary_rho = consider(stationary_distribution(m, restart));
  } catch (const NumericalError&) {
    // Reducible chain: no stationary candidate.
  }

  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> unit_gamma(1.0, 1.0);
  for (std::size_t i = 0; i < trials; ++i) {
    Vector d = Vector::Zero(m.size());
    for (auto s : live) d(s) = unit_gamma(rng);
    if (!(d.sum() > 0.0)) continue;
    consider(UpdateDistribution(d / d.sum()));
  }

  if (!best) throw SingularSystem("every candidate distribution gave a singular system");
  best->found_convergent = best->rho < 1.0;
  best->stationary_rho = stationary_rho;
  best->evaluated = evaluated;
  return std::move(*best);
}

}  // namespace tdlab
