#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdlab/linear_td.hpp"
#include "tdlab/mrp.hpp"

namespace tdlab {

/// Force constants of a two-argument objective H(theta, w).
///
/// F_theta: Lipschitz constant of grad_w H in theta (target force).
/// F_w:     strong-convexity modulus of H in w (optimization force).
/// L:       Lipschitz constant of grad_w H in w.
///
/// Sampled estimates (`estimated == true`) are bounds observed at probes, not
/// certificates: F_theta and L from below, F_w from above.
struct ForceConstants {
  double F_theta = 0.0;
  double F_w = 0.0;
  double L = 0.0;
  bool estimated = false;

  double eta() const { return F_theta / F_w; }
  double kappa() const { return F_w / L; }
  /// 0 < F_w <= L and F_theta >= 0.
  bool valid() const;
};

/// Validated constructor; throws InvalidInput when the ordering fails.
ForceConstants make_force_constants(double F_theta, double F_w, double L);

/// H(theta, w): the loss minimized over w with the bootstrapped target frozen
/// at theta.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual double value(const Vector& theta, const Vector& w) const = 0;
  virtual Vector grad_w(const Vector& theta, const Vector& w) const = 0;

  /// Exact constants when they are known in closed form.
  virtual std::optional<ForceConstants> analytic_constants() const { return std::nullopt; }

  /// A certified Lipschitz constant of grad_w H in w, used for the default step
  /// size 1/L. May be looser than analytic_constants()->L.
  virtual std::optional<double> smoothness_bound() const { return std::nullopt; }

  /// Non-null when grad_w H is affine, grad_w H = Mw w - Mtheta theta - b; gives
  /// the closed-form inner argmin and the fixed point.
  virtual const LinearTdSystem* linear_system() const { return nullptr; }
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// 1/2 ||R + gamma P Phi theta - Phi w||_D^2, backed by LinearTdSystem.
/// Analytic constants: F_theta = sigma_max(Mtheta), F_w = lambda_min(Mw),
/// L = lambda_max(Mw).
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(Mrp m, FeatureMap phi, UpdateDistribution d);
  /// Raw force form: H = 1/2 w^T Mw w - w^T (Mtheta theta + b).
  QuadraticObjective(Matrix mw, Matrix mtheta, Vector b);

  std::string name() const override { return "quadratic"; }
  Eigen::Index dim() const override { return system_.dim(); }
  double value(const Vector& theta, const Vector& w) const override;
  Vector grad_w(const Vector& theta, const Vector& w) const override;
  std::optional<ForceConstants> analytic_constants() const override { return constants_; }
  std::optional<double> smoothness_bound() const override { return constants_.L; }
  const LinearTdSystem* linear_system() const override { return &system_; }

  /// Largest real part among the eigenvalues of Mtheta. Differs from
  /// F_theta = sigma_max(Mtheta) whenever Mtheta is not normal.
  double target_lambda_max() const { return target_lambda_max_; }

 private:
  struct Linear {
    Mrp mrp;
    FeatureMap phi;
    UpdateDistribution d;
  };
  std::optional<Linear> linear_;
  LinearTdSystem system_;
  ForceConstants constants_;
  double target_lambda_max_ = 0.0;
};

ObjectivePtr quadratic_linear(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d);

/// base + (lambda/2)||w||^2. Shifts F_w and L by lambda; F_theta unchanged.
/// The base is assumed convex in w; this is not checked.
ObjectivePtr ridge_regularized(ObjectivePtr base, double lambda);

/// sum_s d(s) huber_delta(target(s, theta) - phi(s)^T w) with
/// target(s, theta) = R(s) + gamma (P Phi theta)(s). delta may be +inf.
ObjectivePtr huber_linear(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d,
                          double delta);

/// sum_s d(s) scale^2 log cosh((target(s, theta) - phi(s)^T w) / scale).
ObjectivePtr logistic_linear(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d,
                             double scale);

enum class Greedification { Max, Softmax };

/// Quadratic control objective in single-transition expectation form:
///   H = 1/2 sum_s d(s) sum_a pi(a|s) (r(s) + gamma E_{s'|s}[g(q(s', ., theta))] - q(s, a, w))^2
/// with q(s, a, theta) = phi(s, a)^T theta and g the greedification operator.
/// Next-state distribution and reward depend on the state only.
struct ControlProblem {
  Vector d;                       // n state weights
  Matrix policy;                  // n x A, rows on the simplex
  Vector reward;                  // n expected rewards
  Matrix P;                       // n x n next-state distribution
  std::vector<Matrix> features;   // one n x m matrix per action
  double gamma = 0.0;
  Greedification greedify = Greedification::Max;
  double tau = 1.0;               // softmax temperature

  Eigen::Index states() const { return P.rows(); }
  Eigen::Index actions() const { return static_cast<Eigen::Index>(features.size()); }
  Eigen::Index dim() const { return features.empty() ? 0 : features.front().cols(); }
};

/// Throws InvalidInput on any inconsistency (empty action set, tau <= 0 for
/// softmax, shapes, distributions off the simplex).
void validate_control(const ControlProblem& cp);

/// g over the action values of one state. Max is the hard max; Softmax is the
/// non-expansive mellowmax tau * log(mean_a exp(q_a / tau)).
double greedify(Greedification op, double tau, const Vector& action_values);

/// Index of the largest action value, lowest index on ties.
Eigen::Index greedy_action(const Vector& action_values);

class ControlObjective final : public Objective {
 public:
  explicit ControlObjective(ControlProblem cp);

  std::string name() const override { return "control"; }
  Eigen::Index dim() const override { return cp_.dim(); }
  double value(const Vector& theta, const Vector& w) const override;
  Vector grad_w(const Vector& theta, const Vector& w) const override;
  std::optional<double> smoothness_bound() const override { return l_; }

  const ControlProblem& problem() const { return cp_; }
  /// r(s) + gamma E_{s'|s}[g(q(s', ., theta))] for every state.
  Vector targets(const Vector& theta) const;
  /// sum_s d(s) sum_a pi(a|s) phi(s,a) phi(s,a)^T.
  const Matrix& curvature() const { return mw_; }

 private:
  ControlProblem cp_;
  Matrix mw_;
  double l_ = 0.0;
};

ObjectivePtr control_quadratic(const ControlProblem& cp);

/// The prediction problem a single-action control problem reduces to.
struct InducedPrediction {
  Mrp mrp;
  FeatureMap phi;
  UpdateDistribution d;
};
InducedPrediction induced_prediction(const ControlProblem& cp);

struct ProbeBox {
  double lo = -10.0;
  double hi = 10.0;
};

/// Sampled force constants over uniform probes in box^m. Pairs closer than
/// 1e-12 are redrawn. Deterministic for a given seed.
ForceConstants estimate_constants(const Objective& obj, ProbeBox box, std::size_t samples,
                                  std::uint64_t seed);

}  // namespace tdlab
