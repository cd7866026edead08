#include "tdlab/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "tdlab/errors.hpp"

namespace tdlab {

namespace {

void require_dim(const Vector& v, Eigen::Index expected, const char* what) {
  if (v.size() != expected) {
    throw DimensionMismatch(fmt::format("{} has length {}, expected {}", what, v.size(), expected));
  }
}

double largest_singular_value(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

ForceConstants quadratic_constants(const LinearTdSystem& sys) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sys.Mw(), Eigen::EigenvaluesOnly);
  return make_force_constants(largest_singular_value(sys.Mtheta()), eig.eigenvalues()(0),
                              eig.eigenvalues()(sys.dim() - 1));
}

double largest_real_eigenvalue(const Matrix& a) {
  Eigen::EigenSolver<Matrix> eig(a, false);
  if (eig.info() != Eigen::Success) throw NumericalError("eigenvalue decomposition failed");
  return eig.eigenvalues().real().maxCoeff();
}

double lambda_max(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(sym.rows() - 1);
}

// log(cosh(x)) without overflow for large |x|.
double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

class RidgeObjective final : public Objective {
 public:
  RidgeObjective(ObjectivePtr base, double lambda) : base_(std::move(base)), lambda_(lambda) {
    if (const auto* sys = base_->linear_system()) {
      const Eigen::Index m = sys->dim();
      shifted_.emplace(sys->Mw() + lambda_ * Matrix::Identity(m, m), sys->Mtheta(), sys->b());
    }
  }

  std::string name() const override { return "ridge(" + base_->name() + ")"; }
  Eigen::Index dim() const override { return base_->dim(); }

  double value(const Vector& theta, const Vector& w) const override {
    return base_->value(theta, w) + 0.5 * lambda_ * w.squaredNorm();
  }
  Vector grad_w(const Vector& theta, const Vector& w) const override {
    return base_->grad_w(theta, w) + lambda_ * w;
  }
  std::optional<ForceConstants> analytic_constants() const override {
    auto c = base_->analytic_constants();
    if (!c) return std::nullopt;
    return make_force_constants(c->F_theta, c->F_w + lambda_, c->L + lambda_);
  }
  std::optional<double> smoothness_bound() const override {
    auto l = base_->smoothness_bound();
    if (!l) return std::nullopt;
    return *l + lambda_;
  }
  const LinearTdSystem* linear_system() const override {
    return shifted_ ? &*shifted_ : nullptr;
  }

 private:
  ObjectivePtr base_;
  double lambda_;
  std::optional<LinearTdSystem> shifted_;
};

enum class LossKind { Huber, LogCosh };

// sum_s d(s) loss(target(s, theta) - phi(s)^T w) for a convex, even, 1-smooth loss.
class LinearLossObjective final : public Objective {
 public:
  LinearLossObjective(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d,
                      LossKind kind, double param)
      : kind_(kind), param_(param), phi_(phi.matrix()), reward_(m.R), weights_(d.weights()) {
    check_features(m, phi);
    check_distribution(m, d);
    target_map_ = m.gamma * (m.P * phi_);
    l_ = lambda_max(phi_.transpose() * weights_.asDiagonal() * phi_);
  }

  std::string name() const override { return kind_ == LossKind::Huber ? "huber" : "logcosh"; }
  Eigen::Index dim() const override { return phi_.cols(); }

  double value(const Vector& theta, const Vector& w) const override {
    const Vector r = residual(theta, w);
    double total = 0.0;
    for (Eigen::Index s = 0; s < r.size(); ++s) total += weights_(s) * loss(r(s));
    return total;
  }

  Vector grad_w(const Vector& theta, const Vector& w) const override {
    const Vector r = residual(theta, w);
    Vector psi(r.size());
    for (Eigen::Index s = 0; s < r.size(); ++s) psi(s) = weights_(s) * loss_derivative(r(s));
    return -(phi_.transpose() * psi);
  }

  // The loss has second derivative in [0, 1], so lambda_max(Phi^T D Phi) bounds L.
  std::optional<double> smoothness_bound() const override { return l_; }

 private:
  Vector residual(const Vector& theta, const Vector& w) const {
    require_dim(theta, dim(), "theta");
    require_dim(w, dim(), "w");
    return reward_ + target_map_ * theta - phi_ * w;
  }

  double loss(double x) const {
    if (kind_ == LossKind::Huber) {
      const double a = std::abs(x);
      return a <= param_ ? 0.5 * x * x : param_ * a - 0.5 * param_ * param_;
    }
    return param_ * param_ * log_cosh(x / param_);
  }

  double loss_derivative(double x) const {
    if (kind_ == LossKind::Huber) return std::clamp(x, -param_, param_);
    return param_ * std::tanh(x / param_);
  }

  LossKind kind_;
  double param_;
  Matrix phi_;
  Matrix target_map_;
  Vector reward_;
  Vector weights_;
  double l_ = 0.0;
};

}  // namespace

bool ForceConstants::valid() const {
  return std::isfinite(F_theta) && std::isfinite(F_w) && std::isfinite(L) && F_theta >= 0.0 &&
         F_w > 0.0 && F_w <= L;
}

ForceConstants make_force_constants(double F_theta, double F_w, double L) {
  // Analytic F_w and L can coincide up to rounding (scalar or isotropic Mw).
  if (F_w > L && F_w - L <= 1e-12 * std::abs(L)) F_w = L;
  ForceConstants c{F_theta, F_w, L, false};
  if (!c.valid()) {
    throw InvalidInput(
        fmt::format("force constants violate 0 < F_w <= L, F_theta >= 0 (F_theta={}, F_w={}, L={})",
                    F_theta, F_w, L));
  }
  return c;
}

QuadraticObjective::QuadraticObjective(Mrp m, FeatureMap phi, UpdateDistribution d)
    : linear_(Linear{std::move(m), std::move(phi), std::move(d)}),
      system_(build_system(linear_->mrp, linear_->phi, linear_->d)),
      constants_(quadratic_constants(system_)),
      target_lambda_max_(largest_real_eigenvalue(system_.Mtheta())) {}

QuadraticObjective::QuadraticObjective(Matrix mw, Matrix mtheta, Vector b)
    : system_(std::move(mw), std::move(mtheta), std::move(b)),
      constants_(quadratic_constants(system_)),
      target_lambda_max_(largest_real_eigenvalue(system_.Mtheta())) {}

double QuadraticObjective::value(const Vector& theta, const Vector& w) const {
  if (linear_) return objective_value(linear_->mrp, linear_->phi, linear_->d, theta, w);
  require_dim(theta, dim(), "theta");
  require_dim(w, dim(), "w");
  return 0.5 * w.dot(system_.Mw() * w) - w.dot(system_.Mtheta() * theta + system_.b());
}

Vector QuadraticObjective::grad_w(const Vector& theta, const Vector& w) const {
  return tdlab::grad_w(system_, theta, w);
}

ObjectivePtr quadratic_linear(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d) {
  return std::make_shared<QuadraticObjective>(m, phi, d);
}

ObjectivePtr ridge_regularized(ObjectivePtr base, double lambda) {
  if (!base) throw InvalidInput("ridge_regularized: null base objective");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InvalidInput(fmt::format("ridge lambda must be positive and finite, got {}", lambda));
  }
  return std::make_shared<RidgeObjective>(std::move(base), lambda);
}

ObjectivePtr huber_linear(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d,
                          double delta) {
  if (!(delta > 0.0)) throw InvalidInput(fmt::format("huber delta must be positive, got {}", delta));
  return std::make_shared<LinearLossObjective>(m, phi, d, LossKind::Huber, delta);
}

ObjectivePtr logistic_linear(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d,
                             double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidInput(fmt::format("logcosh scale must be positive and finite, got {}", scale));
  }
  return std::make_shared<LinearLossObjective>(m, phi, d, LossKind::LogCosh, scale);
}

void validate_control(const ControlProblem& cp) {
  const Eigen::Index n = cp.states();
  if (n == 0) throw InvalidInput("control problem has no states");
  if (cp.features.empty()) throw InvalidInput("control problem has an empty action set");
  if (cp.P.cols() != n) throw DimensionMismatch("control P is not square");
  if (cp.d.size() != n || cp.reward.size() != n) {
    throw DimensionMismatch("control d and reward must have one entry per state");
  }
  if (cp.policy.rows() != n || cp.policy.cols() != cp.actions()) {
    throw DimensionMismatch(fmt::format("policy must be {}x{}", n, cp.actions()));
  }
  const Eigen::Index m = cp.dim();
  if (m == 0) throw InvalidInput("control features are empty");
  for (const auto& f : cp.features) {
    if (f.rows() != n || f.cols() != m) {
      throw DimensionMismatch(fmt::format("every action's feature matrix must be {}x{}", n, m));
    }
    if (!f.allFinite()) throw InvalidInput("control features have non-finite entries");
  }
  if (!(cp.gamma > 0.0 && cp.gamma < 1.0)) {
    throw InvalidInput(fmt::format("gamma {} outside (0, 1)", cp.gamma));
  }
  if (!cp.d.allFinite() || (cp.d.array() < 0.0).any() || !(cp.d.sum() > 0.0)) {
    throw InvalidInput("control state weights must be nonnegative with positive mass");
  }
  if (!cp.reward.allFinite()) throw InvalidInput("control rewards are non-finite");
  for (Eigen::Index s = 0; s < n; ++s) {
    if ((cp.P.row(s).array() < 0.0).any() ||
        std::abs(cp.P.row(s).sum() - 1.0) > kStochasticTolerance) {
      throw InvalidInput(fmt::format("control P row {} is not a distribution", s));
    }
    if ((cp.policy.row(s).array() < 0.0).any() ||
        std::abs(cp.policy.row(s).sum() - 1.0) > kStochasticTolerance) {
      throw InvalidInput(fmt::format("policy row {} is not on the simplex", s));
    }
  }
  if (cp.greedify == Greedification::Softmax && !(cp.tau > 0.0 && std::isfinite(cp.tau))) {
    throw InvalidInput(fmt::format("softmax temperature must be positive, got {}", cp.tau));
  }
}

double greedify(Greedification op, double tau, const Vector& action_values) {
  if (action_values.size() == 0) throw InvalidInput("greedify over an empty action set");
  const double top = action_values.maxCoeff();
  if (op == Greedification::Max) return top;
  const double mean_exp = ((action_values.array() - top) / tau).exp().mean();
  return top + tau * std::log(mean_exp);
}

Eigen::Index greedy_action(const Vector& action_values) {
  if (action_values.size() == 0) throw InvalidInput("greedy_action over an empty action set");
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < action_values.size(); ++a) {
    if (action_values(a) > action_values(best)) best = a;
  }
  return best;
}

ControlObjective::ControlObjective(ControlProblem cp) : cp_(std::move(cp)) {
  validate_control(cp_);
  const Eigen::Index m = cp_.dim();
  mw_ = Matrix::Zero(m, m);
  for (Eigen::Index s = 0; s < cp_.states(); ++s) {
    for (Eigen::Index a = 0; a < cp_.actions(); ++a) {
      const auto f = cp_.features[static_cast<std::size_t>(a)].row(s);
      mw_ += cp_.d(s) * cp_.policy(s, a) * f.transpose() * f;
    }
  }
  l_ = lambda_max(mw_);
}

Vector ControlObjective::targets(const Vector& theta) const {
  require_dim(theta, dim(), "theta");
  const Eigen::Index n = cp_.states();
  Vector greedy(n);
  Vector q(cp_.actions());
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Eigen::Index a = 0; a < cp_.actions(); ++a) {
      q(a) = cp_.features[static_cast<std::size_t>(a)].row(s).dot(theta);
    }
    greedy(s) = greedify(cp_.greedify, cp_.tau, q);
  }
  return cp_.reward + cp_.gamma * (cp_.P * greedy);
}

double ControlObjective::value(const Vector& theta, const Vector& w) const {
  require_dim(w, dim(), "w");
  const Vector y = targets(theta);
  double total = 0.0;
  for (Eigen::Index s = 0; s < cp_.states(); ++s) {
    for (Eigen::Index a = 0; a < cp_.actions(); ++a) {
      const double err = y(s) - cp_.features[static_cast<std::size_t>(a)].row(s).dot(w);
      total += cp_.d(s) * cp_.policy(s, a) * err * err;
    }
  }
  return 0.5 * total;
}

Vector ControlObjective::grad_w(const Vector& theta, const Vector& w) const {
  require_dim(w, dim(), "w");
  const Vector y = targets(theta);
  Vector g = Vector::Zero(dim());
  for (Eigen::Index s = 0; s < cp_.states(); ++s) {
    for (Eigen::Index a = 0; a < cp_.actions(); ++a) {
      const auto f = cp_.features[static_cast<std::size_t>(a)].row(s);
      g += (cp_.d(s) * cp_.policy(s, a) * (f.dot(w) - y(s))) * f.transpose();
    }
  }
  return g;
}

ObjectivePtr control_quadratic(const ControlProblem& cp) {
  return std::make_shared<ControlObjective>(cp);
}

InducedPrediction induced_prediction(const ControlProblem& cp) {
  validate_control(cp);
  if (cp.actions() != 1) throw InvalidInput("induced_prediction needs a single-action problem");
  return {make_mrp(cp.P, cp.reward, cp.gamma), FeatureMap(cp.features.front()),
          UpdateDistribution(cp.d)};
}

ForceConstants estimate_constants(const Objective& obj, ProbeBox box, std::size_t samples,
                                  std::uint64_t seed) {
  if (samples < 100) throw InvalidInput("estimate_constants needs at least 100 samples");
  if (!(box.lo < box.hi)) throw InvalidInput("probe box must satisfy lo < hi");
  const Eigen::Index m = obj.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(box.lo, box.hi);
  auto draw = [&] {
    Vector v(m);
    for (Eigen::Index i = 0; i < m; ++i) v(i) = unif(rng);
    return v;
  };
  auto draw_pair = [&](Vector& a, Vector& b) {
    do {
      a = draw();
      b = draw();
    } while ((a - b).norm() < 1e-12);
  };

  double f_theta = 0.0;
  double f_w = std::numeric_limits<double>::infinity();
  double l = 0.0;
  Vector a, b;
  for (std::size_t i = 0; i < samples; ++i) {
    draw_pair(a, b);
    const Vector w = draw();
    f_theta = std::max(f_theta, (obj.grad_w(a, w) - obj.grad_w(b, w)).norm() / (a - b).norm());

    draw_pair(a, b);
    const Vector theta = draw();
    const Vector dg = obj.grad_w(theta, a) - obj.grad_w(theta, b);
    const Vector dw = a - b;
    const double dw2 = dw.squaredNorm();
    f_w = std::min(f_w, dg.dot(dw) / dw2);
    l = std::max(l, dg.norm() / std::sqrt(dw2));
  }
  return ForceConstants{f_theta, f_w, l, true};
}

}  // namespace tdlab
