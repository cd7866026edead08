#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "tdlab/mrp.hpp"

namespace tdlab {

/// Smallest pivot / singular value treated as nonzero in every linear solve.
inline constexpr double kSingularityThreshold = 1e-10;

/// State-feature matrix Phi (n states x m features) with full column rank.
class FeatureMap {
 public:
  explicit FeatureMap(Matrix phi);

  const Matrix& matrix() const { return phi_; }
  Eigen::Index states() const { return phi_.rows(); }
  Eigen::Index features() const { return phi_.cols(); }

 private:
  Matrix phi_;
};

/// Throws unless `phi` has one row per state of `m` and all-zero rows at
/// terminal states.
void check_features(const Mrp& m, const FeatureMap& phi);

/// Quadratic-loss linear TD in force form:
///   grad_w H(theta, w) = Mw w - Mtheta theta - b,
/// with Mw = Phi^T D Phi, Mtheta = gamma Phi^T D P Phi and b = Phi^T D R.
/// Exact TD iterates theta <- A theta + Mw^{-1} b with A = Mw^{-1} Mtheta.
class LinearTdSystem {
 public:
  /// Builds from raw force matrices; Mw must be symmetric positive definite
  /// and Mw - Mtheta nonsingular.
  LinearTdSystem(Matrix mw, Matrix mtheta, Vector b);

  const Matrix& Mw() const { return mw_; }
  const Matrix& Mtheta() const { return mtheta_; }
  const Matrix& A() const { return a_; }
  const Vector& b() const { return b_; }
  const Vector& theta_star() const { return theta_star_; }
  Eigen::Index dim() const { return mw_.rows(); }

  /// Mw^{-1} x.
  Vector solve_w(const Vector& x) const { return llt_.solve(x); }

 private:
  Matrix mw_;
  Matrix mtheta_;
  Vector b_;
  Eigen::LLT<Matrix> llt_;
  Matrix a_;
  Vector theta_star_;
};

LinearTdSystem build_system(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d);

/// Mw w - Mtheta theta - b.
Vector grad_w(const LinearTdSystem& sys, const Vector& theta, const Vector& w);

/// 1/2 ||R + gamma P Phi theta - Phi w||_D^2.
double objective_value(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d,
                       const Vector& theta, const Vector& w);

/// argmin_w H(theta, w) = Mw^{-1}(Mtheta theta + b).
Vector exact_step(const LinearTdSystem& sys, const Vector& theta);

/// max_i |lambda_i(A)| from a dense (complex) eigendecomposition.
double spectral_radius(const Matrix& a);

struct ConvergencePrediction {
  bool converges = false;
  double rho = 0.0;
};

/// Exact TD converges to theta_star iff rho(Mw^{-1} Mtheta) < 1.
ConvergencePrediction predict_convergence(const LinearTdSystem& sys);

/// Outer-iteration matrix of K gradient steps with step alpha warm-started at
/// theta: B + (I - B) A with B = (I - alpha Mw)^K. Its spectral radius decides
/// convergence of the gradient solver on affine-gradient objectives.
Matrix iteration_matrix(const LinearTdSystem& sys, double alpha, std::size_t K);

/// Pi_D = Phi (Phi^T D Phi)^{-1} Phi^T D.
Matrix projection_matrix(const FeatureMap& phi, const UpdateDistribution& d);

}  // namespace tdlab
