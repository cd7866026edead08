#include "tdlab/linear_td.hpp"

#include <fmt/format.h>

#include "tdlab/errors.hpp"

namespace tdlab {

namespace {

void require_dim(const Vector& v, Eigen::Index expected, const char* what) {
  if (v.size() != expected) {
    throw DimensionMismatch(fmt::format("{} has length {}, expected {}", what, v.size(), expected));
  }
}

Matrix weighted_gram(const FeatureMap& phi, const UpdateDistribution& d) {
  if (d.size() != phi.states()) {
    throw DimensionMismatch(fmt::format("distribution has length {}, Phi has {} rows", d.size(),
                                        phi.states()));
  }
  return phi.matrix().transpose() * d.weights().asDiagonal() * phi.matrix();
}

}  // namespace

FeatureMap::FeatureMap(Matrix phi) : phi_(std::move(phi)) {
  if (phi_.rows() == 0 || phi_.cols() == 0) throw InvalidInput("feature matrix is empty");
  if (!phi_.allFinite()) throw InvalidInput("feature matrix has non-finite entries");
  if (phi_.cols() > phi_.rows()) {
    throw InvalidInput(fmt::format("feature matrix {}x{} cannot have full column rank",
                                   phi_.rows(), phi_.cols()));
  }
  Eigen::JacobiSVD<Matrix> svd(phi_);
  const double smallest = svd.singularValues()(phi_.cols() - 1);
  if (!(smallest > kSingularityThreshold)) {
    throw InvalidInput(
        fmt::format("feature matrix is not full column rank (smallest singular value {})",
                    smallest));
  }
}

void check_features(const Mrp& m, const FeatureMap& phi) {
  if (phi.states() != m.size()) {
    throw DimensionMismatch(
        fmt::format("Phi has {} rows, MRP has {} states", phi.states(), m.size()));
  }
  for (Eigen::Index s = 0; s < m.size(); ++s) {
    if (m.terminal[static_cast<std::size_t>(s)] && !phi.matrix().row(s).isZero(0.0)) {
      throw InvalidInput(fmt::format("Phi row of terminal state {} is not zero", s));
    }
  }
}

LinearTdSystem::LinearTdSystem(Matrix mw, Matrix mtheta, Vector b)
    : mw_(std::move(mw)), mtheta_(std::move(mtheta)), b_(std::move(b)) {
  const Eigen::Index m = mw_.rows();
  if (mw_.cols() != m || mtheta_.rows() != m || mtheta_.cols() != m || b_.size() != m) {
    throw DimensionMismatch("Mw, Mtheta and b dimensions disagree");
  }
  if (!mw_.allFinite() || !mtheta_.allFinite() || !b_.allFinite()) {
    throw InvalidInput("force matrices have non-finite entries");
  }
  if (!mw_.isApprox(mw_.transpose(), 1e-12)) throw InvalidInput("Mw is not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(mw_, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues()(0) > kSingularityThreshold)) {
    throw SingularSystem(fmt::format("features not independent under d (lambda_min(Mw) = {})",
                                     eig.eigenvalues()(0)));
  }
  llt_.compute(mw_);
  if (llt_.info() != Eigen::Success) {
    throw SingularSystem("features not independent under d (Cholesky of Mw failed)");
  }
  a_ = llt_.solve(mtheta_);

  const Matrix gap = mw_ - mtheta_;
  Eigen::JacobiSVD<Matrix> svd(gap);
  const double smallest = svd.singularValues()(m - 1);
  if (!(smallest > kSingularityThreshold)) {
    throw SingularSystem(
        fmt::format("no unique fixed point (smallest singular value of Mw - Mtheta is {})",
                    smallest));
  }
  theta_star_ = gap.fullPivLu().solve(b_);
}

LinearTdSystem build_system(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d) {
  check_features(m, phi);
  check_distribution(m, d);
  const Matrix& f = phi.matrix();
  const auto D = d.weights().asDiagonal();
  Matrix mw = f.transpose() * D * f;
  mw = 0.5 * (mw + mw.transpose()).eval();
  Matrix mtheta = m.gamma * (f.transpose() * D * m.P * f);
  Vector b = f.transpose() * D * m.R;
  return LinearTdSystem(std::move(mw), std::move(mtheta), std::move(b));
}

Vector grad_w(const LinearTdSystem& sys, const Vector& theta, const Vector& w) {
  require_dim(theta, sys.dim(), "theta");
  require_dim(w, sys.dim(), "w");
  return sys.Mw() * w - sys.Mtheta() * theta - sys.b();
}

double objective_value(const Mrp& m, const FeatureMap& phi, const UpdateDistribution& d,
                       const Vector& theta, const Vector& w) {
  require_dim(theta, phi.features(), "theta");
  require_dim(w, phi.features(), "w");
  if (phi.states() != m.size() || d.size() != m.size()) {
    throw DimensionMismatch("MRP, Phi and d disagree on the number of states");
  }
  const Vector residual = m.R + m.gamma * (m.P * (phi.matrix() * theta)) - phi.matrix() * w;
  return 0.5 * (d.weights().array() * residual.array().square()).sum();
}

Vector exact_step(const LinearTdSystem& sys, const Vector& theta) {
  require_dim(theta, sys.dim(), "theta");
  return sys.solve_w(sys.Mtheta() * theta + sys.b());
}

double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch(fmt::format("spectral radius of non-square {}x{} matrix", a.rows(),
                                        a.cols()));
  }
  if (!a.allFinite()) throw InvalidInput("matrix has non-finite entries");
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> eig(a, false);
  if (eig.info() != Eigen::Success) throw NumericalError("eigenvalue decomposition failed");
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

ConvergencePrediction predict_convergence(const LinearTdSystem& sys) {
  const double rho = spectral_radius(sys.A());
  return {rho < 1.0, rho};
}

Matrix iteration_matrix(const LinearTdSystem& sys, double alpha, std::size_t K) {
  if (!(alpha > 0.0)) throw InvalidInput("step size must be positive");
  if (K < 1) throw InvalidInput("K must be >= 1");
  const Eigen::Index m = sys.dim();
  const Matrix step = Matrix::Identity(m, m) - alpha * sys.Mw();
  Matrix b = Matrix::Identity(m, m);
  for (std::size_t k = 0; k < K; ++k) b = (b * step).eval();
  return b + (Matrix::Identity(m, m) - b) * sys.A();
}

Matrix projection_matrix(const FeatureMap& phi, const UpdateDistribution& d) {
  const Matrix gram = weighted_gram(phi, d);
  Eigen::LLT<Matrix> llt(gram);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  if (llt.info() != Eigen::Success || !(eig.eigenvalues()(0) > kSingularityThreshold)) {
    throw SingularSystem("Phi^T D Phi is singular");
  }
  return phi.matrix() * llt.solve(phi.matrix().transpose() * d.weights().asDiagonal());
}

}  // namespace tdlab
