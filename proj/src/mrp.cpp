#include "tdlab/mrp.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tdlab/errors.hpp"

namespace tdlab {

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

std::vector<Eigen::Index> non_terminal_states(const Mrp& m) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index s = 0; s < m.size(); ++s) {
    if (!m.terminal[static_cast<std::size_t>(s)]) idx.push_back(s);
  }
  return idx;
}

Vector checked_restart(const Mrp& m, const std::optional<Vector>& restart) {
  if (!restart) {
    throw InvalidInput("MRP has terminal states: a restart distribution is required");
  }
  const Vector& r = *restart;
  if (r.size() != m.size()) {
    throw DimensionMismatch(
        fmt::format("restart distribution has length {}, expected {}", r.size(), m.size()));
  }
  for (Eigen::Index s = 0; s < r.size(); ++s) {
    if (!std::isfinite(r(s)) || r(s) < 0.0) {
      throw InvalidInput(fmt::format("restart weight {} is negative or non-finite", s));
    }
    if (m.terminal[static_cast<std::size_t>(s)] && r(s) != 0.0) {
      throw InvalidInput(fmt::format("restart distribution puts mass on terminal state {}", s));
    }
  }
  const double total = r.sum();
  if (!(total > 0.0)) throw InvalidInput("restart distribution has no mass");
  return r / total;
}

}  // namespace

bool Mrp::has_terminal() const {
  return std::any_of(terminal.begin(), terminal.end(), [](bool t) { return t; });
}

std::vector<std::string> validate_mrp(const Mrp& m) {
  std::vector<std::string> violations;
  const Eigen::Index n = m.P.rows();
  if (n == 0) violations.emplace_back("empty state space");
  if (m.P.cols() != n) {
    violations.push_back(fmt::format("P is {}x{}, not square", n, m.P.cols()));
    return violations;
  }
  if (m.R.size() != n) {
    violations.push_back(fmt::format("R has length {}, expected {}", m.R.size(), n));
  }
  if (m.terminal.size() != static_cast<std::size_t>(n)) {
    violations.push_back(
        fmt::format("terminal has length {}, expected {}", m.terminal.size(), n));
  }
  if (!(m.gamma > 0.0 && m.gamma < 1.0)) {
    violations.push_back(fmt::format("gamma {} outside (0, 1)", m.gamma));
  }
  if (!violations.empty() && (m.R.size() != n || m.terminal.size() != static_cast<std::size_t>(n))) {
    return violations;
  }

  for (Eigen::Index s = 0; s < n; ++s) {
    bool finite = m.P.row(s).allFinite() && std::isfinite(m.R(s));
    if (!finite) {
      violations.push_back(fmt::format("state {}: non-finite entry", s));
      continue;
    }
    if ((m.P.row(s).array() < 0.0).any()) {
      violations.push_back(fmt::format("state {}: negative transition probability", s));
    }
    const double sum = m.P.row(s).sum();
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
      violations.push_back(fmt::format("state {}: row not stochastic (sums to {})", s, sum));
    }
    if (m.terminal[static_cast<std::size_t>(s)]) {
      if (m.P(s, s) != 1.0) {
        violations.push_back(fmt::format("state {}: terminal state does not self-loop", s));
      }
      if (m.R(s) != 0.0) {
        violations.push_back(fmt::format("state {}: terminal reward nonzero", s));
      }
    }
  }
  return violations;
}

Mrp make_mrp(Matrix P, Vector R, double gamma, std::vector<bool> terminal) {
  if (terminal.empty()) terminal.assign(static_cast<std::size_t>(P.rows()), false);
  for (Eigen::Index s = 0; s < P.rows(); ++s) {
    const double sum = P.row(s).sum();
    if (std::isfinite(sum) && sum > 0.0 && std::abs(sum - 1.0) <= kStochasticTolerance) {
      P.row(s) /= sum;
    }
  }
  Mrp m{std::move(P), std::move(R), gamma, std::move(terminal)};
  if (auto violations = validate_mrp(m); !violations.empty()) {
    throw InvalidInput("invalid MRP: " + join(violations));
  }
  return m;
}

UpdateDistribution::UpdateDistribution(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) throw InvalidInput("update distribution is empty");
  if (!weights_.allFinite()) throw InvalidInput("update distribution has non-finite weights");
  if ((weights_.array() < 0.0).any()) {
    throw InvalidInput("update distribution has negative weights");
  }
  if (!(weights_.maxCoeff() > 0.0)) {
    throw InvalidInput("update distribution has no positive weight");
  }
}

UpdateDistribution UpdateDistribution::scaled(double c) const {
  if (!(c > 0.0)) throw InvalidInput("distribution scale must be positive");
  return UpdateDistribution(weights_ * c);
}

UpdateDistribution UpdateDistribution::normalized() const {
  return UpdateDistribution(weights_ / total());
}

void check_distribution(const Mrp& m, const UpdateDistribution& d) {
  if (d.size() != m.size()) {
    throw DimensionMismatch(
        fmt::format("update distribution has length {}, expected {}", d.size(), m.size()));
  }
  for (Eigen::Index s = 0; s < m.size(); ++s) {
    if (m.terminal[static_cast<std::size_t>(s)] && d(s) != 0.0) {
      throw InvalidInput(fmt::format("update distribution weights terminal state {}", s));
    }
  }
}

ValueVector bellman_apply(const Mrp& m, const ValueVector& v) {
  if (v.size() != m.size()) {
    throw DimensionMismatch(
        fmt::format("value vector has length {}, expected {}", v.size(), m.size()));
  }
  return m.R + m.gamma * (m.P * v);
}

ValueVector true_values(const Mrp& m) {
  const Eigen::Index n = m.size();
  const Matrix system = Matrix::Identity(n, n) - m.gamma * m.P;
  Eigen::FullPivLU<Matrix> lu(system);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) {
    throw NumericalError("I - gamma P is singular; MRP invariants must have been violated");
  }
  ValueVector v = lu.solve(m.R);
  for (Eigen::Index s = 0; s < n; ++s) {
    if (m.terminal[static_cast<std::size_t>(s)]) v(s) = 0.0;
  }
  return v;
}

Matrix restart_kernel(const Mrp& m, const std::optional<Vector>& restart) {
  if (!m.has_terminal()) return m.P;
  const Vector r = checked_restart(m, restart);
  Matrix kernel = m.P;
  for (Eigen::Index s = 0; s < m.size(); ++s) {
    if (m.terminal[static_cast<std::size_t>(s)]) {
      kernel.row(s) = r.transpose();
      continue;
    }
    double absorbed = 0.0;
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      if (m.terminal[static_cast<std::size_t>(j)]) {
        absorbed += kernel(s, j);
        kernel(s, j) = 0.0;
      }
    }
    kernel.row(s) += absorbed * r.transpose();
  }
  return kernel;
}

UpdateDistribution stationary_distribution(const Mrp& m, const std::optional<Vector>& restart) {
  const Matrix kernel = restart_kernel(m, restart);
  const auto states = non_terminal_states(m);
  const auto k = static_cast<Eigen::Index>(states.size());
  if (k == 0) throw InvalidInput("MRP has no non-terminal states");

  Matrix q(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) q(i, j) = kernel(states[i], states[j]);
  }

  const Matrix balance = Matrix::Identity(k, k) - q.transpose();
  Eigen::FullPivLU<Matrix> lu(balance);
  lu.setThreshold(1e-10);
  if (lu.rank() < k - 1) {
    throw NumericalError(fmt::format(
        "reducible chain: {} closed classes, stationary distribution is not unique",
        k - lu.rank()));
  }

  Matrix augmented(k + 1, k);
  augmented << balance, Eigen::RowVectorXd::Ones(k);
  Vector rhs = Vector::Zero(k + 1);
  rhs(k) = 1.0;
  Vector pi = augmented.colPivHouseholderQr().solve(rhs);
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();

  Vector d = Vector::Zero(m.size());
  for (Eigen::Index i = 0; i < k; ++i) d(states[i]) = pi(i);
  return UpdateDistribution(std::move(d));
}

double weighted_norm(const Vector& v, const UpdateDistribution& d) {
  if (v.size() != d.size()) {
    throw DimensionMismatch(
        fmt::format("vector has length {}, distribution has length {}", v.size(), d.size()));
  }
  return std::sqrt((d.weights().array() * v.array().square()).sum());
}

}  // namespace tdlab
