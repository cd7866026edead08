#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tdlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// State values in reward units, one entry per state. Terminal entries are 0.
using ValueVector = Eigen::VectorXd;

/// Rows of P must sum to one within this tolerance; rows inside it are
/// renormalized, rows outside it are rejected.
inline constexpr double kStochasticTolerance = 1e-12;

/// Finite Markov reward process <S, R, P, gamma>.
///
/// R(s) is the expected reward on transitioning out of s. Terminal states
/// self-loop with probability one and carry zero reward, so their value is 0.
struct Mrp {
  Matrix P;
  Vector R;
  double gamma = 0.0;
  std::vector<bool> terminal;

  Eigen::Index size() const { return P.rows(); }
  bool has_terminal() const;
};

/// Lists every violated invariant of `m`; empty when valid.
std::vector<std::string> validate_mrp(const Mrp& m);

/// Builds a validated MRP. Rows whose sums are within kStochasticTolerance of
/// one are renormalized; anything else that fails validation throws
/// InvalidInput with the full violation list. An empty `terminal` means no
/// terminal states.
Mrp make_mrp(Matrix P, Vector R, double gamma, std::vector<bool> terminal = {});

/// Nonnegative per-state update weights d. Not necessarily normalized: every
/// convergence conclusion drawn from d is invariant to positive scaling.
class UpdateDistribution {
 public:
  explicit UpdateDistribution(Vector weights);

  const Vector& weights() const { return weights_; }
  Eigen::Index size() const { return weights_.size(); }
  double operator()(Eigen::Index s) const { return weights_(s); }
  double total() const { return weights_.sum(); }

  UpdateDistribution scaled(double c) const;
  UpdateDistribution normalized() const;

 private:
  Vector weights_;
};

/// Throws if `d` does not fit `m` (length, or weight on a terminal state).
void check_distribution(const Mrp& m, const UpdateDistribution& d);

/// Tv = R + gamma P v.
ValueVector bellman_apply(const Mrp& m, const ValueVector& v);

/// Unique fixed point of the Bellman operator, (I - gamma P)^{-1} R.
ValueVector true_values(const Mrp& m);

/// Transition kernel with episodic restarts: probability mass flowing into a
/// terminal state is sent to `restart` instead, and terminal rows are replaced
/// by `restart`. Without terminal states this is P itself.
Matrix restart_kernel(const Mrp& m, const std::optional<Vector>& restart = std::nullopt);

/// Stationary distribution of restart_kernel(m, restart), normalized over the
/// non-terminal states with zero terminal weight. A restart distribution over
/// non-terminal states is required when `m` has terminal states. Throws
/// NumericalError when the chain has more than one closed class.
UpdateDistribution stationary_distribution(const Mrp& m,
                                           const std::optional<Vector>& restart = std::nullopt);

/// ||v||_D = sqrt(sum_s d(s) v(s)^2).
double weighted_norm(const Vector& v, const UpdateDistribution& d);

}  // namespace tdlab
