#include <gtest/gtest.h>

#include <limits>

#include "support/instances.hpp"
#include "support/oracles.hpp"
#include "tdlab/analysis.hpp"
#include "tdlab/errors.hpp"
#include "tdlab/objectives.hpp"

using namespace tdlab;

namespace {

void expect_gradient_matches(const Objective& obj, instances::Rng& rng, int probes, double box) {
  for (int i = 0; i < probes; ++i) {
    const Vector theta = rng.uniform_vector(obj.dim(), -box, box);
    const Vector w = rng.uniform_vector(obj.dim(), -box, box);
    const Vector fd = oracle::central_difference(
        [&](const Vector& x) { return obj.value(theta, x); }, w);
    EXPECT_LT(oracle::relative_error(obj.grad_w(theta, w), fd), 1e-5) << obj.name();
  }
}

ObjectivePtr counterexample_uniform(double eps, double gamma) {
  const auto ce = counterexample_build({eps, gamma, 0.5});
  return quadratic_linear(ce.mrp, ce.phi, UpdateDistribution(Eigen::Vector3d(1, 1, 0)));
}

}  // namespace

TEST(QuadraticLinear, CounterExampleConstants) {
  const auto fc = *counterexample_uniform(0.1, 0.9)->analytic_constants();
  EXPECT_NEAR(fc.F_w, 5.0, 1e-12);
  EXPECT_NEAR(fc.L, 5.0, 1e-12);
  EXPECT_NEAR(fc.F_theta, 0.9 * 5.6, 1e-12);
  EXPECT_FALSE(fc.estimated);
}

TEST(QuadraticLinear, TabularConstantsAreWeightExtremes) {
  instances::Rng rng(21);
  const Mrp m = instances::random_mrp(rng, 4, 0.8);
  const Vector d = rng.simplex(4);
  const auto fc = *quadratic_linear(m, FeatureMap(Matrix::Identity(4, 4)), UpdateDistribution(d))
                       ->analytic_constants();
  EXPECT_NEAR(fc.F_w, d.minCoeff(), 1e-12);
  EXPECT_NEAR(fc.L, d.maxCoeff(), 1e-12);
}

TEST(QuadraticLinear, FixedPointHasZeroGradient) {
  instances::Rng rng(22);
  const auto inst = instances::random_linear(rng);
  const auto obj = quadratic_linear(inst.mrp, inst.phi, inst.d);
  const Vector& ts = obj->linear_system()->theta_star();
  EXPECT_LT(obj->grad_w(ts, ts).norm(), 1e-10);
}

TEST(QuadraticLinear, EigenvalueOfTargetMatrixIsRecordedSeparately) {
  Matrix mw = Matrix::Identity(2, 2);
  Matrix mtheta(2, 2);
  mtheta << 0, 0.5, 0, 0;
  const QuadraticObjective q(mw, mtheta, Vector::Zero(2));
  EXPECT_NEAR(q.analytic_constants()->F_theta, 0.5, 1e-14);
  EXPECT_NEAR(q.target_lambda_max(), 0.0, 1e-14);
}

TEST(RidgeRegularized, ShiftsConstants) {
  EXPECT_THROW(ridge_regularized(counterexample_uniform(0.1, 0.9), 0.0), InvalidInput);
  const QuadraticObjective base(Matrix::Identity(1, 1), Matrix::Constant(1, 1, 0.3), Vector::Zero(1));
  const auto ridge = ridge_regularized(std::make_shared<QuadraticObjective>(base), 0.5);
  const auto fc = *ridge->analytic_constants();
  EXPECT_NEAR(fc.F_w, 1.5, 1e-14);
  EXPECT_NEAR(fc.L, 1.5, 1e-14);
  EXPECT_NEAR(fc.F_theta, 0.3, 1e-14);
  const Vector theta = Vector::Constant(1, 2.0);
  const Vector w = Vector::Constant(1, -1.0);
  EXPECT_NEAR(ridge->value(theta, w), base.value(theta, w) + 0.25, 1e-14);
  EXPECT_NEAR(ridge->grad_w(theta, w)(0), base.grad_w(theta, w)(0) - 0.5, 1e-14);
}

TEST(RidgeRegularized, EstimatedStrongConvexityAtLeastLambda) {
  instances::Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = instances::random_linear(rng);
    const auto huber = ridge_regularized(huber_linear(inst.mrp, inst.phi, inst.d, 0.5), 1.0);
    EXPECT_GE(estimate_constants(*huber, {}, 500, trial).F_w, 1.0 - 1e-8);
  }
}

TEST(RidgeRegularized, StrongConvexityInequalityAtSampledTriples) {
  instances::Rng rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = instances::random_linear(rng);
    const double lambda = rng.uniform(0.1, 2.0);
    const auto obj = ridge_regularized(logistic_linear(inst.mrp, inst.phi, inst.d, 1.0), lambda);
    for (int i = 0; i < 100; ++i) {
      const Vector theta = rng.uniform_vector(obj->dim(), -10, 10);
      const Vector w1 = rng.uniform_vector(obj->dim(), -10, 10);
      const Vector w2 = rng.uniform_vector(obj->dim(), -10, 10);
      const double lhs = obj->value(theta, w2);
      const double rhs = obj->value(theta, w1) + obj->grad_w(theta, w1).dot(w2 - w1) +
                         0.5 * lambda * (w2 - w1).squaredNorm();
      EXPECT_GE(lhs, rhs - 1e-9 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(HuberLinear, InfiniteDeltaIsQuadratic) {
  instances::Rng rng(25);
  EXPECT_THROW(huber_linear(instances::random_mrp(rng, 2, 0.5), FeatureMap(Matrix::Identity(2, 2)),
                            UpdateDistribution(Vector::Ones(2)), 0.0),
               InvalidInput);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = instances::random_linear(rng);
    const auto huber =
        huber_linear(inst.mrp, inst.phi, inst.d, std::numeric_limits<double>::infinity());
    const auto quad = quadratic_linear(inst.mrp, inst.phi, inst.d);
    const Vector theta = rng.uniform_vector(quad->dim(), -10, 10);
    const Vector w = rng.uniform_vector(quad->dim(), -10, 10);
    EXPECT_NEAR(huber->value(theta, w), quad->value(theta, w),
                1e-10 * std::max(1.0, quad->value(theta, w)));
  }
}

TEST(HuberLinear, ZeroResidual) {
  instances::Rng rng(26);
  auto inst = instances::random_linear(rng);
  inst.mrp.R.setZero();
  const auto obj = huber_linear(inst.mrp, inst.phi, inst.d, 1.0);
  const Vector zero = Vector::Zero(obj->dim());
  EXPECT_EQ(obj->value(zero, zero), 0.0);
  EXPECT_EQ(obj->grad_w(zero, zero).norm(), 0.0);
}

TEST(LogisticLinear, ZeroAndSmallResiduals) {
  const UpdateDistribution d(Vector::Ones(1));
  const Mrp m = make_mrp(Matrix::Ones(1, 1), Vector::Zero(1), 0.5);
  const FeatureMap phi(Matrix::Ones(1, 1));
  EXPECT_THROW(logistic_linear(m, phi, d, -1.0), InvalidInput);
  const double scale = 3.0;
  const auto obj = logistic_linear(m, phi, d, scale);
  const Vector zero = Vector::Zero(1);
  EXPECT_EQ(obj->value(zero, zero), 0.0);
  EXPECT_EQ(obj->grad_w(zero, zero).norm(), 0.0);
  // Target is 0.5 theta; residual 0.5 theta - w.
  for (double r : {scale / 100, -scale / 200, scale / 1000}) {
    const double quad = 0.5 * r * r;
    EXPECT_NEAR(obj->value(zero, Vector::Constant(1, -r)), quad, 0.01 * quad);
  }
}

TEST(GradientCheck, EveryObjectiveFamily) {
  instances::Rng rng(27);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = instances::random_linear(rng);
    const auto quad = quadratic_linear(inst.mrp, inst.phi, inst.d);
    expect_gradient_matches(*quad, rng, 20, 5);
    expect_gradient_matches(*huber_linear(inst.mrp, inst.phi, inst.d, 0.7), rng, 20, 5);
    expect_gradient_matches(*logistic_linear(inst.mrp, inst.phi, inst.d, 2.0), rng, 20, 5);
    expect_gradient_matches(*ridge_regularized(quad, 0.3), rng, 20, 5);
    auto cp = instances::random_control(rng, 3, 2, 2);
    expect_gradient_matches(*control_quadratic(cp), rng, 20, 5);
    cp.greedify = Greedification::Softmax;
    cp.tau = 0.5;
    expect_gradient_matches(*control_quadratic(cp), rng, 20, 5);
  }
}

TEST(ControlQuadratic, SingleActionReducesToPrediction) {
  instances::Rng rng(28);
  for (int trial = 0; trial < 10; ++trial) {
    auto cp = instances::random_control(rng, 4, 1, 2);
    const auto induced = induced_prediction(cp);
    const auto ctrl = control_quadratic(cp);
    const auto quad = quadratic_linear(induced.mrp, induced.phi, induced.d);
    for (int i = 0; i < 10; ++i) {
      const Vector theta = rng.uniform_vector(2, -5, 5);
      const Vector w = rng.uniform_vector(2, -5, 5);
      EXPECT_NEAR(ctrl->value(theta, w), quad->value(theta, w),
                  1e-10 * std::max(1.0, quad->value(theta, w)));
    }
  }
}

TEST(ControlQuadratic, ZeroRewardsAtOrigin) {
  instances::Rng rng(29);
  auto cp = instances::random_control(rng, 3, 2, 2);
  cp.reward.setZero();
  const Vector zero = Vector::Zero(2);
  EXPECT_EQ(control_quadratic(cp)->value(zero, zero), 0.0);
}

TEST(ControlQuadratic, RejectsBadProblems) {
  instances::Rng rng(30);
  auto cp = instances::random_control(rng, 3, 2, 2);
  cp.greedify = Greedification::Softmax;
  cp.tau = 0.0;
  EXPECT_THROW(control_quadratic(cp), InvalidInput);
  cp.tau = 1.0;
  cp.features.clear();
  EXPECT_THROW(control_quadratic(cp), InvalidInput);
}

TEST(ControlQuadratic, SoftmaxTemperatureChangesValueContinuously) {
  instances::Rng rng(31);
  auto cp = instances::random_control(rng, 3, 2, 2);
  cp.greedify = Greedification::Softmax;
  const Vector theta = rng.uniform_vector(2, -5, 5);
  const Vector w = rng.uniform_vector(2, -5, 5);
  cp.tau = 1.0;
  const double base = control_quadratic(cp)->value(theta, w);
  cp.tau = 1.0 + 1e-7;
  const double near = control_quadratic(cp)->value(theta, w);
  cp.tau = 2.0;
  const double far = control_quadratic(cp)->value(theta, w);
  EXPECT_LT(std::abs(near - base), 1e-5 * std::max(1.0, std::abs(base)));
  EXPECT_NE(far, base);
}

TEST(Greedify, MaxTiesAndMellowmaxBounds) {
  const Vector q = Eigen::Vector3d(1.0, 3.0, 3.0);
  EXPECT_EQ(greedy_action(q), 1);
  EXPECT_EQ(greedify(Greedification::Max, 1.0, q), 3.0);
  const double soft = greedify(Greedification::Softmax, 0.5, q);
  EXPECT_LE(soft, 3.0);
  EXPECT_GE(soft, q.mean());
  EXPECT_NEAR(greedify(Greedification::Softmax, 1e-4, q), 3.0, 1e-3);
}

TEST(EstimateConstants, CounterExampleWithinOnePercent) {
  const auto obj = counterexample_uniform(0.1, 0.9);
  const auto est = estimate_constants(*obj, {}, 1000, 1);
  EXPECT_TRUE(est.estimated);
  EXPECT_NEAR(est.F_theta, 0.9 * 5.6, 0.01 * 0.9 * 5.6);
  EXPECT_NEAR(est.F_w, 5.0, 0.05);
  EXPECT_NEAR(est.L, 5.0, 0.05);
  EXPECT_THROW(estimate_constants(*obj, {}, 99, 1), InvalidInput);
}

TEST(EstimateConstants, ThetaIndependentObjective) {
  const QuadraticObjective q(Matrix::Identity(2, 2), Matrix::Zero(2, 2), Vector::Ones(2));
  EXPECT_EQ(estimate_constants(q, {}, 200, 3).F_theta, 0.0);
}

TEST(EstimateConstants, BracketsAnalyticConstants) {
  instances::Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = instances::random_linear(rng);
    const auto obj = quadratic_linear(inst.mrp, inst.phi, inst.d);
    const auto exact = *obj->analytic_constants();
    const auto est = estimate_constants(*obj, {}, 300, trial);
    EXPECT_LE(est.F_theta, exact.F_theta * (1 + 1e-9));
    EXPECT_LE(est.L, exact.L * (1 + 1e-9));
    EXPECT_GE(est.F_w, exact.F_w * (1 - 1e-9));
  }
}

TEST(EstimateConstants, ConvergesOnScalarInstances) {
  instances::Rng rng(33);
  for (int trial = 0; trial < 5; ++trial) {
    const QuadraticObjective q(Matrix::Constant(1, 1, rng.uniform(0.5, 3)),
                               Matrix::Constant(1, 1, rng.uniform(-2, 2)),
                               Vector::Constant(1, rng.uniform(-1, 1)));
    const auto exact = *q.analytic_constants();
    const auto est = estimate_constants(q, {}, 10000, trial);
    EXPECT_NEAR(est.F_theta, exact.F_theta, 0.01 * exact.F_theta);
    EXPECT_NEAR(est.F_w, exact.F_w, 0.01 * exact.F_w);
    EXPECT_NEAR(est.L, exact.L, 0.01 * exact.L);
  }
}
