#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "supcal/errors.hpp"
#include "supcal/sensor_models.hpp"
#include "test_util.hpp"

using namespace supcal;
using namespace supcal::lie;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

GroupElement random_state(std::mt19937& rng) {
  const VectorXd xi = testutil::random_vector(rng, 9);
  return GroupElement::se2_3(so3_exp(xi.head<3>()), 5.0 * xi.segment<3>(3), xi.tail<3>());
}

ImuInput random_input(std::mt19937& rng, double dt) {
  ImuInput u;
  u.omega = testutil::random_vector(rng, 3, 0.5);
  u.accel = testutil::random_vector(rng, 3, 2.0) + Vector3d(0, 0, 9.81);
  u.dt = dt;
  return u;
}

// Body-frame error after one step as a function of the body-frame error before it.
VectorXd step_error(const GroupElement& x, const ImuInput& u, const VectorXd& zeta, const Vector9d& w) {
  const GroupElement ref = propagate(x, u);
  return log(ref.inverse() * propagate(x * exp(GroupKind::SE2_3, zeta), u, w));
}

}  // namespace

TEST(Propagate, HoverStaysPut) {
  ImuInput u;
  u.accel = Vector3d(0, 0, 9.81);
  u.dt = 0.01;
  GroupElement x = GroupElement::identity(GroupKind::SE2_3);
  for (int i = 0; i < 100; ++i) x = propagate(x, u);
  EXPECT_LT(x.position().norm(), 1e-12);
  EXPECT_LT(x.velocity().norm(), 1e-12);
  EXPECT_TRUE(x.rotation().isIdentity(1e-15));
}

TEST(Propagate, ConstantForwardAcceleration) {
  ImuInput u;
  u.accel = Vector3d(1.0, 0.0, 9.81);
  u.dt = 0.1;
  const GroupElement x = propagate(GroupElement::identity(GroupKind::SE2_3), u);
  EXPECT_LT((x.velocity() - Vector3d(0.1, 0, 0)).norm(), 1e-12);
  EXPECT_LT((x.position() - Vector3d(0.005, 0, 0)).norm(), 1e-12);
}

TEST(Propagate, MatchesSubsteppedIntegrator) {
  ImuInput u;
  u.dt = 1e-3;
  GroupElement x = GroupElement::se2_3(Eigen::Matrix3d::Identity(), Vector3d::Zero(), Vector3d(1, 0, 0));
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Vector3d p = Vector3d::Zero(), v(1, 0, 0);
  const Vector3d g = kDefaultGravity;
  for (int k = 0; k < 1000; ++k) {
    const double t = k * u.dt;
    u.omega = Vector3d(0.1 * std::sin(t), 0.05, 0.3);
    u.accel = Vector3d(0.5 * std::cos(2 * t), 0.2, 9.81);
    x = propagate(x, u);
    const double h = u.dt / 10;
    for (int s = 0; s < 10; ++s) {
      const Eigen::Matrix3d Rm = R * so3_exp(u.omega * h / 2);
      const Vector3d acc = Rm * u.accel + g;
      p += v * h + 0.5 * acc * h * h;
      v += acc * h;
      R = R * so3_exp(u.omega * h);
    }
  }
  EXPECT_LT((x.position() - p).norm(), 1e-3);
  EXPECT_LT((x.rotation() - R).norm(), 1e-9);
}

TEST(Propagate, RejectsBadStep) {
  ImuInput u;
  u.dt = 0.0;
  EXPECT_THROW(propagate(GroupElement::identity(GroupKind::SE2_3), u), Error);
  u.dt = 1.5;
  EXPECT_THROW(propagate(GroupElement::identity(GroupKind::SE2_3), u), Error);
}

TEST(Transition, MatchesFiniteDifferences) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const GroupElement x = random_state(rng);
    const ImuInput u = random_input(rng, 0.05);
    const Matrix9d phi = state_transition_jacobian(u);
    const double h = 1e-6;
    for (int i = 0; i < 9; ++i) {
      VectorXd e = VectorXd::Zero(9);
      e[i] = h;
      const VectorXd fd = (step_error(x, u, e, Vector9d::Zero()) - step_error(x, u, -e, Vector9d::Zero())) / (2 * h);
      EXPECT_LT((fd - phi.col(i)).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(Transition, IdentityAtZeroStep) {
  ImuInput u;
  u.omega = Vector3d(0.3, -0.2, 0.1);
  u.accel = Vector3d(1, 2, 3);
  u.dt = 0.0;
  EXPECT_TRUE(state_transition_jacobian(u).isIdentity(0.0));
}

TEST(Transition, TwoStepsCompose) {
  std::mt19937 rng(32);
  const GroupElement x = random_state(rng);
  const ImuInput u1 = random_input(rng, 1e-3), u2 = random_input(rng, 1e-3);
  const Matrix9d composed = state_transition_jacobian(u2) * state_transition_jacobian(u1);
  const GroupElement ref = propagate(propagate(x, u1), u2);
  const double h = 1e-6;
  for (int i = 0; i < 9; ++i) {
    VectorXd e = VectorXd::Zero(9);
    e[i] = h;
    auto two = [&](const VectorXd& z) {
      return log(ref.inverse() * propagate(propagate(x * exp(GroupKind::SE2_3, z), u1), u2));
    };
    const VectorXd fd = (two(e) - two(-e)) / (2 * h);
    EXPECT_LT((fd - composed.col(i)).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(NoiseJacobian, MatchesFiniteDifferences) {
  std::mt19937 rng(33);
  const GroupElement x = random_state(rng);
  const ImuInput u = random_input(rng, 0.05);
  const Matrix9d B = noise_jacobian(u);
  const double h = 1e-6;
  for (int i : {0, 1, 2, 6, 7, 8}) {
    Vector9d w = Vector9d::Zero();
    w[i] = h;
    const VectorXd fd = (step_error(x, u, VectorXd::Zero(9), w) - step_error(x, u, VectorXd::Zero(9), -w)) / (2 * h);
    EXPECT_LT((fd - B.col(i)).cwiseAbs().maxCoeff(), 1e-5);
  }
  EXPECT_TRUE(B.middleCols<3>(3).isZero());
}

TEST(Residuals, ZeroAtTruth) {
  std::mt19937 rng(34);
  const GroupElement a = random_state(rng), b = random_state(rng);
  EXPECT_LT(residual_unary(b, UnaryMeasurement{b.position()}).r.norm(), 1e-14);
  const BinaryMeasurement m{(a.inverse() * b).to(GroupKind::SE3)};
  EXPECT_LT(residual_binary(a, b, m).r.norm(), 1e-12);
}

TEST(Residuals, JacobiansMatchFiniteDifferences) {
  std::mt19937 rng(35);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    const GroupElement a = random_state(rng), b = random_state(rng);
    const UnaryMeasurement um{b.position() + testutil::random_vector(rng, 3)};
    const UnaryResidual ur = residual_unary(b, um);
    const GroupElement noisy = exp(GroupKind::SE3, testutil::random_vector(rng, 6, 0.2)) *
                               (a.inverse() * b).to(GroupKind::SE3);
    const RelativeResidual br = residual_binary(a, b, BinaryMeasurement{noisy});
    for (int i = 0; i < 9; ++i) {
      VectorXd e = VectorXd::Zero(9);
      e[i] = h;
      const VectorXd fdu = (residual_unary(b * exp(GroupKind::SE2_3, e), um).r -
                            residual_unary(b * exp(GroupKind::SE2_3, -e), um).r) / (2 * h);
      EXPECT_LT((fdu + ur.H.col(i)).cwiseAbs().maxCoeff(), 1e-5);
      const VectorXd fda = (residual_binary(a * exp(GroupKind::SE2_3, e), b, BinaryMeasurement{noisy}).r -
                            residual_binary(a * exp(GroupKind::SE2_3, -e), b, BinaryMeasurement{noisy}).r) / (2 * h);
      const VectorXd fdb = (residual_binary(a, b * exp(GroupKind::SE2_3, e), BinaryMeasurement{noisy}).r -
                            residual_binary(a, b * exp(GroupKind::SE2_3, -e), BinaryMeasurement{noisy}).r) / (2 * h);
      EXPECT_LT((fda + br.H_a.col(i)).cwiseAbs().maxCoeff(), 1e-5);
      EXPECT_LT((fdb + br.H_b.col(i)).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(Residuals, SupervisoryOnPoseFrames) {
  std::mt19937 rng(36);
  const GroupElement a = random_state(rng).to(GroupKind::SE3), b = random_state(rng).to(GroupKind::SE3);
  SupervisoryMeasurement m;
  m.i = 3;
  m.j = 9;
  m.y = exp(GroupKind::SE3, testutil::random_vector(rng, 6, 0.1)) * (a.inverse() * b);
  const RelativeResidual r = residual_supervisory(a, b, m);
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i) {
    VectorXd e = VectorXd::Zero(6);
    e[i] = h;
    const VectorXd fd = (residual_supervisory(a, b * exp(GroupKind::SE3, e), m).r -
                         residual_supervisory(a, b * exp(GroupKind::SE3, -e), m).r) / (2 * h);
    EXPECT_LT((fd + r.H_b.col(i)).cwiseAbs().maxCoeff(), 1e-5);
  }
  m.j = m.i;
  EXPECT_THROW(residual_supervisory(a, b, m), Error);
}

TEST(Residuals, JacobianDerivativesMatchFiniteDifferences) {
  std::mt19937 rng(37);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    const GroupElement a = random_state(rng), b = random_state(rng);
    const GroupElement y = exp(GroupKind::SE3, testutil::random_vector(rng, 6, 0.3)) * (a.inverse() * b).to(GroupKind::SE3);
    const VectorXd da = testutil::random_vector(rng, 9), db = testutil::random_vector(rng, 9);
    MatrixXd dHa, dHb;
    relative_jacobian_derivative(a, b, y, da, db, dHa, dHb);
    const RelativeResidual p = residual_relative(a * exp(GroupKind::SE2_3, h * da), b * exp(GroupKind::SE2_3, h * db), y);
    const RelativeResidual m = residual_relative(a * exp(GroupKind::SE2_3, -h * da), b * exp(GroupKind::SE2_3, -h * db), y);
    EXPECT_LT(((p.H_a - m.H_a) / (2 * h) - dHa).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT(((p.H_b - m.H_b) / (2 * h) - dHb).cwiseAbs().maxCoeff(), 1e-6);

    const Vector9d d = testutil::random_vector(rng, 9);
    const auto up = residual_unary(b * exp(GroupKind::SE2_3, h * d), UnaryMeasurement{}).H;
    const auto um = residual_unary(b * exp(GroupKind::SE2_3, -h * d), UnaryMeasurement{}).H;
    EXPECT_LT(((up - um) / (2 * h) - unary_jacobian_derivative(b, d)).cwiseAbs().maxCoeff(), 1e-7);
  }
}
