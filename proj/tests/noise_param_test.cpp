#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "supcal/errors.hpp"
#include "supcal/noise_param.hpp"
#include "test_util.hpp"

using namespace supcal;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

NoiseModel mixed_model() {
  ParamBlock imu{{NoiseTarget::Gyro, NoiseTarget::Accel}, Scheme::ScalarIso};
  ParamBlock gps{{NoiseTarget::Unary}, Scheme::LogDiag};
  ParamBlock vo{{NoiseTarget::Binary}, Scheme::Cholesky};
  return NoiseModel({imu, gps, vo});
}

std::vector<MatrixXd> all_targets(const RealizedNoise& r) {
  return {r.Q_g, r.Q_a, r.Sigma_u, r.Sigma_b};
}

std::vector<MatrixXd> all_derivs(const RealizedNoise& r, int j) {
  return {r.dQ_g[j], r.dQ_a[j], r.dSigma_u[j], r.dSigma_b[j]};
}

}  // namespace

TEST(LogDiag, LowerBoundValue) {
  NoiseModel m({ParamBlock{{NoiseTarget::Unary}, Scheme::LogDiag}});
  const RealizedNoise r = m.realize(VectorXd::Constant(3, -6.0));
  EXPECT_NEAR(r.Sigma_u(0, 0), 2.479e-3, 1e-6);
  EXPECT_DOUBLE_EQ(r.Sigma_u(0, 0), std::exp(-6.0));
}

TEST(LogDiag, TiedDiagonalSharesOneSlot) {
  ParamBlock b{{NoiseTarget::Binary}, Scheme::LogDiag};
  b.per_axis = false;
  NoiseModel m({b});
  ASSERT_EQ(m.size(), 1);
  const RealizedNoise r = m.realize(VectorXd::Constant(1, std::log(0.5)));
  EXPECT_TRUE(r.Sigma_b.isApprox(0.5 * Matrix6d::Identity()));
}

TEST(Cholesky, IdentityAndDiagonalDerivative) {
  NoiseModel m({ParamBlock{{NoiseTarget::Unary}, Scheme::Cholesky}});
  ASSERT_EQ(m.size(), 6);
  const RealizedNoise r = m.realize(VectorXd::Zero(6));
  EXPECT_TRUE(r.Sigma_u.isIdentity(0.0));
  // slots 0, 2, 5 are the diagonal of the packed factor
  const int diag[] = {0, 2, 5};
  for (int i = 0; i < 3; ++i) {
    Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
    expected(i, i) = 2.0;
    EXPECT_TRUE(r.dSigma_u[diag[i]].isApprox(expected));
  }
}

TEST(Realize, DerivativesMatchFiniteDifferences) {
  std::mt19937 rng(3);
  const NoiseModel m = mixed_model();
  VectorXd theta = VectorXd::Zero(m.size());
  theta[0] = 0.7;
  for (int i = 1; i < m.size(); ++i) theta[i] = 0.5 * testutil::random_vector(rng, 1)[0];
  const RealizedNoise r = m.realize(theta);
  for (double h : {1e-5, 1e-6}) {
    for (int j = 0; j < m.size(); ++j) {
      VectorXd tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      const auto P = all_targets(m.realize(tp));
      const auto M = all_targets(m.realize(tm));
      const auto D = all_derivs(r, j);
      for (size_t t = 0; t < P.size(); ++t) {
        const MatrixXd fd = (P[t] - M[t]) / (2 * h);
        EXPECT_LT((fd - D[t]).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, D[t].cwiseAbs().maxCoeff()))
            << "slot " << j << " target " << t;
      }
    }
  }
}

TEST(Realize, PsdInsideBox) {
  std::mt19937 rng(4);
  const NoiseModel m = mixed_model();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd theta(m.size());
    for (int i = 0; i < m.size(); ++i) {
      const double lo = std::isfinite(m.lower()[i]) ? m.lower()[i] : -5.0;
      const double hi = std::isfinite(m.upper()[i]) ? m.upper()[i] : 5.0;
      theta[i] = lo + (hi - lo) * u(rng);
    }
    for (const auto& M : all_targets(m.realize(theta))) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
      // eigensolver roundoff scales with the largest eigenvalue
      const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
      EXPECT_GE(es.eigenvalues().minCoeff(), -64 * std::numeric_limits<double>::epsilon() * lmax);
      EXPECT_LT((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
}

TEST(Project, ClampsExamples) {
  NoiseModel m({ParamBlock{{NoiseTarget::Unary}, Scheme::LogDiag}});
  const VectorXd out = m.project(Eigen::Vector3d(3.0, -10.0, 0.0));
  EXPECT_EQ(out, Eigen::Vector3d(2.0, -6.0, 0.0));
  NoiseModel one({[] {
    ParamBlock b{{NoiseTarget::Gyro}, Scheme::LogDiag};
    b.per_axis = false;
    return b;
  }()});
  EXPECT_EQ(one.project(VectorXd::Constant(1, -7.0))[0], -6.0);
}

TEST(Project, IdempotentAndNonExpansive) {
  std::mt19937 rng(5);
  const NoiseModel m = mixed_model();
  for (int i = 0; i < 200; ++i) {
    const VectorXd a = testutil::random_vector(rng, m.size(), 10.0);
    const VectorXd b = testutil::random_vector(rng, m.size(), 10.0);
    const VectorXd pa = m.project(a);
    EXPECT_EQ(m.project(pa), pa);
    EXPECT_LE((pa - m.project(b)).norm(), (a - b).norm() + 1e-12);
    EXPECT_TRUE(m.in_bounds(pa));
  }
}

TEST(Realize, OutOfBoxThrows) {
  NoiseModel m({ParamBlock{{NoiseTarget::Unary}, Scheme::LogDiag}});
  try {
    m.realize(Eigen::Vector3d(0.0, 2.5, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundsViolation);
  }
}

TEST(Realize, UncoveredTargetsUseFixedValues) {
  FixedNoise fixed;
  fixed.Sigma_b = 3.0 * Matrix6d::Identity();
  NoiseModel m({ParamBlock{{NoiseTarget::Unary}, Scheme::LogDiag}}, fixed);
  const RealizedNoise r = m.realize(VectorXd::Zero(3));
  EXPECT_TRUE(r.Sigma_b.isApprox(3.0 * Matrix6d::Identity()));
  EXPECT_TRUE(r.dSigma_b[0].isZero());
}

TEST(Encode, RoundTripsRealize) {
  const NoiseModel m = mixed_model();
  VectorXd theta(m.size());
  theta << 0.3, -1.0, 0.5, 1.5, 0.2, 0.1, -0.3, 0.05, 0.0, 0.4, -0.2, 0.3, 0.0, 0.1, 0.2, -0.1, 0.3, 0.05, 0.2, 0.1, 0.0,
      0.1, 0.0, 0.2, 0.3;
  theta = m.project(theta);
  const RealizedNoise r = m.realize(theta);
  FixedNoise cov{r.Q_g, r.Q_a, r.Sigma_u, r.Sigma_b};
  EXPECT_LT((m.encode(cov) - theta).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConditionCap, FloorsSmallEigenvalues) {
  NoiseModel m({ParamBlock{{NoiseTarget::Unary}, Scheme::LogDiag}});
  m.set_condition_cap(1e2);
  const RealizedNoise r = m.realize(Eigen::Vector3d(2.0, -6.0, 0.0));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(r.Sigma_u);
  EXPECT_LE(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff(), 1e2 * (1 + 1e-12));
}

TEST(Layout, DoubleCoverageRejected) {
  EXPECT_THROW(NoiseModel({ParamBlock{{NoiseTarget::Unary}, Scheme::LogDiag},
                           ParamBlock{{NoiseTarget::Unary}, Scheme::ScalarIso}}),
               Error);
}
