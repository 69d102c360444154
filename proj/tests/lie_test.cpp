#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "supcal/errors.hpp"
#include "supcal/lie.hpp"
#include "test_util.hpp"

using namespace supcal;
using namespace supcal::lie;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const GroupKind kKinds[] = {GroupKind::SO3, GroupKind::SE3, GroupKind::SE2_3};

// sum_n ad^n / (n+1)!
MatrixXd series_dexp(GroupKind kind, const VectorXd& xi) {
  const MatrixXd A = ad(kind, xi);
  MatrixXd out = MatrixXd::Identity(A.rows(), A.cols());
  MatrixXd term = out;
  for (int n = 1; n < 40; ++n) {
    term = term * A / static_cast<double>(n + 1);
    out += term;
  }
  return out;
}

}  // namespace

TEST(Exp, IdentityAtZero) {
  for (auto k : kKinds) {
    const GroupElement g = exp(k, VectorXd::Zero(tangent_dim(k)));
    EXPECT_TRUE(g.matrix().isIdentity(0.0));
  }
}

TEST(Exp, QuarterTurnAboutZ) {
  VectorXd w(3);
  w << 0, 0, std::numbers::pi / 2;
  Eigen::Matrix3d expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const GroupElement g = exp(GroupKind::SO3, w);
  EXPECT_LT((g.rotation() - expected).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((g.matrix() - testutil::series_exp(testutil::hat_matrix(GroupKind::SO3, w))).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Exp, MatchesMatrixSeriesOracle) {
  std::mt19937 rng(7);
  for (auto k : kKinds) {
    for (int i = 0; i < 100; ++i) {
      const VectorXd xi = testutil::random_ball(rng, tangent_dim(k), 2.0);
      const MatrixXd oracle = testutil::series_exp(testutil::hat_matrix(k, xi));
      EXPECT_LT((exp(k, xi).matrix() - oracle).cwiseAbs().maxCoeff(), 1e-9) << "kind " << static_cast<int>(k);
    }
  }
}

TEST(Exp, SmallAngleBranchAgreesWithSeries) {
  std::mt19937 rng(8);
  for (double scale : {1e-9, 5e-7, 2e-6, 1e-4}) {
    VectorXd xi = testutil::random_vector(rng, 9).normalized() * scale;
    xi.segment<3>(3) *= 1e6;  // keep translation O(1)
    const MatrixXd oracle = testutil::series_exp(testutil::hat_matrix(GroupKind::SE2_3, xi));
    EXPECT_LT((exp(GroupKind::SE2_3, xi).matrix() - oracle).cwiseAbs().maxCoeff(), 1e-14 * xi.norm() + 1e-15);
  }
}

TEST(Log, IdentityGivesZero) {
  for (auto k : kKinds) EXPECT_EQ(log(GroupElement::identity(k)).norm(), 0.0);
}

TEST(Log, RoundTripUpToThreeRadians) {
  std::mt19937 rng(11);
  for (auto k : kKinds) {
    for (int i = 0; i < 200; ++i) {
      VectorXd xi = testutil::random_vector(rng, tangent_dim(k));
      xi.head<3>() = testutil::random_ball(rng, 3, 3.0);
      EXPECT_LT((log(exp(k, xi)) - xi).norm(), 1e-9);
    }
  }
}

TEST(Log, NearPiRecoversAxis) {
  std::mt19937 rng(12);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d n = testutil::random_vector(rng, 3).normalized();
    VectorXd w = (std::numbers::pi - 1e-3) * n;
    EXPECT_LT((log(exp(GroupKind::SO3, w)) - w).norm(), 1e-6);
  }
}

TEST(Log, BranchCutThrows) {
  VectorXd w(3);
  w << 0, std::numbers::pi, 0;
  try {
    log(exp(GroupKind::SO3, w));
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AngleAtBranchCut);
  }
  w << 0, 0, std::numbers::pi - 5e-8;
  EXPECT_THROW(log(exp(GroupKind::SE3, (VectorXd(6) << w, 1, 2, 3).finished())), Error);
}

TEST(Dexp, MatchesSeries) {
  std::mt19937 rng(13);
  for (auto k : kKinds) {
    for (int i = 0; i < 50; ++i) {
      for (double radius : {1e-7, 1e-3, 0.5, 2.0}) {
        const VectorXd xi = testutil::random_vector(rng, tangent_dim(k)).normalized() * radius;
        EXPECT_LT((dexp(k, xi) - series_dexp(k, xi)).cwiseAbs().maxCoeff(), 1e-10);
      }
    }
  }
}

TEST(Dexp, InverseIsInverse) {
  std::mt19937 rng(14);
  for (auto k : kKinds) {
    EXPECT_TRUE(dexp_inv(k, VectorXd::Zero(tangent_dim(k))).isIdentity(0.0));
    for (int i = 0; i < 100; ++i) {
      const VectorXd xi = testutil::random_ball(rng, tangent_dim(k), 2.5);
      const int d = tangent_dim(k);
      EXPECT_LT((dexp_inv(k, xi) * dexp(k, xi) - MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Dexp, CompoundExpansionIsSecondOrder) {
  // log(exp(x) exp(y)) = y + dexp_inv(y) x + O(|x|^2)
  std::mt19937 rng(15);
  for (auto k : kKinds) {
    const VectorXd y = testutil::random_ball(rng, tangent_dim(k), 1.5);
    const VectorXd dir = testutil::random_vector(rng, tangent_dim(k)).normalized();
    double prev_ratio = -1.0;
    for (double h : {1e-2, 5e-3, 2.5e-3}) {
      const VectorXd x = h * dir;
      const VectorXd exact = log(exp(k, x) * exp(k, y));
      const double err = (exact - (y + dexp_inv(k, y) * x)).norm();
      const double ratio = err / (h * h);
      EXPECT_LT(ratio, 10.0);
      if (prev_ratio > 0) EXPECT_NEAR(ratio, prev_ratio, 0.2 * prev_ratio + 1e-6);
      prev_ratio = ratio;
    }
  }
}

TEST(Dexp, RightInverseDerivativeMatchesDifferences) {
  std::mt19937 rng(16);
  for (auto k : {GroupKind::SE3, GroupKind::SE2_3}) {
    for (int i = 0; i < 20; ++i) {
      const VectorXd xi = testutil::random_ball(rng, tangent_dim(k), 1.5);
      const VectorXd d = testutil::random_vector(rng, tangent_dim(k));
      const double h = 1e-6;
      const MatrixXd fd = (dexp_inv(k, -(xi + h * d)) - dexp_inv(k, -(xi - h * d))) / (2 * h);
      EXPECT_LT((dexp_right_inv_derivative(k, xi, d) - fd).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Adjoint, ConjugatesExp) {
  std::mt19937 rng(17);
  for (auto k : kKinds) {
    const GroupElement g = testutil::random_element(rng, k, 2.0);
    const VectorXd xi = testutil::random_ball(rng, tangent_dim(k), 1.0);
    const MatrixXd lhs = exp(k, g.adjoint() * xi).matrix();
    const MatrixXd rhs = (g * exp(k, xi) * g.inverse()).matrix();
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(BoxOps, RoundTripBothConventions) {
  std::mt19937 rng(18);
  for (auto k : kKinds) {
    for (auto c : {Convention::Left, Convention::Right}) {
      const GroupElement g = testutil::random_element(rng, k, 2.0);
      const VectorXd xi = testutil::random_ball(rng, tangent_dim(k), 1.0);
      EXPECT_LT((boxminus(boxplus(g, xi, c), g, c) - xi).norm(), 1e-12);
    }
  }
  const GroupElement a = GroupElement::identity(GroupKind::SE3);
  const GroupElement b = GroupElement::identity(GroupKind::SE2_3);
  try {
    boxminus(a, b, Convention::Left);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KindMismatch);
  }
  EXPECT_THROW(a * b, Error);
}

TEST(GaussianNll, IsotropicExample) {
  // Sigma = 4 I, |e|^2 = 4
  VectorXd e(3);
  e << 0, 2, 0;
  TangentGaussian dist{GroupElement::identity(GroupKind::SO3), 4.0 * MatrixXd::Identity(3, 3), Convention::Left};
  const double expected = 0.5 * 3 * std::log(4.0) + 0.5 + 1.5 * std::log(2 * std::numbers::pi);
  EXPECT_NEAR(gaussian_nll(dist, exp(GroupKind::SO3, e)), expected, 1e-12);
}

TEST(GaussianNll, MatchesDenseOracle) {
  std::mt19937 rng(19);
  for (int i = 0; i < 50; ++i) {
    const auto k = kKinds[i % 3];
    const int d = tangent_dim(k);
    const MatrixXd S = testutil::random_spd(rng, d);
    const auto c = i % 2 ? Convention::Left : Convention::Right;
    TangentGaussian dist{testutil::random_element(rng, k, 1.0), S, c};
    const GroupElement x = boxplus(dist.mean, testutil::random_ball(rng, d, 1.0), c);
    const VectorXd e = boxminus(x, dist.mean, c);
    Eigen::FullPivLU<MatrixXd> lu(S);
    const double oracle = 0.5 * std::log(lu.determinant()) + 0.5 * e.dot(lu.inverse() * e) +
                          0.5 * d * std::log(2 * std::numbers::pi);
    EXPECT_NEAR(gaussian_nll(dist, x), oracle, 1e-10);
  }
}

TEST(GaussianNll, TranslationInvariance) {
  // Right-convention errors ignore a common left factor, left-convention errors a common right factor.
  std::mt19937 rng(20);
  for (int i = 0; i < 20; ++i) {
    const GroupElement m = testutil::random_element(rng, GroupKind::SE3, 1.0);
    const GroupElement x = testutil::random_element(rng, GroupKind::SE3, 1.0);
    const GroupElement g = testutil::random_element(rng, GroupKind::SE3, 2.0);
    const MatrixXd S = testutil::random_spd(rng, 6);
    TangentGaussian right{m, S, Convention::Right};
    TangentGaussian right_moved{g * m, S, Convention::Right};
    EXPECT_NEAR(gaussian_nll(right, x), gaussian_nll(right_moved, g * x), 1e-9);
    TangentGaussian left{m, S, Convention::Left};
    TangentGaussian left_moved{m * g, S, Convention::Left};
    EXPECT_NEAR(gaussian_nll(left, x), gaussian_nll(left_moved, x * g), 1e-9);
  }
}

TEST(GaussianNll, SingularCovarianceThrows) {
  MatrixXd S = MatrixXd::Identity(3, 3);
  S(2, 2) = 0.0;
  TangentGaussian dist{GroupElement::identity(GroupKind::SO3), S, Convention::Left};
  try {
    gaussian_nll(dist, GroupElement::identity(GroupKind::SO3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularCovariance);
  }
}

TEST(Composition, StaysOnManifoldOverManySteps) {
  std::mt19937 rng(21);
  GroupElement g = GroupElement::identity(GroupKind::SE2_3);
  for (int i = 0; i < 10000; ++i) g = g * testutil::random_element(rng, GroupKind::SE2_3, 0.3);
  const Eigen::Matrix3d R = g.rotation();
  EXPECT_LT((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(R.determinant(), 1.0, 1e-12);
  EXPECT_LT(g.compositions(), kReorthoInterval);
}

TEST(Tangent, WrongSizeThrows) {
  EXPECT_THROW(exp(GroupKind::SE3, VectorXd::Zero(9)), Error);
}
