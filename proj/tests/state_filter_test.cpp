#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "supcal/errors.hpp"
#include "supcal/state_filter.hpp"
#include "linear_oracle.hpp"
#include "test_util.hpp"

using namespace supcal;
using namespace supcal::lie;
using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

using namespace testutil::linear;

TEST(Filter, MatchesDenseLinearKalmanFilter) {
  std::mt19937 rng(41);
  const Recording sc = translation_scenario(rng, 60, 0.1);
  const RealizedNoise n = linear_noise();
  for (bool joseph : {false, true}) {
    FilterConfig cfg = linear_config(sc);
    cfg.joseph = joseph;
    const FilterRun fr = run(sc.inputs, sc.meas, n, cfg, true);
    const DenseKf kf = dense_kf(sc, n, cfg);
    EXPECT_LT(max_innovation_gap(fr, kf), 1e-9);
    for (size_t k = 0; k < kf.positions.size(); ++k) {
      EXPECT_LT((fr.trajectory[k].x.position() - kf.positions[k]).norm(), 1e-9) << "step " << k;
      EXPECT_TRUE(fr.trajectory[k].x.rotation().isIdentity(0.0));
    }
    EXPECT_NEAR(fr.odom_loss, kf.loss, 1e-9 * std::max(1.0, std::abs(kf.loss)));
    EXPECT_LT((fr.final_state.P.block<3, 3>(12, 12) - kf.P.block<3, 3>(6, 6)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Filter, OdometryLossEqualsBatchLikelihood) {
  std::mt19937 rng(42);
  const Recording sc = translation_scenario(rng, 40, 0.1);
  const RealizedNoise n = linear_noise();
  const FilterConfig cfg = linear_config(sc);
  const double batch = batch_nll(sc, n, cfg);
  const FilterRun fr = run(sc.inputs, sc.meas, n, cfg);
  EXPECT_NEAR(fr.odom_loss, batch, 1e-8 * std::max(1.0, std::abs(batch)));
}

TEST(Filter, ScalarPositionFix) {
  FilterConfig cfg;
  cfg.x0 = GroupElement::identity(GroupKind::SE2_3);
  cfg.P0 = Matrix9d::Identity() * 1e-6;
  cfg.P0.block<3, 3>(3, 3) = 4.0 * Matrix3d::Identity();
  RealizedNoise n;
  n.Q_g.setZero();
  n.Q_a.setZero();
  n.Sigma_u = Matrix3d::Identity();
  AugmentedState s = initial_state(cfg);
  ImuInput u;
  u.accel = Vector3d(0, 0, 9.81);
  u.dt = 1e-3;
  s = predict(s, u, n, cfg);
  const UnaryMeasurement m{Vector3d(1.0, 0.0, 0.0)};
  auto [post, rec] = update(s, &m, nullptr, n, cfg);
  // scalar gain 4 / (4 + 1) on x, nothing else observed
  const double S00 = rec.S(0, 0);
  EXPECT_NEAR(post.curr().position().x(), (S00 - 1.0) / S00, 1e-12);
  EXPECT_NEAR(post.P(12, 12), (S00 - 1.0) / S00, 1e-12);
  EXPECT_NEAR(S00, 5.0, 1e-5);
}

TEST(Filter, InnovationCovarianceTwoWays) {
  std::mt19937 rng(43);
  const Recording sc = rotating_scenario(rng, 30, 0.01, 0.1);
  FilterConfig cfg;
  cfg.x0 = sc.truth.front();
  cfg.keyframes = {5, 12};
  RealizedNoise n;
  n.Q_g *= 1e-4;
  n.Q_a *= 1e-2;
  n.Sigma_u *= 0.01;
  n.Sigma_b *= 1e-3;
  const FilterRun fr = run(sc.inputs, sc.meas, n, cfg, true);
  AugmentedState s = initial_state(cfg);
  s = maybe_append(s, cfg);
  for (int k = 1; k <= 30; ++k) {
    s = predict(s, sc.inputs[k - 1], n, cfg);
    const StepRecord& rec = fr.records[k - 1];
    MatrixXd Hfull = MatrixXd::Zero(rec.rows(), s.dim());
    Hfull.leftCols(kOdomDim) = rec.H;
    const MatrixXd S = Hfull * s.P * Hfull.transpose() + rec.Sigma;
    EXPECT_LT((S - rec.S).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, S.norm()));
    const UnaryMeasurement* um = sc.meas.unary[k] ? &*sc.meas.unary[k] : nullptr;
    const BinaryMeasurement* bm = sc.meas.binary[k] ? &*sc.meas.binary[k] : nullptr;
    s = update(s, um, bm, n, cfg).first;
    s = maybe_append(s, cfg);
  }
}

TEST(Filter, JosephFormAgrees) {
  std::mt19937 rng(44);
  const Recording sc = rotating_scenario(rng, 200, 0.01, 0.1);
  FilterConfig cfg;
  cfg.x0 = sc.truth.front();
  cfg.P0 = Matrix9d::Identity() * 1e-2;
  cfg.keyframes = {50, 120};
  RealizedNoise n;
  n.Q_g *= 1e-4;
  n.Q_a *= 1e-2;
  n.Sigma_u *= 0.01;
  n.Sigma_b *= 1e-3;
  const FilterRun a = run(sc.inputs, sc.meas, n, cfg);
  cfg.joseph = true;
  const FilterRun b = run(sc.inputs, sc.meas, n, cfg);
  EXPECT_LT((a.final_state.P - b.final_state.P).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(log(a.final_state.curr().inverse() * b.final_state.curr()).norm(), 1e-8);
}

TEST(Filter, MissingMeasurementsLeavePredictionUntouched) {
  std::mt19937 rng(45);
  Recording sc = rotating_scenario(rng, 10, 0.01, 0.1);
  for (int k = 1; k <= 10; ++k) {
    sc.meas.unary[k].reset();
    sc.meas.binary[k].reset();
  }
  FilterConfig cfg;
  cfg.x0 = sc.truth.front();
  RealizedNoise n;
  const FilterRun fr = run(sc.inputs, sc.meas, n, cfg, true);
  EXPECT_EQ(fr.measured_steps, 0);
  EXPECT_EQ(fr.odom_loss, 0.0);
  for (const auto& rec : fr.records) EXPECT_EQ(rec.rows(), 0);
  EXPECT_LT(log(fr.final_state.curr().inverse() * sc.truth.back()).norm(), 1e-10);
}

TEST(Filter, AppendCopiesCurrentPoseBlock) {
  std::mt19937 rng(46);
  const Recording sc = rotating_scenario(rng, 20, 0.01, 0.1);
  FilterConfig cfg;
  cfg.x0 = sc.truth.front();
  cfg.P0 = Matrix9d::Identity() * 1e-2;
  cfg.keyframes = {0, 7, 15};
  RealizedNoise n;
  AugmentedState s = initial_state(cfg);
  s = maybe_append(s, cfg);
  for (int k = 1; k <= 7; ++k) {
    s = predict(s, sc.inputs[k - 1], n, cfg);
    s = update(s, sc.meas.unary[k] ? &*sc.meas.unary[k] : nullptr,
               sc.meas.binary[k] ? &*sc.meas.binary[k] : nullptr, n, cfg).first;
  }
  const MatrixXd before = s.P;
  bool appended = false;
  s = maybe_append(s, cfg, &appended);
  ASSERT_TRUE(appended);
  ASSERT_EQ(s.num_keyframes(), 2);
  EXPECT_EQ(s.dim(), kOdomDim + 12);
  const int off = s.offset(3);
  EXPECT_EQ((s.P.block<6, 6>(off, off) - before.block<6, 6>(9, 9)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((s.P.block(off, 0, 6, before.cols()) - before.block(9, 0, 6, before.cols())).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.frames[3].kind(), GroupKind::SE3);
  EXPECT_EQ(s.keyframe_frame(7), 3);
  EXPECT_THROW(s.keyframe_frame(8), Error);
}

TEST(Filter, AugmentationLimit) {
  std::mt19937 rng(47);
  const Recording sc = rotating_scenario(rng, 10, 0.01, 0.1);
  FilterConfig cfg;
  cfg.x0 = sc.truth.front();
  cfg.keyframes = {1, 2, 3};
  cfg.max_augmented = 2;
  try {
    run(sc.inputs, sc.meas, RealizedNoise{}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AugmentationLimitExceeded);
  }
}

TEST(Filter, SingularInnovationDetected) {
  std::mt19937 rng(48);
  const Recording sc = rotating_scenario(rng, 3, 0.01, 0.1);
  FilterConfig cfg;
  cfg.x0 = sc.truth.front();
  cfg.P0.setZero();
  RealizedNoise n;
  n.Q_g.setZero();
  n.Q_a.setZero();
  n.Sigma_b.setZero();
  try {
    run(sc.inputs, sc.meas, n, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularInnovation);
  }
}

TEST(Filter, ZeroNoiseRecoversTrajectory) {
  std::mt19937 rng(49);
  const Recording sc = rotating_scenario(rng, 1000, 0.01, 0.0);
  FilterConfig cfg;
  cfg.x0 = sc.truth.front().rebuilt(sc.truth.front().rotation(), Vector3d(1.0, -1.0, 0.5), sc.truth.front().velocity());
  cfg.P0 = Matrix9d::Identity() * 1e-6;
  cfg.P0.block<3, 3>(3, 3) = 4.0 * Matrix3d::Identity();
  RealizedNoise n;
  n.Q_g *= 1e-8;
  n.Q_a *= 1e-4;
  n.Sigma_u *= 0.01;
  n.Sigma_b *= 1e-4;
  const FilterRun fr = run(sc.inputs, sc.meas, n, cfg);
  EXPECT_LT((fr.final_state.curr().position() - sc.truth.back().position()).norm(), 0.5);
}

TEST(Filter, CovarianceStaysPsd) {
  std::mt19937 rng(50);
  const Recording sc = rotating_scenario(rng, 2000, 0.01, 0.05);
  FilterConfig cfg;
  cfg.x0 = sc.truth.front();
  cfg.keyframes = {0, 500, 1000, 1500};
  RealizedNoise n;
  n.Q_g *= 1e-6;
  n.Q_a *= 1e-3;
  n.Sigma_u *= 0.01;
  n.Sigma_b *= 1e-3;
  AugmentedState s = initial_state(cfg);
  s = maybe_append(s, cfg);
  for (int k = 1; k <= 2000; ++k) {
    s = predict(s, sc.inputs[k - 1], n, cfg);
    s = update(s, sc.meas.unary[k] ? &*sc.meas.unary[k] : nullptr,
               sc.meas.binary[k] ? &*sc.meas.binary[k] : nullptr, n, cfg).first;
    s = maybe_append(s, cfg);
    if (k % 100 == 0) {
      EXPECT_EQ((s.P - s.P.transpose()).cwiseAbs().maxCoeff(), 0.0);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(s.P);
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * es.eigenvalues().maxCoeff()) << "step " << k;
    }
  }
}
