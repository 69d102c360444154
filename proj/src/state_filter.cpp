#include "supcal/state_filter.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "supcal/errors.hpp"

namespace supcal {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using lie::GroupElement;
using lie::GroupKind;

void MeasurementStream::resize(int steps) {
  unary.resize(steps + 1);
  binary.resize(steps + 1);
}

int AugmentedState::keyframe_frame(int kf_step) const {
  auto it = std::find(keyframe_steps.begin(), keyframe_steps.end(), kf_step);
  if (it == keyframe_steps.end()) {
    throw Error(ErrorCode::UnknownKeyframe, "no keyframe stored for step " + std::to_string(kf_step));
  }
  return 2 + static_cast<int>(it - keyframe_steps.begin());
}

void condition_covariance(MatrixXd& P, bool floor_eigenvalues) {
  P = (0.5 * (P + P.transpose())).eval();
  if (!floor_eigenvalues) return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(P);
  if (es.eigenvalues().minCoeff() >= 0.0) return;
  const VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  P = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  P = (0.5 * (P + P.transpose())).eval();
}

AugmentedState initial_state(const FilterConfig& cfg) {
  if (cfg.x0.kind() != GroupKind::SE2_3) throw Error(ErrorCode::KindMismatch, "initial state must be SE2_3");
  AugmentedState s;
  s.frames = {cfg.x0, cfg.x0};
  s.keyframe_dim = cfg.pose_only_keyframes ? 6 : 9;
  s.P = MatrixXd::Zero(kOdomDim, kOdomDim);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) s.P.block<9, 9>(9 * a, 9 * b) = cfg.P0;
  return s;
}

AugmentedState predict(AugmentedState s, const ImuInput& u, const RealizedNoise& noise,
                       const FilterConfig& cfg) {
  s.frames[0] = s.frames[1];
  s.frames[1] = propagate(s.frames[1], u, Vector9d::Zero(), cfg.gravity);
  const Matrix9d phi = state_transition_jacobian(u);
  // P <- F P F^T with F = blkdiag([[0, I], [0, phi]], I), done on row and column slabs.
  MatrixXd& P = s.P;
  const MatrixXd rows = P.middleRows(9, 9);
  P.middleRows(0, 9) = rows;
  P.middleRows(9, 9).noalias() = phi * rows;
  const MatrixXd cols = P.middleCols(9, 9);
  P.middleCols(0, 9) = cols;
  P.middleCols(9, 9).noalias() = cols * phi.transpose();
  P.block<9, 9>(9, 9) += process_noise(u, noise.Q());
  condition_covariance(P, false);
  s.step += 1;
  s.t += u.dt;
  return s;
}

StepRecord innovation(const AugmentedState& s, const UnaryMeasurement* unary,
                      const BinaryMeasurement* binary, const RealizedNoise& noise,
                      const FilterConfig& cfg) {
  StepRecord rec;
  rec.k = s.step;
  rec.prior_prev = s.prev();
  rec.prior_curr = s.curr();
  const int m = (unary ? 3 : 0) + (binary ? 6 : 0);
  rec.r = VectorXd::Zero(m);
  rec.H = MatrixXd::Zero(m, kOdomDim);
  rec.Sigma = MatrixXd::Zero(m, m);
  if (m == 0) return rec;
  int row = 0;
  if (unary) {
    const UnaryResidual u = residual_unary(s.curr(), *unary);
    rec.r.segment<3>(row) = u.r;
    rec.H.block<3, 9>(row, 9) = u.H;
    rec.Sigma.block<3, 3>(row, row) = noise.Sigma_u;
    rec.has_unary = true;
    rec.unary = *unary;
    row += 3;
  }
  if (binary) {
    const RelativeResidual b = residual_binary(s.prev(), s.curr(), *binary);
    rec.r.segment<6>(row) = b.r;
    rec.H.block(row, 0, 6, 9) = b.H_a;
    rec.H.block(row, 9, 6, 9) = b.H_b;
    rec.Sigma.block<6, 6>(row, row) = noise.Sigma_b;
    rec.has_binary = true;
    rec.binary = *binary;
  }
  rec.prior_cols = s.P.leftCols(kOdomDim);
  rec.A.noalias() = rec.prior_cols * rec.H.transpose();
  rec.S.noalias() = rec.H * rec.A.topRows(kOdomDim);
  rec.S += rec.Sigma;
  rec.S = (0.5 * (rec.S + rec.S.transpose())).eval();

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(rec.S);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > cfg.innovation_cond_limit || !std::isfinite(hi)) {
    throw Error(ErrorCode::SingularInnovation,
                "innovation covariance at step " + std::to_string(s.step) + " is singular or ill-conditioned");
  }
  Eigen::LLT<MatrixXd> llt(rec.S);
  rec.logdet_S = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  rec.W = llt.solve(MatrixXd::Identity(m, m));
  rec.W = (0.5 * (rec.W + rec.W.transpose())).eval();
  rec.K.noalias() = rec.A * rec.W;
  rec.correction.noalias() = rec.K * rec.r;
  return rec;
}

void apply_correction(AugmentedState& s, const StepRecord& rec, const FilterConfig& cfg) {
  if (rec.rows() == 0) return;
  MatrixXd& P = s.P;
  if (cfg.joseph) {
    const int n = s.dim();
    MatrixXd IKH = MatrixXd::Identity(n, n);
    IKH.leftCols(kOdomDim) -= rec.K * rec.H;
    P = (IKH * P * IKH.transpose() + rec.K * rec.Sigma * rec.K.transpose()).eval();
  } else {
    P.noalias() -= rec.K * rec.A.transpose();
  }
  condition_covariance(P, cfg.psd_floor_interval > 0 && s.step % cfg.psd_floor_interval == 0);
  for (size_t f = 0; f < s.frames.size(); ++f) {
    const int fi = static_cast<int>(f);
    const VectorXd c = rec.correction.segment(s.offset(fi), s.frame_dim(fi));
    s.frames[f] = s.frames[f] * lie::exp(s.frames[f].kind(), c);
  }
}

std::pair<AugmentedState, StepRecord> update(AugmentedState s, const UnaryMeasurement* unary,
                                             const BinaryMeasurement* binary,
                                             const RealizedNoise& noise, const FilterConfig& cfg) {
  StepRecord rec = innovation(s, unary, binary, noise, cfg);
  apply_correction(s, rec, cfg);
  return {std::move(s), std::move(rec)};
}

AugmentedState maybe_append(AugmentedState s, const FilterConfig& cfg, bool* appended) {
  if (appended) *appended = false;
  if (!std::binary_search(cfg.keyframes.begin(), cfg.keyframes.end(), s.step)) return s;
  if (s.num_keyframes() + 1 > cfg.max_augmented) {
    throw Error(ErrorCode::AugmentationLimitExceeded,
                "more than " + std::to_string(cfg.max_augmented) + " keyframes requested");
  }
  const int n = s.dim();
  const int d = s.keyframe_dim;
  s.P.conservativeResize(n + d, n + d);
  s.P.block(n, 0, d, n) = s.P.block(9, 0, d, n);
  s.P.block(0, n, n, d) = s.P.block(0, 9, n, d);
  s.P.block(n, n, d, d) = s.P.block(9, 9, d, d);
  s.frames.push_back(d == 6 ? s.curr().to(GroupKind::SE3) : s.curr());
  s.keyframe_steps.push_back(s.step);
  if (appended) *appended = true;
  return s;
}

FilterRun run(const std::vector<ImuInput>& inputs, const MeasurementStream& meas,
              const RealizedNoise& noise, const FilterConfig& cfg, bool keep_records) {
  const int N = static_cast<int>(inputs.size());
  if (meas.steps() != N) throw Error(ErrorCode::DimensionMismatch, "measurement stream length differs from inputs");
  FilterRun out;
  AugmentedState s = initial_state(cfg);
  out.trajectory.reserve(N + 1);
  out.trajectory.push_back({0, 0.0, s.curr(), s.P.block<9, 9>(9, 9).trace()});
  s = maybe_append(std::move(s), cfg);
  for (int k = 1; k <= N; ++k) {
    s = predict(std::move(s), inputs[k - 1], noise, cfg);
    const UnaryMeasurement* u = meas.unary[k] ? &*meas.unary[k] : nullptr;
    const BinaryMeasurement* b = meas.binary[k] ? &*meas.binary[k] : nullptr;
    auto [next, rec] = update(std::move(s), u, b, noise, cfg);
    s = std::move(next);
    if (rec.rows() > 0) {
      out.odom_loss += 0.5 * rec.logdet_S + 0.5 * rec.r.dot(rec.W * rec.r);
      out.innovation_sq += rec.r.squaredNorm();
      out.measured_steps += 1;
    }
    bool appended = false;
    s = maybe_append(std::move(s), cfg, &appended);
    rec.appended = appended;
    out.trajectory.push_back({k, s.t, s.curr(), s.P.block<9, 9>(9, 9).trace()});
    if (keep_records) out.records.push_back(std::move(rec));
  }
  out.final_state = std::move(s);
  return out;
}

}  // namespace supcal
