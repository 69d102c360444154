#include "supcal/losses.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "supcal/errors.hpp"

namespace supcal {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using lie::GroupElement;
using lie::GroupKind;

double odom_step_loss(const StepRecord& rec) {
  if (rec.rows() == 0) return 0.0;
  return 0.5 * rec.logdet_S + 0.5 * rec.r.dot(rec.W * rec.r);
}

double odom_step_gradient(const StepRecord& rec, const MatrixXd& dS, const VectorXd& dr) {
  if (rec.rows() == 0) return 0.0;
  const VectorXd Wr = rec.W * rec.r;
  return 0.5 * (rec.W * dS).trace() + dr.dot(Wr) - 0.5 * Wr.dot(dS * Wr);
}

double odom_loss(const std::vector<StepRecord>& records) {
  double total = 0.0;
  for (const auto& rec : records) total += odom_step_loss(rec);
  return total;
}

VectorXd grad_odom(const std::vector<StepRecord>& records, const std::vector<StepSensitivity>& steps) {
  if (steps.empty()) return {};
  const int p = static_cast<int>(steps.front().dS.size());
  VectorXd g = VectorXd::Zero(p);
  size_t si = 0;
  for (const auto& rec : records) {
    if (rec.rows() == 0) continue;
    if (si >= steps.size()) throw Error(ErrorCode::DimensionMismatch, "fewer step terms than measured steps");
    for (int j = 0; j < p; ++j) g[j] += odom_step_gradient(rec, steps[si].dS[j], steps[si].dr[j]);
    ++si;
  }
  return g;
}

VectorXd SupervisoryAssembly::v() const {
  VectorXd out(rows());
  for (size_t l = 0; l < loops.size(); ++l) out.segment<6>(6 * l) = loops[l].r;
  return out;
}

MatrixXd SupervisoryAssembly::dense_H() const {
  MatrixXd H = MatrixXd::Zero(rows(), ns);
  for (size_t l = 0; l < loops.size(); ++l) {
    const auto& L = loops[l];
    H.block(6 * l, L.col_a, 6, L.H_a.cols()) += L.H_a;
    H.block(6 * l, L.col_b, 6, L.H_b.cols()) += L.H_b;
  }
  return H;
}

MatrixXd SupervisoryAssembly::dense_Psi() const {
  MatrixXd Psi = MatrixXd::Zero(rows(), rows());
  for (size_t l = 0; l < loops.size(); ++l) Psi.block<6, 6>(6 * l, 6 * l) = loops[l].psi;
  return Psi;
}

MatrixXd SupervisoryAssembly::dense_C() const {
  const MatrixXd H = dense_H();
  return H * Ps * H.transpose() + dense_Psi();
}

SupervisoryAssembly sup_assemble(const AugmentedState& s, const std::vector<SupervisoryMeasurement>& loops,
                                 SupSolver solver) {
  SupervisoryAssembly a;
  a.ns = s.dim() - kOdomDim;
  a.Ps = s.P.bottomRightCorner(a.ns, a.ns);
  if (loops.empty()) return a;
  for (const auto& m : loops) {
    LoopBlock L;
    L.frame_a = s.keyframe_frame(m.i);
    L.frame_b = s.keyframe_frame(m.j);
    L.col_a = s.offset(L.frame_a) - kOdomDim;
    L.col_b = s.offset(L.frame_b) - kOdomDim;
    const RelativeResidual res = residual_supervisory(s.frames[L.frame_a], s.frames[L.frame_b], m);
    L.y = m.y;
    L.r = res.r;
    L.H_a = res.H_a;
    L.H_b = res.H_b;
    Eigen::SelfAdjointEigenSolver<Matrix6d> es(0.5 * (m.psi + m.psi.transpose()));
    if (es.eigenvalues().minCoeff() < -1e-12) throw Error(ErrorCode::NonPSDInput, "loop covariance is not PSD");
    const Vector6d lam = es.eigenvalues().cwiseMax(kPsiFloor);
    L.psi = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    L.psi_inv = es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    a.loops.push_back(std::move(L));
  }
  const int rows = a.rows();
  const int ns = a.ns;
  a.woodbury = solver == SupSolver::Woodbury || (solver == SupSolver::Auto && rows > ns);
  a.w.resize(a.loops.size());

  // Z = P_s H' C^-1 is only needed on each loop's own rows and columns.
  if (!a.woodbury) {
    const MatrixXd H = a.dense_H();
    MatrixXd C = H * a.Ps * H.transpose() + a.dense_Psi();
    C = (0.5 * (C + C.transpose())).eval();
    Eigen::LLT<MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularC, "supervisory covariance not positive definite");
    a.logdet_C = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const VectorXd v = a.v();
    const VectorXd w = llt.solve(v);
    a.quad = v.dot(w);
    const MatrixXd CinvH = llt.solve(H);
    a.HtCinvH = H.transpose() * CinvH;
    a.u = H.transpose() * w;
    const MatrixXd Z = a.Ps * CinvH.transpose();  // ns x rows
    for (size_t l = 0; l < a.loops.size(); ++l) {
      auto& L = a.loops[l];
      a.w[l] = w.segment<6>(6 * l);
      L.Z_a = Z.block(L.col_a, 6 * l, L.H_a.cols(), 6);
      L.Z_b = Z.block(L.col_b, 6 * l, L.H_b.cols(), 6);
    }
  } else {
    MatrixXd G = MatrixXd::Zero(ns, ns);
    VectorXd g = VectorXd::Zero(ns);
    double logdet_psi = 0.0;
    for (const auto& L : a.loops) {
      const MatrixXd Ha = L.psi_inv * L.H_a, Hb = L.psi_inv * L.H_b;
      const int da = static_cast<int>(L.H_a.cols()), db = static_cast<int>(L.H_b.cols());
      G.block(L.col_a, L.col_a, da, da) += L.H_a.transpose() * Ha;
      G.block(L.col_a, L.col_b, da, db) += L.H_a.transpose() * Hb;
      G.block(L.col_b, L.col_a, db, da) += L.H_b.transpose() * Ha;
      G.block(L.col_b, L.col_b, db, db) += L.H_b.transpose() * Hb;
      g.segment(L.col_a, da) += Ha.transpose() * L.r;
      g.segment(L.col_b, db) += Hb.transpose() * L.r;
      logdet_psi += std::log(L.psi.determinant());
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a.Ps + a.Ps.transpose()));
    const MatrixXd Lf = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    MatrixXd M = MatrixXd::Identity(ns, ns) + Lf.transpose() * G * Lf;
    M = (0.5 * (M + M.transpose())).eval();
    Eigen::LLT<MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularC, "capacitance matrix not positive definite");
    a.logdet_C = logdet_psi + 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const MatrixXd LMinvLt = Lf * llt.solve(Lf.transpose());
    const MatrixXd E = MatrixXd::Identity(ns, ns) - G * LMinvLt;
    a.HtCinvH = E * G;
    a.HtCinvH = (0.5 * (a.HtCinvH + a.HtCinvH.transpose())).eval();
    // quad = min_s ||Psi^-1/2 (v - H Lf s)||^2 + ||s||^2, summed from residuals
    const VectorXd s_min = llt.solve(Lf.transpose() * g);
    const VectorXd q = Lf * s_min;
    a.quad = s_min.squaredNorm();
    a.u = VectorXd::Zero(ns);
    const MatrixXd Y = a.Ps * E;
    for (size_t l = 0; l < a.loops.size(); ++l) {
      auto& L = a.loops[l];
      const int da = static_cast<int>(L.H_a.cols()), db = static_cast<int>(L.H_b.cols());
      const Vector6d e = L.r - (L.H_a * q.segment(L.col_a, da) + L.H_b * q.segment(L.col_b, db));
      a.w[l] = L.psi_inv * e;
      a.quad += e.dot(a.w[l]);
      a.u.segment(L.col_a, da) += L.H_a.transpose() * a.w[l];
      a.u.segment(L.col_b, db) += L.H_b.transpose() * a.w[l];
      const MatrixXd HtPsiInv_a = L.H_a.transpose() * L.psi_inv;
      const MatrixXd HtPsiInv_b = L.H_b.transpose() * L.psi_inv;
      L.Z_a = Y.block(L.col_a, L.col_a, da, da) * HtPsiInv_a + Y.block(L.col_a, L.col_b, da, db) * HtPsiInv_b;
      L.Z_b = Y.block(L.col_b, L.col_a, db, da) * HtPsiInv_a + Y.block(L.col_b, L.col_b, db, db) * HtPsiInv_b;
    }
  }
  a.Psu = a.Ps * a.u;
  a.value = 0.5 * a.logdet_C + 0.5 * a.quad;
  return a;
}

double sup_loss(const AugmentedState& s, const std::vector<SupervisoryMeasurement>& loops) {
  return sup_assemble(s, loops).value;
}

VectorXd grad_sup(const SupervisoryAssembly& a, const SensitivityBank& bank, const AugmentedState& s,
                  DhMode mode, double fd_eps) {
  const int p = bank.size();
  VectorXd grad = VectorXd::Zero(p);
  if (a.loops.empty()) return grad;
  for (int j = 0; j < p; ++j) {
    const MatrixXd dPs = bank.dP[j].bottomRightCorner(a.ns, a.ns);
    const VectorXd dzs = bank.dzeta[j].tail(a.ns);
    double gj = 0.5 * a.HtCinvH.cwiseProduct(dPs).sum() - 0.5 * a.u.dot(dPs * a.u) + a.u.dot(dzs);
    if (mode != DhMode::Zero) {
      for (size_t l = 0; l < a.loops.size(); ++l) {
        const auto& L = a.loops[l];
        const int da = static_cast<int>(L.H_a.cols()), db = static_cast<int>(L.H_b.cols());
        const VectorXd delta_a = -dzs.segment(L.col_a, da);
        const VectorXd delta_b = -dzs.segment(L.col_b, db);
        MatrixXd dHa, dHb;
        const GroupElement& xa = s.frames[L.frame_a];
        const GroupElement& xb = s.frames[L.frame_b];
        if (mode == DhMode::Analytic) {
          relative_jacobian_derivative(xa, xb, L.y, delta_a, delta_b, dHa, dHb);
        } else {
          const RelativeResidual rp = residual_relative(xa * lie::exp(xa.kind(), fd_eps * delta_a),
                                                        xb * lie::exp(xb.kind(), fd_eps * delta_b), L.y);
          const RelativeResidual rm = residual_relative(xa * lie::exp(xa.kind(), -fd_eps * delta_a),
                                                        xb * lie::exp(xb.kind(), -fd_eps * delta_b), L.y);
          dHa = (rp.H_a - rm.H_a) / (2.0 * fd_eps);
          dHb = (rp.H_b - rm.H_b) / (2.0 * fd_eps);
        }
        // tr(C^-1 dH P_s H') and (w' dH)(P_s u).
        gj += (dHa * L.Z_a).trace() + (dHb * L.Z_b).trace();
        gj -= a.w[l].dot(dHa * a.Psu.segment(L.col_a, da) + dHb * a.Psu.segment(L.col_b, db));
      }
    }
    grad[j] = gj;
  }
  return grad;
}

LossReport total_loss_and_grad(const Problem& problem, const VectorXd& theta, bool with_sup,
                               const DerivativeOptions& opt, bool need_grad) {
  Problem const* prob = &problem;
  Problem odom_only;
  if (!with_sup && !problem.filter.keyframes.empty()) {
    // Keyframes only serve the supervisory term.
    odom_only = problem;
    odom_only.filter.keyframes.clear();
    prob = &odom_only;
  }
  PassOptions po;
  po.derivatives = need_grad;
  po.deriv = opt;
  const PassResult pass = run_pass(*prob, theta, po);
  LossReport rep;
  rep.odom = pass.run.odom_loss;
  rep.total = rep.odom;
  const int p = problem.model.size();
  rep.grad_odom = need_grad ? pass.odom_grad : VectorXd();
  rep.grad_sup = need_grad ? VectorXd::Zero(p) : VectorXd();
  if (with_sup && !problem.meas.supervisory.empty()) {
    const SupervisoryAssembly a = sup_assemble(pass.run.final_state, problem.meas.supervisory);
    rep.sup = a.value;
    rep.total += a.value;
    if (need_grad) rep.grad_sup = grad_sup(a, pass.bank, pass.run.final_state, opt.dh_mode, opt.fd_eps);
  }
  if (need_grad) rep.grad_total = rep.grad_odom + rep.grad_sup;
  return rep;
}

double baseline_ape(const FilterRun& run) {
  if (run.trajectory.size() < 2) return 0.0;
  double acc = 0.0;
  for (size_t k = 1; k < run.trajectory.size(); ++k) acc += run.trajectory[k].trace_P;
  return acc / static_cast<double>(run.trajectory.size() - 1);
}

double baseline_mse(const std::vector<TrajectoryPoint>& estimate, const std::vector<GroupElement>& truth) {
  if (estimate.size() != truth.size()) throw Error(ErrorCode::DimensionMismatch, "trajectory and ground truth differ in length");
  if (estimate.size() < 2) return 0.0;
  double acc = 0.0;
  for (size_t k = 1; k < estimate.size(); ++k) {
    const GroupElement e = estimate[k].x.to(GroupKind::SE3);
    const GroupElement g = truth[k].to(GroupKind::SE3);
    acc += lie::boxminus(e, g, lie::Convention::Right).squaredNorm();
  }
  return acc / static_cast<double>(estimate.size() - 1);
}

double baseline_innov(const FilterRun& run) {
  if (run.measured_steps == 0) return 0.0;
  return run.innovation_sq / run.measured_steps;
}

}  // namespace supcal
