#include "supcal/derivative_filter.hpp"

#include "supcal/errors.hpp"
#include "supcal/parallel.hpp"

namespace supcal {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using lie::GroupElement;
using lie::GroupKind;

namespace {

MatrixXd stacked_H(const GroupElement& prev, const GroupElement& curr, const StepRecord& rec) {
  MatrixXd H = MatrixXd::Zero(rec.rows(), kOdomDim);
  int row = 0;
  if (rec.has_unary) {
    H.block<3, 9>(row, 9) = residual_unary(curr, *rec.unary).H;
    row += 3;
  }
  if (rec.has_binary) {
    const RelativeResidual b = residual_binary(prev, curr, *rec.binary);
    H.block(row, 0, 6, 9) = b.H_a;
    H.block(row, 9, 6, 9) = b.H_b;
  }
  return H;
}

// Shifts the 9x9 odometry slabs of a square matrix: M <- F M F^T.
void transition(MatrixXd& M, const Matrix9d& phi) {
  const MatrixXd rows = M.middleRows(9, 9);
  M.middleRows(0, 9) = rows;
  M.middleRows(9, 9).noalias() = phi * rows;
  const MatrixXd cols = M.middleCols(9, 9);
  M.middleCols(0, 9) = cols;
  M.middleCols(9, 9).noalias() = cols * phi.transpose();
}

}  // namespace

DhMode parse_dh_mode(const std::string& s) {
  if (s == "zero") return DhMode::Zero;
  if (s == "analytic") return DhMode::Analytic;
  if (s == "finite_diff" || s == "fd") return DhMode::FiniteDiff;
  throw Error(ErrorCode::InvalidConfig, "unknown dH mode '" + s + "'");
}

SensitivityBank initial_bank(int num_params, const AugmentedState& s) {
  SensitivityBank bank;
  bank.dP.assign(num_params, MatrixXd::Zero(s.dim(), s.dim()));
  bank.dzeta.assign(num_params, VectorXd::Zero(s.dim()));
  return bank;
}

void d_predict(SensitivityBank& bank, const ImuInput& u, const RealizedNoise& noise,
               const DerivativeOptions& opt) {
  const Matrix9d phi = state_transition_jacobian(u);
  const Matrix9d B = noise_jacobian(u);
  parallel_for(bank.size(), opt.workers, [&](int j) {
    MatrixXd& dP = bank.dP[j];
    transition(dP, phi);
    dP.block<9, 9>(9, 9) += B * noise.dQ(j) * B.transpose();
    // only the odometry strips were touched
    const Eigen::Matrix<double, kOdomDim, kOdomDim> corner = dP.topLeftCorner<kOdomDim, kOdomDim>();
    dP.leftCols<kOdomDim>() = dP.topRows<kOdomDim>().transpose();
    dP.topLeftCorner<kOdomDim, kOdomDim>() = 0.5 * (corner + corner.transpose());
    VectorXd& z = bank.dzeta[j];
    z.head<9>() = z.segment<9>(9);
    z.segment<9>(9) = phi * z.head<9>();
  });
}

MatrixXd dh_term(const StepRecord& rec, const VectorXd& dzeta_odom, DhMode mode, double fd_eps) {
  const int m = rec.rows();
  MatrixXd dH = MatrixXd::Zero(m, kOdomDim);
  if (mode == DhMode::Zero || m == 0) return dH;
  // Direction in which the prior estimate moves.
  const VectorXd delta = -dzeta_odom.head<kOdomDim>();
  if (mode == DhMode::FiniteDiff) {
    const VectorXd dp = fd_eps * delta.head<9>(), dc = fd_eps * delta.tail<9>();
    const MatrixXd Hp = stacked_H(rec.prior_prev * lie::exp(GroupKind::SE2_3, dp),
                                  rec.prior_curr * lie::exp(GroupKind::SE2_3, dc), rec);
    const MatrixXd Hm = stacked_H(rec.prior_prev * lie::exp(GroupKind::SE2_3, -dp),
                                  rec.prior_curr * lie::exp(GroupKind::SE2_3, -dc), rec);
    return (Hp - Hm) / (2.0 * fd_eps);
  }
  int row = 0;
  if (rec.has_unary) {
    dH.block<3, 9>(row, 9) = unary_jacobian_derivative(rec.prior_curr, delta.tail<9>());
    row += 3;
  }
  if (rec.has_binary) {
    MatrixXd dHa, dHb;
    relative_jacobian_derivative(rec.prior_prev, rec.prior_curr, rec.binary->y, delta.head<9>(),
                                 delta.tail<9>(), dHa, dHb);
    dH.block(row, 0, 6, 9) = dHa;
    dH.block(row, 9, 6, 9) = dHb;
  }
  return dH;
}

StepSensitivity d_update(SensitivityBank& bank, const StepRecord& rec, const AugmentedState& s_prior,
                         const RealizedNoise& noise, const DerivativeOptions& opt, bool keep_step_terms) {
  const int p = bank.size();
  const int m = rec.rows();
  StepSensitivity out;
  out.odom_grad = VectorXd::Zero(p);
  if (keep_step_terms) {
    out.dS.resize(p);
    out.dr.resize(p);
  }
  if (m == 0) return out;
  const int n = s_prior.dim();
  const int nf = static_cast<int>(s_prior.frames.size());

  // Per-frame pieces of X exp(c): Ad(exp(-c)) and the right Jacobian at c.
  std::vector<MatrixXd> Ad(nf), Jr(nf);
  for (int f = 0; f < nf; ++f) {
    const GroupKind kind = s_prior.frames[f].kind();
    const VectorXd c = rec.correction.segment(s_prior.offset(f), s_prior.frame_dim(f));
    Ad[f] = lie::exp(kind, -c).adjoint();
    Jr[f] = lie::dexp_right(kind, c);
  }
  const VectorXd Wr = rec.W * rec.r;
  const auto Ao = rec.A.topRows(kOdomDim);

  parallel_for(p, opt.workers, [&](int j) {
    MatrixXd& dP = bank.dP[j];
    VectorXd& dz = bank.dzeta[j];
    MatrixXd dSigma = MatrixXd::Zero(m, m);
    int row = 0;
    if (rec.has_unary) {
      dSigma.block<3, 3>(row, row) = noise.dSigma_u[j];
      row += 3;
    }
    if (rec.has_binary) dSigma.block<6, 6>(row, row) = noise.dSigma_b[j];

    const MatrixXd dH = dh_term(rec, dz, opt.dh_mode, opt.fd_eps);
    MatrixXd dA = dP.leftCols(kOdomDim) * rec.H.transpose();
    if (opt.dh_mode != DhMode::Zero) dA.noalias() += rec.prior_cols * dH.transpose();
    MatrixXd dS = rec.H * dA.topRows(kOdomDim) + dH * Ao + dSigma;
    dS = (0.5 * (dS + dS.transpose())).eval();
    const MatrixXd dW = -rec.W * dS * rec.W;
    const MatrixXd dK = dA * rec.W + rec.A * dW;
    const VectorXd dr = rec.H * dz.head<kOdomDim>();
    const VectorXd dc = dK * rec.r + rec.K * dr;

    out.odom_grad[j] = 0.5 * (rec.W.cwiseProduct(dS)).sum() + dr.dot(Wr) - 0.5 * Wr.dot(dS * Wr);

    // dP -= U A^T + A U^T with U = dA W + A dW / 2.
    MatrixXd L(n, 2 * m), R(n, 2 * m);
    L.leftCols(m) = dA * rec.W + 0.5 * rec.A * dW;
    L.rightCols(m) = rec.A;
    R.leftCols(m) = rec.A;
    R.rightCols(m) = L.leftCols(m);
    dP.triangularView<Eigen::Lower>() -= L * R.transpose();
    dP = dP.selfadjointView<Eigen::Lower>();

    for (int f = 0; f < nf; ++f) {
      const int o = s_prior.offset(f), d = s_prior.frame_dim(f);
      dz.segment(o, d) = Ad[f] * dz.segment(o, d) - Jr[f] * dc.segment(o, d);
    }
    if (keep_step_terms) {
      out.dS[j] = dS;
      out.dr[j] = dr;
    }
  });
  return out;
}

void d_append(SensitivityBank& bank, const AugmentedState& s_after) {
  const int n_new = s_after.dim();
  const int d = s_after.keyframe_dim;
  const int n = n_new - d;
  for (int j = 0; j < bank.size(); ++j) {
    MatrixXd& dP = bank.dP[j];
    if (dP.rows() != n) throw Error(ErrorCode::DimensionMismatch, "bank out of step with state");
    dP.conservativeResize(n_new, n_new);
    dP.block(n, 0, d, n) = dP.block(9, 0, d, n);
    dP.block(0, n, n, d) = dP.block(0, 9, n, d);
    dP.block(n, n, d, d) = dP.block(9, 9, d, d);
    VectorXd& z = bank.dzeta[j];
    z.conservativeResize(n_new);
    z.segment(n, d) = z.segment(9, d);
  }
}

}  // namespace supcal
