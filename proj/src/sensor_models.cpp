#include "supcal/sensor_models.hpp"

#include "supcal/errors.hpp"

namespace supcal {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using lie::GroupElement;
using lie::GroupKind;

GroupElement propagate(const GroupElement& x, const ImuInput& u, const Vector9d& noise,
                       const Vector3d& gravity) {
  if (x.kind() != GroupKind::SE2_3) throw Error(ErrorCode::KindMismatch, "propagate needs SE2_3");
  if (!(u.dt > 0.0 && u.dt <= 1.0)) throw Error(ErrorCode::InvalidConfig, "imu dt outside (0, 1]");
  const double dt = u.dt;
  const Vector3d acc = u.accel + noise.tail<3>();
  const GroupElement U = GroupElement::se2_3(lie::so3_exp((u.omega + noise.head<3>()) * dt),
                                             0.5 * acc * dt * dt, acc * dt);
  const GroupElement G = GroupElement::se2_3(Matrix3d::Identity(), 0.5 * gravity * dt * dt, gravity * dt);
  const GroupElement shifted = x.rebuilt(x.rotation(), x.position() + x.velocity() * dt, x.velocity());
  GroupElement out = G * (shifted * U);
  return out;
}

Matrix9d state_transition_jacobian(const ImuInput& u) {
  const double dt = u.dt;
  const Matrix3d Gam = lie::so3_exp(u.omega * dt);
  const GroupElement U = GroupElement::se2_3(Gam, 0.5 * u.accel * dt * dt, u.accel * dt);
  Matrix9d M = Matrix9d::Identity();
  M.block<3, 3>(3, 6) = dt * Matrix3d::Identity();
  return U.inverse().adjoint() * M;
}

Matrix9d noise_jacobian(const ImuInput& u) {
  const double dt = u.dt;
  const Matrix3d GamT = lie::so3_exp(u.omega * dt).transpose();
  Matrix9d B = Matrix9d::Zero();
  B.block<3, 3>(0, 0) = lie::so3_right_jacobian(u.omega * dt) * dt;
  B.block<3, 3>(3, 6) = 0.5 * GamT * dt * dt;
  B.block<3, 3>(6, 6) = GamT * dt;
  return B;
}

Matrix9d process_noise(const ImuInput& u, const Matrix9d& Q) {
  const Matrix9d B = noise_jacobian(u);
  return B * Q * B.transpose();
}

UnaryResidual residual_unary(const GroupElement& x, const UnaryMeasurement& m) {
  if (x.kind() != GroupKind::SE2_3 && x.kind() != GroupKind::SE3) {
    throw Error(ErrorCode::KindMismatch, "position fix needs a pose");
  }
  UnaryResidual out;
  out.r = m.y - x.position();
  out.H.setZero();
  out.H.block<3, 3>(0, 3) = x.rotation();
  return out;
}

RelativeResidual residual_relative(const GroupElement& a, const GroupElement& b, const GroupElement& y) {
  if (a.kind() == GroupKind::SO3 || b.kind() == GroupKind::SO3 || y.kind() != GroupKind::SE3) {
    throw Error(ErrorCode::KindMismatch, "relative pose needs pose frames and an SE3 measurement");
  }
  const GroupElement T = a.to(GroupKind::SE3).inverse() * b.to(GroupKind::SE3);
  RelativeResidual out;
  out.r = lie::log(y * T.inverse());
  const MatrixXd Jri = lie::dexp_inv(GroupKind::SE3, -out.r);
  out.H_a = MatrixXd::Zero(6, a.dim());
  out.H_b = MatrixXd::Zero(6, b.dim());
  out.H_a.leftCols<6>() = -Jri;
  out.H_b.leftCols<6>() = Jri * T.adjoint();
  return out;
}

RelativeResidual residual_binary(const GroupElement& prev, const GroupElement& curr,
                                 const BinaryMeasurement& m) {
  return residual_relative(prev, curr, m.y);
}

RelativeResidual residual_supervisory(const GroupElement& xi, const GroupElement& xj,
                                      const SupervisoryMeasurement& m) {
  if (m.i == m.j) throw Error(ErrorCode::InvalidConfig, "supervisory pair with i == j");
  return residual_relative(xi, xj, m.y);
}

Eigen::Matrix<double, 3, 9> unary_jacobian_derivative(const GroupElement& x, const Vector9d& delta) {
  Eigen::Matrix<double, 3, 9> dH = Eigen::Matrix<double, 3, 9>::Zero();
  dH.block<3, 3>(0, 3) = x.rotation() * lie::hat(delta.head<3>());
  return dH;
}

void relative_jacobian_derivative(const GroupElement& a, const GroupElement& b, const GroupElement& y,
                                  const VectorXd& delta_a, const VectorXd& delta_b, MatrixXd& dH_a,
                                  MatrixXd& dH_b) {
  const RelativeResidual res = residual_relative(a, b, y);
  const GroupElement T = a.to(GroupKind::SE3).inverse() * b.to(GroupKind::SE3);
  const Vector6d da = delta_a.head<6>();
  const Vector6d db = delta_b.head<6>();
  const Vector6d dr = -(res.H_a * delta_a + res.H_b * delta_b);
  const MatrixXd Jri = lie::dexp_inv(GroupKind::SE3, -res.r);
  const MatrixXd dJ = lie::dexp_right_inv_derivative(GroupKind::SE3, res.r, dr);
  const MatrixXd Ad = T.adjoint();
  const MatrixXd dAd = -lie::ad(GroupKind::SE3, da) * Ad + Ad * lie::ad(GroupKind::SE3, db);
  dH_a = MatrixXd::Zero(6, a.dim());
  dH_b = MatrixXd::Zero(6, b.dim());
  dH_a.leftCols<6>() = -dJ;
  dH_b.leftCols<6>() = dJ * Ad + Jri * dAd;
}

}  // namespace supcal
