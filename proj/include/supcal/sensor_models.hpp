#pragma once

#include <Eigen/Core>

#include "supcal/lie.hpp"
#include "supcal/noise_param.hpp"

namespace supcal {

struct ImuInput {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();
  double dt = 0.01;
};

inline const Eigen::Vector3d kDefaultGravity(0.0, 0.0, -9.81);

// Position fix y = p + nu.
struct UnaryMeasurement {
  Eigen::Vector3d y = Eigen::Vector3d::Zero();
};

// Relative pose y = exp(nu) X_{k-1}^-1 X_k on SE(3).
struct BinaryMeasurement {
  lie::GroupElement y = lie::GroupElement::identity(lie::GroupKind::SE3);
};

// Relative pose between two stored frames, noise covariance psi.
struct SupervisoryMeasurement {
  int i = 0;
  int j = 0;
  lie::GroupElement y = lie::GroupElement::identity(lie::GroupKind::SE3);
  Matrix6d psi = Matrix6d::Identity();
};

// Exact strapdown step; noise is (n_g, unused, n_a).
lie::GroupElement propagate(const lie::GroupElement& x, const ImuInput& u,
                            const Vector9d& noise = Vector9d::Zero(),
                            const Eigen::Vector3d& gravity = kDefaultGravity);

// Body-frame error map of one step: zeta+ = phi zeta + B w.
Matrix9d state_transition_jacobian(const ImuInput& u);
Matrix9d noise_jacobian(const ImuInput& u);
// B Q B^T.
Matrix9d process_noise(const ImuInput& u, const Matrix9d& Q);

// Residuals use y ⊟ h(x) = log(y h^-1) for poses and y - h for positions.
// `H` is the prediction Jacobian: r(x exp(xi)) ~= r - H xi.
struct UnaryResidual {
  Eigen::Vector3d r;
  Eigen::Matrix<double, 3, 9> H;
};

struct RelativeResidual {
  Vector6d r;
  Eigen::MatrixXd H_a;  // 6 x dim(a)
  Eigen::MatrixXd H_b;  // 6 x dim(b)
};

UnaryResidual residual_unary(const lie::GroupElement& x, const UnaryMeasurement& m);
RelativeResidual residual_relative(const lie::GroupElement& a, const lie::GroupElement& b,
                                   const lie::GroupElement& y);
RelativeResidual residual_binary(const lie::GroupElement& prev, const lie::GroupElement& curr,
                                 const BinaryMeasurement& m);
RelativeResidual residual_supervisory(const lie::GroupElement& xi, const lie::GroupElement& xj,
                                      const SupervisoryMeasurement& m);

// Directional derivatives of H when the frames move as x exp(h delta).
Eigen::Matrix<double, 3, 9> unary_jacobian_derivative(const lie::GroupElement& x,
                                                      const Vector9d& delta);
void relative_jacobian_derivative(const lie::GroupElement& a, const lie::GroupElement& b,
                                  const lie::GroupElement& y, const Eigen::VectorXd& delta_a,
                                  const Eigen::VectorXd& delta_b, Eigen::MatrixXd& dH_a,
                                  Eigen::MatrixXd& dH_b);

}  // namespace supcal
