#pragma once

#include <Eigen/Core>

namespace supcal::lie {

enum class GroupKind { SO3, SE3, SE2_3 };

// Left:  g ⊞ xi = exp(xi) g,  a ⊟ b = log(a b^-1)
// Right: g ⊞ xi = g exp(xi),  a ⊟ b = log(b^-1 a)
enum class Convention { Left, Right };

// Tangent layout is (omega, rho_p[, rho_v]).
int tangent_dim(GroupKind kind);

constexpr double kSmallAngle = 1e-6;
constexpr double kBranchCutTol = 1e-7;
constexpr int kReorthoInterval = 100;

Eigen::Matrix3d hat(const Eigen::Vector3d& w);
Eigen::Vector3d vee(const Eigen::Matrix3d& m);

// SO(3) pieces reused by the sensor models.
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w);
Eigen::Vector3d so3_log(const Eigen::Matrix3d& R);
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& w);
Eigen::Matrix3d so3_left_jacobian_inv(const Eigen::Vector3d& w);
Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& w);

class GroupElement {
 public:
  GroupElement();  // SE2_3 identity

  static GroupElement identity(GroupKind kind);
  static GroupElement so3(const Eigen::Matrix3d& R);
  static GroupElement se3(const Eigen::Matrix3d& R, const Eigen::Vector3d& p);
  static GroupElement se2_3(const Eigen::Matrix3d& R, const Eigen::Vector3d& p,
                            const Eigen::Vector3d& v);

  GroupKind kind() const { return kind_; }
  int dim() const { return tangent_dim(kind_); }
  const Eigen::Matrix3d& rotation() const { return R_; }
  const Eigen::Vector3d& position() const { return p_; }
  const Eigen::Vector3d& velocity() const { return v_; }
  int compositions() const { return compositions_; }

  GroupElement operator*(const GroupElement& rhs) const;
  GroupElement inverse() const;

  // Homogeneous 3x3, 4x4 or 5x5 matrix.
  Eigen::MatrixXd matrix() const;
  Eigen::MatrixXd adjoint() const;

  // SE2_3 -> SE3 drops velocity, SE3 -> SO3 drops position.
  GroupElement to(GroupKind kind) const;

  // Same composition count, new components.
  GroupElement rebuilt(const Eigen::Matrix3d& R, const Eigen::Vector3d& p,
                       const Eigen::Vector3d& v) const;

  // Polar projection of the rotation block; resets the composition counter.
  GroupElement orthonormalized() const;

 private:
  GroupKind kind_;
  Eigen::Matrix3d R_;
  Eigen::Vector3d p_;
  Eigen::Vector3d v_;
  int compositions_ = 0;
};

GroupElement exp(GroupKind kind, const Eigen::VectorXd& xi);
Eigen::VectorXd log(const GroupElement& g);

Eigen::MatrixXd ad(GroupKind kind, const Eigen::VectorXd& xi);
// Left Jacobian of exp and its inverse.
Eigen::MatrixXd dexp(GroupKind kind, const Eigen::VectorXd& xi);
Eigen::MatrixXd dexp_inv(GroupKind kind, const Eigen::VectorXd& xi);
// Right Jacobian, dexp(-xi).
Eigen::MatrixXd dexp_right(GroupKind kind, const Eigen::VectorXd& xi);
// Directional derivative of xi -> dexp_inv(-xi) (right inverse Jacobian) along d.
Eigen::MatrixXd dexp_right_inv_derivative(GroupKind kind, const Eigen::VectorXd& xi,
                                          const Eigen::VectorXd& d);

GroupElement boxplus(const GroupElement& g, const Eigen::VectorXd& xi, Convention c);
Eigen::VectorXd boxminus(const GroupElement& a, const GroupElement& b, Convention c);

struct TangentGaussian {
  GroupElement mean;
  Eigen::MatrixXd covariance;
  Convention convention = Convention::Left;
};

// 0.5 log|S| + 0.5 e' S^-1 e + d/2 log(2 pi), e = x ⊟ mean.
double gaussian_nll(const TangentGaussian& dist, const GroupElement& x);

}  // namespace supcal::lie
