#include "supcal/lie.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "supcal/errors.hpp"

namespace supcal::lie {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

void require_dim(GroupKind kind, const VectorXd& xi) {
  if (xi.size() != tangent_dim(kind)) {
    throw Error(ErrorCode::DimensionMismatch,
                "tangent of size " + std::to_string(xi.size()) + " for group of dim " +
                    std::to_string(tangent_dim(kind)));
  }
}

int translation_blocks(GroupKind kind) {
  switch (kind) {
    case GroupKind::SO3: return 0;
    case GroupKind::SE3: return 1;
    case GroupKind::SE2_3: return 2;
  }
  return 0;
}

// Coupling block of the SE(3)-type left Jacobian for (omega, rho).
// Closed form loses digits for small angles so the Taylor expansion is used below 1e-2.
Matrix3d coupling(const Vector3d& w, const Vector3d& rho) {
  const double t = w.norm();
  const Matrix3d W = hat(w);
  const Matrix3d P = hat(rho);
  double c1, c2, c3;
  if (t < 1e-2) {
    const double t2 = t * t;
    c1 = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120960.0;
  } else {
    const double s = std::sin(t), c = std::cos(t);
    const double t2 = t * t;
    c1 = (t - s) / (t2 * t);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * t - 3.0 * s + t * c) / (2.0 * t2 * t2 * t);
  }
  const Matrix3d WP = W * P;
  const Matrix3d PW = P * W;
  const Matrix3d WPW = WP * W;
  return 0.5 * P + c1 * (WP + PW + WPW) + c2 * (W * WP + PW * W - 3.0 * WPW) +
         c3 * (WPW * W + W * WPW);
}

// Bernoulli numbers B_0..B_30 (odd ones beyond B_1 vanish).
constexpr std::array<double, 31> kBernoulli = {
    1.0, -0.5, 1.0 / 6.0, 0.0, -1.0 / 30.0, 0.0, 1.0 / 42.0, 0.0, -1.0 / 30.0, 0.0,
    5.0 / 66.0, 0.0, -691.0 / 2730.0, 0.0, 7.0 / 6.0, 0.0, -3617.0 / 510.0, 0.0,
    43867.0 / 798.0, 0.0, -174611.0 / 330.0, 0.0, 854513.0 / 138.0, 0.0,
    -236364091.0 / 2730.0, 0.0, 8553103.0 / 6.0, 0.0, -23749461029.0 / 870.0, 0.0,
    8615841276005.0 / 14322.0};

}  // namespace

int tangent_dim(GroupKind kind) {
  switch (kind) {
    case GroupKind::SO3: return 3;
    case GroupKind::SE3: return 6;
    case GroupKind::SE2_3: return 9;
  }
  return 0;
}

Matrix3d hat(const Vector3d& w) {
  Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

Vector3d vee(const Matrix3d& m) { return Vector3d(m(2, 1), m(0, 2), m(1, 0)); }

Matrix3d so3_exp(const Vector3d& w) {
  const double t = w.norm();
  const Matrix3d W = hat(w);
  if (t < kSmallAngle) return Matrix3d::Identity() + W + 0.5 * W * W;
  const double h = std::sin(0.5 * t);
  return Matrix3d::Identity() + (std::sin(t) / t) * W + (2.0 * h * h / (t * t)) * W * W;
}

Vector3d so3_log(const Matrix3d& R) {
  const Vector3d s = 0.5 * vee(R - R.transpose());
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double sn = s.norm();
  const double t = std::atan2(sn, c);
  if (std::numbers::pi - t < kBranchCutTol) {
    throw Error(ErrorCode::AngleAtBranchCut, "rotation angle within 1e-7 of pi");
  }
  if (t < kSmallAngle) return s;
  if (c > -0.999) return (t / sn) * s;
  // Near pi: axis from the symmetric part, sign from the skew part.
  const Matrix3d nn = (0.5 * (R + R.transpose()) - c * Matrix3d::Identity()) / (1.0 - c);
  int i = 0;
  nn.diagonal().maxCoeff(&i);
  Vector3d n = nn.col(i) / std::sqrt(nn(i, i));
  n.normalize();
  if (n.dot(s) < 0.0) n = -n;
  return t * n;
}

Matrix3d so3_left_jacobian(const Vector3d& w) {
  const double t = w.norm();
  const Matrix3d W = hat(w);
  if (t < kSmallAngle) return Matrix3d::Identity() + 0.5 * W + W * W / 6.0;
  const double t2 = t * t;
  const double h = std::sin(0.5 * t);
  return Matrix3d::Identity() + (2.0 * h * h / t2) * W + ((t - std::sin(t)) / (t2 * t)) * W * W;
}

Matrix3d so3_left_jacobian_inv(const Vector3d& w) {
  const double t = w.norm();
  const Matrix3d W = hat(w);
  if (t < kSmallAngle) return Matrix3d::Identity() - 0.5 * W + W * W / 12.0;
  const double k = 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
  return Matrix3d::Identity() - 0.5 * W + k * W * W;
}

Matrix3d so3_right_jacobian(const Vector3d& w) { return so3_left_jacobian(-w); }

GroupElement::GroupElement()
    : kind_(GroupKind::SE2_3),
      R_(Matrix3d::Identity()),
      p_(Vector3d::Zero()),
      v_(Vector3d::Zero()) {}

GroupElement GroupElement::identity(GroupKind kind) {
  GroupElement g;
  g.kind_ = kind;
  return g;
}

GroupElement GroupElement::so3(const Matrix3d& R) {
  GroupElement g = identity(GroupKind::SO3);
  g.R_ = R;
  return g;
}

GroupElement GroupElement::se3(const Matrix3d& R, const Vector3d& p) {
  GroupElement g = identity(GroupKind::SE3);
  g.R_ = R;
  g.p_ = p;
  return g;
}

GroupElement GroupElement::se2_3(const Matrix3d& R, const Vector3d& p, const Vector3d& v) {
  GroupElement g = identity(GroupKind::SE2_3);
  g.R_ = R;
  g.p_ = p;
  g.v_ = v;
  return g;
}

GroupElement GroupElement::operator*(const GroupElement& rhs) const {
  if (kind_ != rhs.kind_) throw Error(ErrorCode::KindMismatch, "composition of different groups");
  GroupElement out = identity(kind_);
  out.R_ = R_ * rhs.R_;
  if (kind_ != GroupKind::SO3) out.p_ = R_ * rhs.p_ + p_;
  if (kind_ == GroupKind::SE2_3) out.v_ = R_ * rhs.v_ + v_;
  out.compositions_ = std::max(compositions_, rhs.compositions_) + 1;
  if (out.compositions_ >= kReorthoInterval) return out.orthonormalized();
  return out;
}

GroupElement GroupElement::inverse() const {
  GroupElement out = identity(kind_);
  out.R_ = R_.transpose();
  out.p_ = -(out.R_ * p_);
  out.v_ = -(out.R_ * v_);
  out.compositions_ = compositions_;
  return out;
}

MatrixXd GroupElement::matrix() const {
  const int n = 3 + translation_blocks(kind_);
  MatrixXd m = MatrixXd::Identity(n, n);
  m.topLeftCorner<3, 3>() = R_;
  if (n > 3) m.block<3, 1>(0, 3) = p_;
  if (n > 4) m.block<3, 1>(0, 4) = v_;
  return m;
}

MatrixXd GroupElement::adjoint() const {
  const int d = dim();
  MatrixXd A = MatrixXd::Zero(d, d);
  for (int b = 0; b < d / 3; ++b) A.block<3, 3>(3 * b, 3 * b) = R_;
  if (kind_ != GroupKind::SO3) A.block<3, 3>(3, 0) = hat(p_) * R_;
  if (kind_ == GroupKind::SE2_3) A.block<3, 3>(6, 0) = hat(v_) * R_;
  return A;
}

GroupElement GroupElement::to(GroupKind kind) const {
  if (tangent_dim(kind) > dim()) throw Error(ErrorCode::KindMismatch, "cannot lift to a larger group");
  GroupElement out = *this;
  out.kind_ = kind;
  if (kind == GroupKind::SO3) out.p_.setZero();
  if (kind != GroupKind::SE2_3) out.v_.setZero();
  return out;
}

GroupElement GroupElement::rebuilt(const Matrix3d& R, const Vector3d& p, const Vector3d& v) const {
  GroupElement out = *this;
  out.R_ = R;
  out.p_ = kind_ == GroupKind::SO3 ? Vector3d::Zero() : p;
  out.v_ = kind_ == GroupKind::SE2_3 ? v : Vector3d::Zero();
  return out;
}

GroupElement GroupElement::orthonormalized() const {
  Eigen::JacobiSVD<Matrix3d> svd(R_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d U = svd.matrixU();
  const Matrix3d V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) U.col(2) = -U.col(2);
  GroupElement out = *this;
  out.R_ = U * V.transpose();
  out.compositions_ = 0;
  return out;
}

GroupElement exp(GroupKind kind, const VectorXd& xi) {
  require_dim(kind, xi);
  const Vector3d w = xi.head<3>();
  const Matrix3d R = so3_exp(w);
  if (kind == GroupKind::SO3) return GroupElement::so3(R);
  const Matrix3d J = so3_left_jacobian(w);
  if (kind == GroupKind::SE3) return GroupElement::se3(R, J * xi.segment<3>(3));
  return GroupElement::se2_3(R, J * xi.segment<3>(3), J * xi.segment<3>(6));
}

VectorXd log(const GroupElement& g) {
  VectorXd xi(g.dim());
  const Vector3d w = so3_log(g.rotation());
  xi.head<3>() = w;
  if (g.kind() == GroupKind::SO3) return xi;
  const Matrix3d Ji = so3_left_jacobian_inv(w);
  xi.segment<3>(3) = Ji * g.position();
  if (g.kind() == GroupKind::SE2_3) xi.segment<3>(6) = Ji * g.velocity();
  return xi;
}

MatrixXd ad(GroupKind kind, const VectorXd& xi) {
  require_dim(kind, xi);
  const int d = tangent_dim(kind);
  MatrixXd A = MatrixXd::Zero(d, d);
  const Matrix3d W = hat(xi.head<3>());
  for (int b = 0; b < d / 3; ++b) {
    A.block<3, 3>(3 * b, 3 * b) = W;
    if (b > 0) A.block<3, 3>(3 * b, 0) = hat(xi.segment<3>(3 * b));
  }
  return A;
}

MatrixXd dexp(GroupKind kind, const VectorXd& xi) {
  require_dim(kind, xi);
  const int d = tangent_dim(kind);
  const Vector3d w = xi.head<3>();
  const Matrix3d J = so3_left_jacobian(w);
  MatrixXd out = MatrixXd::Zero(d, d);
  for (int b = 0; b < d / 3; ++b) {
    out.block<3, 3>(3 * b, 3 * b) = J;
    if (b > 0) out.block<3, 3>(3 * b, 0) = coupling(w, xi.segment<3>(3 * b));
  }
  return out;
}

MatrixXd dexp_inv(GroupKind kind, const VectorXd& xi) {
  require_dim(kind, xi);
  const int d = tangent_dim(kind);
  const Vector3d w = xi.head<3>();
  const Matrix3d Ji = so3_left_jacobian_inv(w);
  MatrixXd out = MatrixXd::Zero(d, d);
  for (int b = 0; b < d / 3; ++b) {
    out.block<3, 3>(3 * b, 3 * b) = Ji;
    if (b > 0) out.block<3, 3>(3 * b, 0) = -Ji * coupling(w, xi.segment<3>(3 * b)) * Ji;
  }
  return out;
}

MatrixXd dexp_right(GroupKind kind, const VectorXd& xi) { return dexp(kind, -xi); }

MatrixXd dexp_right_inv_derivative(GroupKind kind, const VectorXd& xi, const VectorXd& d) {
  require_dim(kind, xi);
  require_dim(kind, d);
  const int n = tangent_dim(kind);
  // f(A) = sum_k B_k/k! (-A)^k; derivative along E is the upper-right block of f([[A,E],[0,A]]).
  const MatrixXd A = ad(kind, xi);
  const MatrixXd E = ad(kind, d);
  MatrixXd M = MatrixXd::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = -A;
  M.bottomRightCorner(n, n) = -A;
  M.topRightCorner(n, n) = -E;
  // Only the rotation part limits convergence; translation enters linearly.
  const double r = xi.head<3>().norm();
  const double s = std::max(1.0, xi.norm());
  std::array<double, 31> c{};
  double fact = 1.0;
  int order = 2;
  for (int k = 0; k <= 30; ++k) {
    if (k > 0) fact *= k;
    c[k] = kBernoulli[k] / fact;
    if (k >= 2 && k % 2 == 0) {
      order = k;
      if (std::abs(c[k]) * k * k * std::pow(r, k - 1) * s < 1e-17) break;
    }
  }
  MatrixXd acc = c[order] * MatrixXd::Identity(2 * n, 2 * n);
  for (int k = order - 1; k >= 0; --k) {
    acc = M * acc;
    acc.diagonal().array() += c[k];
  }
  return acc.topRightCorner(n, n);
}

GroupElement boxplus(const GroupElement& g, const VectorXd& xi, Convention c) {
  const GroupElement e = exp(g.kind(), xi);
  return c == Convention::Left ? e * g : g * e;
}

VectorXd boxminus(const GroupElement& a, const GroupElement& b, Convention c) {
  if (a.kind() != b.kind()) throw Error(ErrorCode::KindMismatch, "boxminus of different groups");
  return c == Convention::Left ? log(a * b.inverse()) : log(b.inverse() * a);
}

double gaussian_nll(const TangentGaussian& dist, const GroupElement& x) {
  const int d = x.dim();
  if (dist.covariance.rows() != d || dist.covariance.cols() != d) {
    throw Error(ErrorCode::DimensionMismatch, "covariance does not match tangent dimension");
  }
  const VectorXd e = boxminus(x, dist.mean, dist.convention);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(dist.covariance);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    throw Error(ErrorCode::SingularCovariance, "covariance is not positive definite");
  }
  Eigen::LLT<MatrixXd> llt(dist.covariance);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = e.dot(llt.solve(e));
  return 0.5 * logdet + 0.5 * quad + 0.5 * d * std::log(2.0 * std::numbers::pi);
}

}  // namespace supcal::lie
