#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace supcal {

enum class Scheme { ScalarIso, LogDiag, Cholesky };

// Q_g, Q_a, Sigma_u, Sigma_b.
enum class NoiseTarget { Gyro, Accel, Unary, Binary };

int target_dim(NoiseTarget t);
std::string to_string(NoiseTarget t);
std::string to_string(Scheme s);
NoiseTarget parse_target(const std::string& s);
Scheme parse_scheme(const std::string& s);

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix9d = Eigen::Matrix<double, 9, 9>;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vector9d = Eigen::Matrix<double, 9, 1>;

struct ParamBlock {
  std::vector<NoiseTarget> targets;
  Scheme scheme = Scheme::LogDiag;
  // LogDiag only: false ties the whole diagonal to one parameter.
  bool per_axis = true;
  // Applied to every bounded slot; Cholesky off-diagonals are unbounded.
  std::optional<double> lower;
  std::optional<double> upper;

  int dim() const;   // matrix dimension shared by all targets
  int size() const;  // number of theta slots
};

struct RealizedNoise {
  Eigen::Matrix3d Q_g = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d Q_a = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d Sigma_u = Eigen::Matrix3d::Identity();
  Matrix6d Sigma_b = Matrix6d::Identity();
  // One entry per theta component.
  std::vector<Eigen::Matrix3d> dQ_g, dQ_a, dSigma_u;
  std::vector<Matrix6d> dSigma_b;

  int size() const { return static_cast<int>(dQ_g.size()); }
  // blkdiag(Q_g, 0, Q_a) over (gyro, -, accel) noise channels.
  Matrix9d Q() const;
  Matrix9d dQ(int j) const;
  const Eigen::MatrixXd target(NoiseTarget t) const;
};

struct FixedNoise {
  Eigen::Matrix3d Q_g = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d Q_a = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d Sigma_u = Eigen::Matrix3d::Identity();
  Matrix6d Sigma_b = Matrix6d::Identity();
};

class NoiseModel {
 public:
  NoiseModel() = default;
  explicit NoiseModel(std::vector<ParamBlock> blocks, FixedNoise fixed = {});

  int size() const { return size_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const std::vector<int>& offsets() const { return offsets_; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const FixedNoise& fixed() const { return fixed_; }
  bool covers(NoiseTarget t) const;

  // Floors eigenvalues at lambda_max / cap after realization; 0 disables.
  void set_condition_cap(double cap) { cond_cap_ = cap; }

  Eigen::VectorXd project(const Eigen::VectorXd& raw) const;
  bool in_bounds(const Eigen::VectorXd& theta, double tol = 1e-12) const;
  RealizedNoise realize(const Eigen::VectorXd& theta) const;

  // Best theta for given covariances (least squares in the scheme's own coordinates).
  Eigen::VectorXd encode(const FixedNoise& covariances) const;
  std::vector<std::string> labels() const;

 private:
  std::vector<ParamBlock> blocks_;
  std::vector<int> offsets_;
  FixedNoise fixed_;
  Eigen::VectorXd lower_, upper_;
  int size_ = 0;
  double cond_cap_ = 0.0;
};

}  // namespace supcal
