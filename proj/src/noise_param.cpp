#include "supcal/noise_param.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "supcal/errors.hpp"

namespace supcal {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string axis_name(NoiseTarget t, int i) {
  static const char* xyz[] = {"x", "y", "z"};
  if (t == NoiseTarget::Binary) return i < 3 ? std::string("r") + xyz[i] : xyz[i - 3];
  return xyz[i];
}

MatrixXd floor_condition(const MatrixXd& M, double cap) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  VectorXd lam = es.eigenvalues();
  const double floor = lam.maxCoeff() / cap;
  if (lam.minCoeff() >= floor) return M;
  lam = lam.cwiseMax(floor);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

int target_dim(NoiseTarget t) { return t == NoiseTarget::Binary ? 6 : 3; }

std::string to_string(NoiseTarget t) {
  switch (t) {
    case NoiseTarget::Gyro: return "Q_g";
    case NoiseTarget::Accel: return "Q_a";
    case NoiseTarget::Unary: return "Sigma_u";
    case NoiseTarget::Binary: return "Sigma_b";
  }
  return "?";
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::ScalarIso: return "scalar_iso";
    case Scheme::LogDiag: return "log_diag";
    case Scheme::Cholesky: return "cholesky";
  }
  return "?";
}

NoiseTarget parse_target(const std::string& s) {
  if (s == "Q_g" || s == "gyro") return NoiseTarget::Gyro;
  if (s == "Q_a" || s == "accel") return NoiseTarget::Accel;
  if (s == "Sigma_u" || s == "unary" || s == "gps") return NoiseTarget::Unary;
  if (s == "Sigma_b" || s == "binary" || s == "vo") return NoiseTarget::Binary;
  throw Error(ErrorCode::InvalidConfig, "unknown noise target '" + s + "'");
}

Scheme parse_scheme(const std::string& s) {
  if (s == "scalar_iso" || s == "ScalarIso") return Scheme::ScalarIso;
  if (s == "log_diag" || s == "LogDiag") return Scheme::LogDiag;
  if (s == "cholesky" || s == "Cholesky") return Scheme::Cholesky;
  throw Error(ErrorCode::InvalidConfig, "unknown scheme '" + s + "'");
}

int ParamBlock::dim() const { return targets.empty() ? 0 : target_dim(targets.front()); }

int ParamBlock::size() const {
  const int d = dim();
  switch (scheme) {
    case Scheme::ScalarIso: return 1;
    case Scheme::LogDiag: return per_axis ? d : 1;
    case Scheme::Cholesky: return d * (d + 1) / 2;
  }
  return 0;
}

Matrix9d RealizedNoise::Q() const {
  Matrix9d out = Matrix9d::Zero();
  out.topLeftCorner<3, 3>() = Q_g;
  out.bottomRightCorner<3, 3>() = Q_a;
  return out;
}

Matrix9d RealizedNoise::dQ(int j) const {
  Matrix9d out = Matrix9d::Zero();
  out.topLeftCorner<3, 3>() = dQ_g[j];
  out.bottomRightCorner<3, 3>() = dQ_a[j];
  return out;
}

const MatrixXd RealizedNoise::target(NoiseTarget t) const {
  switch (t) {
    case NoiseTarget::Gyro: return Q_g;
    case NoiseTarget::Accel: return Q_a;
    case NoiseTarget::Unary: return Sigma_u;
    case NoiseTarget::Binary: return Sigma_b;
  }
  return {};
}

NoiseModel::NoiseModel(std::vector<ParamBlock> blocks, FixedNoise fixed)
    : blocks_(std::move(blocks)), fixed_(std::move(fixed)) {
  bool seen[4] = {false, false, false, false};
  for (const auto& b : blocks_) {
    if (b.targets.empty()) throw Error(ErrorCode::InvalidConfig, "parameter block without targets");
    for (auto t : b.targets) {
      if (target_dim(t) != b.dim() && !(b.scheme == Scheme::ScalarIso ||
                                        (b.scheme == Scheme::LogDiag && !b.per_axis))) {
        throw Error(ErrorCode::InvalidConfig, "block mixes targets of different dimension");
      }
      auto& s = seen[static_cast<int>(t)];
      if (s) throw Error(ErrorCode::InvalidConfig, to_string(t) + " covered twice");
      s = true;
    }
    offsets_.push_back(size_);
    size_ += b.size();
  }
  lower_.resize(size_);
  upper_.resize(size_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const int o = offsets_[i];
    const double lo_def = b.scheme == Scheme::ScalarIso ? 1e-8 : -6.0;
    const double hi_def = b.scheme == Scheme::ScalarIso ? 1e4 : 2.0;
    const double lo = b.lower.value_or(lo_def), hi = b.upper.value_or(hi_def);
    if (!(lo < hi)) throw Error(ErrorCode::InvalidConfig, "empty parameter box");
    if (b.scheme == Scheme::ScalarIso && lo < 0.0) {
      throw Error(ErrorCode::InvalidConfig, "scalar_iso lower bound must be non-negative");
    }
    if (b.scheme == Scheme::Cholesky) {
      const int d = b.dim();
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c <= r; ++c) {
          const int k = o + r * (r + 1) / 2 + c;
          lower_[k] = r == c ? lo : -kInf;
          upper_[k] = r == c ? hi : kInf;
        }
      }
    } else {
      lower_.segment(o, b.size()).setConstant(lo);
      upper_.segment(o, b.size()).setConstant(hi);
    }
  }
}

bool NoiseModel::covers(NoiseTarget t) const {
  for (const auto& b : blocks_)
    for (auto x : b.targets)
      if (x == t) return true;
  return false;
}

VectorXd NoiseModel::project(const VectorXd& raw) const {
  if (raw.size() != size_) throw Error(ErrorCode::DimensionMismatch, "theta has wrong size");
  return raw.cwiseMax(lower_).cwiseMin(upper_);
}

bool NoiseModel::in_bounds(const VectorXd& theta, double tol) const {
  if (theta.size() != size_) return false;
  for (int i = 0; i < size_; ++i) {
    if (!std::isfinite(theta[i])) return false;
    if (theta[i] < lower_[i] - tol || theta[i] > upper_[i] + tol) return false;
  }
  return true;
}

RealizedNoise NoiseModel::realize(const VectorXd& theta) const {
  if (theta.size() != size_) throw Error(ErrorCode::DimensionMismatch, "theta has wrong size");
  if (!in_bounds(theta)) throw Error(ErrorCode::BoundsViolation, "theta outside its box");
  RealizedNoise out;
  out.Q_g = fixed_.Q_g;
  out.Q_a = fixed_.Q_a;
  out.Sigma_u = fixed_.Sigma_u;
  out.Sigma_b = fixed_.Sigma_b;
  out.dQ_g.assign(size_, Eigen::Matrix3d::Zero());
  out.dQ_a.assign(size_, Eigen::Matrix3d::Zero());
  out.dSigma_u.assign(size_, Eigen::Matrix3d::Zero());
  out.dSigma_b.assign(size_, Matrix6d::Zero());

  for (size_t bi = 0; bi < blocks_.size(); ++bi) {
    const auto& b = blocks_[bi];
    const int o = offsets_[bi];
    for (auto t : b.targets) {
      const int d = target_dim(t);
      MatrixXd M = MatrixXd::Zero(d, d);
      std::vector<std::pair<int, MatrixXd>> dM;
      switch (b.scheme) {
        case Scheme::ScalarIso:
          M = theta[o] * MatrixXd::Identity(d, d);
          dM.emplace_back(o, MatrixXd::Identity(d, d));
          break;
        case Scheme::LogDiag:
          if (b.per_axis) {
            for (int i = 0; i < d; ++i) {
              const double e = std::exp(theta[o + i]);
              M(i, i) = e;
              MatrixXd D = MatrixXd::Zero(d, d);
              D(i, i) = e;
              dM.emplace_back(o + i, D);
            }
          } else {
            const double e = std::exp(theta[o]);
            M = e * MatrixXd::Identity(d, d);
            dM.emplace_back(o, M);
          }
          break;
        case Scheme::Cholesky: {
          MatrixXd L = MatrixXd::Zero(d, d);
          for (int r = 0; r < d; ++r)
            for (int c = 0; c <= r; ++c) {
              const double v = theta[o + r * (r + 1) / 2 + c];
              L(r, c) = r == c ? std::exp(v) : v;
            }
          M = L * L.transpose();
          for (int r = 0; r < d; ++r)
            for (int c = 0; c <= r; ++c) {
              MatrixXd dL = MatrixXd::Zero(d, d);
              dL(r, c) = r == c ? L(r, r) : 1.0;
              const MatrixXd t1 = dL * L.transpose();
              dM.emplace_back(o + r * (r + 1) / 2 + c, t1 + t1.transpose());
            }
          break;
        }
      }
      if (cond_cap_ > 0.0) M = floor_condition(M, cond_cap_);
      switch (t) {
        case NoiseTarget::Gyro:
          out.Q_g = M;
          for (auto& [j, D] : dM) out.dQ_g[j] = D;
          break;
        case NoiseTarget::Accel:
          out.Q_a = M;
          for (auto& [j, D] : dM) out.dQ_a[j] = D;
          break;
        case NoiseTarget::Unary:
          out.Sigma_u = M;
          for (auto& [j, D] : dM) out.dSigma_u[j] = D;
          break;
        case NoiseTarget::Binary:
          out.Sigma_b = M;
          for (auto& [j, D] : dM) out.dSigma_b[j] = D;
          break;
      }
    }
  }
  return out;
}

VectorXd NoiseModel::encode(const FixedNoise& cov) const {
  VectorXd theta = VectorXd::Zero(size_);
  auto pick = [&](NoiseTarget t) -> MatrixXd {
    switch (t) {
      case NoiseTarget::Gyro: return cov.Q_g;
      case NoiseTarget::Accel: return cov.Q_a;
      case NoiseTarget::Unary: return cov.Sigma_u;
      case NoiseTarget::Binary: return cov.Sigma_b;
    }
    return {};
  };
  for (size_t bi = 0; bi < blocks_.size(); ++bi) {
    const auto& b = blocks_[bi];
    const int o = offsets_[bi];
    const int d = b.dim();
    MatrixXd mean = MatrixXd::Zero(d, d);
    double diag_mean = 0.0;
    int diag_count = 0;
    for (auto t : b.targets) {
      const MatrixXd M = pick(t);
      if (M.rows() == d) mean += M / static_cast<double>(b.targets.size());
      diag_mean += M.diagonal().sum();
      diag_count += static_cast<int>(M.rows());
    }
    diag_mean /= diag_count;
    switch (b.scheme) {
      case Scheme::ScalarIso:
        theta[o] = diag_mean;
        break;
      case Scheme::LogDiag:
        if (b.per_axis) {
          for (int i = 0; i < d; ++i) theta[o + i] = std::log(mean(i, i));
        } else {
          theta[o] = std::log(diag_mean);
        }
        break;
      case Scheme::Cholesky: {
        Eigen::LLT<MatrixXd> llt(mean);
        if (llt.info() != Eigen::Success) throw Error(ErrorCode::NonPSDInput, "cannot encode covariance");
        const MatrixXd L = llt.matrixL();
        for (int r = 0; r < d; ++r)
          for (int c = 0; c <= r; ++c) theta[o + r * (r + 1) / 2 + c] = r == c ? std::log(L(r, r)) : L(r, c);
        break;
      }
    }
  }
  return project(theta);
}

std::vector<std::string> NoiseModel::labels() const {
  std::vector<std::string> out;
  for (const auto& b : blocks_) {
    std::string name;
    for (size_t i = 0; i < b.targets.size(); ++i) name += (i ? "=" : "") + to_string(b.targets[i]);
    const NoiseTarget t0 = b.targets.front();
    if (b.scheme == Scheme::Cholesky) {
      for (int r = 0; r < b.dim(); ++r)
        for (int c = 0; c <= r; ++c) out.push_back(name + "[L" + std::to_string(r) + std::to_string(c) + "]");
    } else if (b.scheme == Scheme::LogDiag && b.per_axis) {
      for (int i = 0; i < b.dim(); ++i) out.push_back(name + "[" + axis_name(t0, i) + "]");
    } else {
      out.push_back(name);
    }
  }
  return out;
}

}  // namespace supcal
