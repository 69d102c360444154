#pragma once

#include <Eigen/Dense>
#include <random>

#include "supcal/pipeline.hpp"
#include "test_util.hpp"

namespace testutil {

inline Eigen::VectorXd sample(std::mt19937& rng, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  return llt.matrixL() * random_vector(rng, static_cast<int>(cov.rows()));
}

inline supcal::NoiseModel mixed_noise_model() {
  using supcal::NoiseTarget;
  using supcal::ParamBlock;
  using supcal::Scheme;
  ParamBlock gyro{{NoiseTarget::Gyro}, Scheme::LogDiag};
  gyro.lower = -16.0;
  ParamBlock accel{{NoiseTarget::Accel}, Scheme::ScalarIso};
  ParamBlock gps{{NoiseTarget::Unary}, Scheme::LogDiag};
  gps.per_axis = false;
  ParamBlock vo{{NoiseTarget::Binary}, Scheme::Cholesky};
  return supcal::NoiseModel({gyro, accel, gps, vo});
}

struct SmallProblemOptions {
  int steps = 150;
  double dt = 0.02;
  int gps_every = 10;
  std::vector<int> keyframes = {0, 50, 100, 150};
  std::vector<std::pair<int, int>> loops = {{0, 100}, {50, 150}, {0, 150}};
  double loop_sigma = 0.05;
};

// A short rotating run with noisy GPS, VO and loop closures, generated from `truth_noise`.
inline supcal::Problem small_problem(std::mt19937& rng, const supcal::RealizedNoise& truth_noise,
                                     const SmallProblemOptions& opt = {}) {
  using namespace supcal;
  using lie::GroupElement;
  using lie::GroupKind;
  Problem pb;
  pb.meas.resize(opt.steps);
  GroupElement x = GroupElement::se2_3(Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(),
                                       Eigen::Vector3d(1.5, 0.0, 0.0));
  pb.ground_truth.push_back(x);
  for (int k = 0; k < opt.steps; ++k) {
    ImuInput u;
    u.dt = opt.dt;
    u.omega = Eigen::Vector3d(0.1 * std::sin(0.05 * k), 0.05 * std::cos(0.03 * k), 0.4);
    u.accel = Eigen::Vector3d(0.2 * std::cos(0.07 * k), 0.6, 9.81);
    pb.inputs.push_back(u);
    Vector9d w = Vector9d::Zero();
    w.head<3>() = sample(rng, truth_noise.Q_g);
    w.tail<3>() = sample(rng, truth_noise.Q_a);
    const GroupElement prev = x;
    x = propagate(x, u, w);
    pb.ground_truth.push_back(x);
    if ((k + 1) % opt.gps_every == 0) {
      pb.meas.unary[k + 1] = UnaryMeasurement{x.position() + Eigen::Vector3d(sample(rng, truth_noise.Sigma_u))};
    }
    const GroupElement rel = (prev.inverse() * x).to(GroupKind::SE3);
    pb.meas.binary[k + 1] = BinaryMeasurement{lie::exp(GroupKind::SE3, sample(rng, truth_noise.Sigma_b)) * rel};
  }
  for (auto [i, j] : opt.loops) {
    SupervisoryMeasurement m;
    m.i = i;
    m.j = j;
    m.psi = Matrix6d::Identity() * opt.loop_sigma * opt.loop_sigma;
    const GroupElement rel = (pb.ground_truth[i].inverse() * pb.ground_truth[j]).to(GroupKind::SE3);
    m.y = lie::exp(GroupKind::SE3, sample(rng, m.psi)) * rel;
    pb.meas.supervisory.push_back(m);
  }
  pb.filter.x0 = pb.ground_truth.front();
  pb.filter.P0 = Matrix9d::Identity() * 1e-4;
  pb.filter.keyframes = opt.keyframes;
  pb.model = mixed_noise_model();
  return pb;
}

inline supcal::RealizedNoise default_truth_noise() {
  supcal::RealizedNoise n;
  n.Q_g = Eigen::Matrix3d::Identity() * 1e-5;
  n.Q_a = Eigen::Matrix3d::Identity() * 1e-3;
  n.Sigma_u = Eigen::Matrix3d::Identity() * 0.04;
  n.Sigma_b = supcal::Matrix6d::Identity() * 1e-4;
  n.Sigma_b.bottomRightCorner<3, 3>() *= 4.0;
  return n;
}

inline supcal::FixedNoise as_fixed(const supcal::RealizedNoise& n) {
  return {n.Q_g, n.Q_a, n.Sigma_u, n.Sigma_b};
}

// Encoded truth covariances after a random congruence, so gradients are not small.
inline Eigen::VectorXd test_theta(const supcal::Problem& pb, std::mt19937& rng) {
  auto nudge = [&](const Eigen::MatrixXd& M) {
    const int n = static_cast<int>(M.rows());
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) * std::exp(0.3 * random_vector(rng, 1)[0]);
    A += 0.1 * Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return random_vector(rng, 1)[0]; });
    return Eigen::MatrixXd(A * M * A.transpose());
  };
  const supcal::RealizedNoise t = default_truth_noise();
  supcal::FixedNoise f{nudge(t.Q_g), nudge(t.Q_a), nudge(t.Sigma_u), nudge(t.Sigma_b)};
  Eigen::VectorXd out = pb.model.encode(f);
  // keep finite-difference probes inside the box
  const Eigen::VectorXd lo = pb.model.lower().array() + 1e-4, hi = pb.model.upper().array() - 1e-4;
  return out.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace testutil
