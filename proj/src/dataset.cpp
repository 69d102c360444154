#include "supcal/dataset.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "supcal/errors.hpp"

namespace supcal {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using lie::GroupElement;

ImuFit fit_imu(const std::vector<GroupElement>& poses, double dt, const Vector3d& gravity) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "dt must be positive");
  ImuFit fit;
  if (poses.empty()) return fit;
  Vector3d v = poses.size() > 1 ? Vector3d((poses[1].position() - poses[0].position()) / dt) : Vector3d::Zero();
  fit.states.push_back(GroupElement::se2_3(poses[0].rotation(), poses[0].position(), v));
  for (size_t k = 0; k + 1 < poses.size(); ++k) {
    const Matrix3d& R = poses[k].rotation();
    const Vector3d dp = poses[k + 1].position() - poses[k].position();
    ImuInput u;
    u.dt = dt;
    u.omega = lie::so3_log(R.transpose() * poses[k + 1].rotation()) / dt;
    // p+ = p + v dt + (R a + g) dt^2 / 2 solved for a; v+ follows from the same step
    u.accel = R.transpose() * (2.0 * (dp - v * dt) / (dt * dt) - gravity);
    v = 2.0 * dp / dt - v;
    fit.inputs.push_back(u);
    fit.states.push_back(GroupElement::se2_3(poses[k + 1].rotation(), poses[k + 1].position(), v));
  }
  return fit;
}

std::vector<GroupElement> reference_poses(const PoseGraph& g) {
  std::vector<const G2oVertex*> vs;
  for (const auto& v : g.vertices) vs.push_back(&v);
  std::sort(vs.begin(), vs.end(), [](const G2oVertex* a, const G2oVertex* b) { return a->id < b->id; });
  std::vector<GroupElement> out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i > 0 && vs[i]->id != vs[i - 1]->id + 1) {
      throw Error(ErrorCode::InvalidConfig, "vertex ids are not contiguous after " + std::to_string(vs[i - 1]->id));
    }
    out.push_back(vs[i]->pose());
  }
  return out;
}

namespace {

Vector3d draw(std::mt19937_64& rng, const Matrix3d& cov) {
  std::normal_distribution<double> nd(0.0, 1.0);
  const Vector3d z(nd(rng), nd(rng), nd(rng));
  const Eigen::SelfAdjointEigenSolver<Matrix3d> es(cov);
  return es.eigenvectors() * (es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z);
}

}  // namespace

Problem dataset_problem(const PoseGraph& graph, const std::vector<GroupElement>& reference, const NoiseModel& model,
                        const DatasetOptions& opt) {
  Problem pb;
  pb.meas = split_measurements(graph, opt.split);
  if (static_cast<int>(reference.size()) != pb.meas.steps() + 1) {
    throw Error(ErrorCode::DimensionMismatch, "reference has " + std::to_string(reference.size()) +
                                                  " poses, graph spans " + std::to_string(pb.meas.steps() + 1));
  }
  const ImuFit fit = fit_imu(reference, opt.dt);
  std::mt19937_64 rng(opt.seed);
  for (ImuInput u : fit.inputs) {
    u.omega += draw(rng, opt.Q_g);
    u.accel += draw(rng, opt.Q_a);
    pb.inputs.push_back(u);
  }
  std::vector<int> kf;
  for (const auto& m : pb.meas.supervisory) {
    kf.push_back(m.i);
    kf.push_back(m.j);
  }
  std::sort(kf.begin(), kf.end());
  kf.erase(std::unique(kf.begin(), kf.end()), kf.end());
  pb.filter.x0 = fit.states.front();
  pb.filter.P0 = opt.P0;
  pb.filter.keyframes = kf;
  pb.filter.max_augmented = std::max(pb.filter.max_augmented, static_cast<int>(kf.size()));
  pb.model = model;
  pb.ground_truth = fit.states;
  return pb;
}

}  // namespace supcal
