#pragma once

#include <cstdint>
#include <vector>

#include "supcal/g2o.hpp"
#include "supcal/pipeline.hpp"

namespace supcal {

// Noise-free inputs that reproduce `poses` exactly under the strapdown step; states carry the implied velocities.
struct ImuFit {
  std::vector<ImuInput> inputs;
  std::vector<lie::GroupElement> states;  // SE2_3, one per pose
};

ImuFit fit_imu(const std::vector<lie::GroupElement>& poses, double dt,
               const Eigen::Vector3d& gravity = kDefaultGravity);

// Vertex poses ordered by id; ids must be contiguous.
std::vector<lie::GroupElement> reference_poses(const PoseGraph& g);

struct DatasetOptions {
  double dt = 0.1;
  Eigen::Matrix3d Q_g = Eigen::Matrix3d::Identity() * 1e-6;  // noise added to the fitted IMU
  Eigen::Matrix3d Q_a = Eigen::Matrix3d::Identity() * 1e-4;
  std::uint64_t seed = 0;
  SplitOptions split;
  Matrix9d P0 = Matrix9d::Identity() * 1e-6;
};

// Binary and loop records from `graph`, IMU synthesized from `reference` (one pose per vertex).
Problem dataset_problem(const PoseGraph& graph, const std::vector<lie::GroupElement>& reference,
                        const NoiseModel& model, const DatasetOptions& opt);

}  // namespace supcal
