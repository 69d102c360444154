#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "supcal/lie.hpp"
#include "supcal/noise_param.hpp"
#include "supcal/state_filter.hpp"

namespace supcal {

struct G2oVertex {
  int id = 0;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();  // unit

  lie::GroupElement pose() const;  // SE3
};

struct G2oEdge {
  int from = 0, to = 0;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Matrix6d info = Matrix6d::Identity();  // file order: (x, y, z, qx, qy, qz)

  lie::GroupElement relative() const;
};

// Records keep their file order.
struct PoseGraph {
  std::vector<G2oVertex> vertices;
  std::vector<G2oEdge> edges;
  int skipped_records = 0;  // unknown tags

  const G2oVertex* find_vertex(int id) const;
};

PoseGraph parse_g2o(std::istream& in);
PoseGraph load_g2o(const std::string& path);
// 17 significant digits, so parse(serialize(g)) reproduces every double.
std::string serialize_g2o(const PoseGraph& g);

// Tangent order is (rotation, translation); g2o information is (translation, rotation).
Matrix6d info_to_tangent_covariance(const Matrix6d& info);

struct SplitOptions {
  std::optional<double> loop_std;  // replaces the inverted information on every loop
};

// Vertex id v maps to step v - min_id. |to - from| == 1 gives a binary record, anything else a loop.
MeasurementStream split_measurements(const PoseGraph& g, const SplitOptions& opt = {});

}  // namespace supcal
