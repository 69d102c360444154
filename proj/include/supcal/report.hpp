#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "supcal/calibrate.hpp"
#include "supcal/losses.hpp"
#include "supcal/simulator.hpp"

namespace supcal::report {

inline constexpr int kSchemaVersion = 1;

using nlohmann::json;

json vector_json(const Eigen::VectorXd& v);
json loss_json(const LossReport& r);
json trace_json(const IterationTrace& t);
json metrics_json(const EvalMetrics& m);
json monte_carlo_json(const MonteCarloReport& r);

// Rows GPS / IMU / VO with the diagonal variances per column: "Real Noise" (when known), "Init", then one per estimate.
json theta_table(const NoiseModel& model, const FixedNoise* truth, const Eigen::VectorXd& init,
                 const std::vector<std::pair<std::string, Eigen::VectorXd>>& estimates);

// Skeleton with schema_version, command, seed and a UTC timestamp.
json header(const std::string& command, std::uint64_t seed);

// One JSON object per line: k, t, position, quaternion (w, x, y, z), velocity, trace_P.
std::string trajectory_jsonl(const std::vector<TrajectoryPoint>& traj);

// Human-readable lines for the top of a report.
std::vector<std::string> table_lines(const json& table);

void write_text(const std::string& path, const std::string& text);

}  // namespace supcal::report
