#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "supcal/calibrate.hpp"
#include "supcal/dataset.hpp"
#include "supcal/simulator.hpp"

namespace supcal {

enum class Mode { Simulate, Calibrate, Gradcheck, Evaluate, MonteCarlo };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

struct DatasetConfig {
  std::string graph;      // g2o with odometry and loop edges
  std::string reference;  // g2o whose vertices are the reference trajectory; empty = the graph's own vertices
  DatasetOptions options;
};

struct GradcheckConfig {
  double h = 1e-4;
  double tol = 1e-2;
  std::optional<Eigen::VectorXd> theta;  // defaults to the initial theta
};

struct OutputConfig {
  std::string report;      // empty = stdout
  std::string trajectory;  // JSON lines, optional
  std::string graph;       // g2o export of a simulated calibration stage, optional
};

struct RunConfig {
  std::optional<Mode> mode;
  std::uint64_t seed = 0;
  ScenarioSpec scenario;
  std::optional<DatasetConfig> dataset;
  std::vector<ParamBlock> blocks;
  FixedNoise fixed;  // targets no block covers
  FixedNoise init;   // initial covariances, encoded unless theta0 is given
  std::optional<Eigen::VectorXd> theta0;
  double condition_cap = 0.0;
  CalibrationConfig calibration;
  LoopSplit loop_split = LoopSplit::LoopPlus;
  MonteCarloSpec montecarlo;  // blocks, theta0, scenario and optimizer are filled from the fields above
  GradcheckConfig gradcheck;
  std::optional<Eigen::VectorXd> evaluate_theta;
  OutputConfig output;
  nlohmann::json source;  // the document as read

  NoiseModel model() const;
  Eigen::VectorXd initial_theta() const;
  // Scenario with loop_split and seed applied.
  ScenarioSpec effective_scenario() const;
  MonteCarloSpec effective_montecarlo() const;
};

// Relative paths resolve against base_dir. Throws InvalidConfig (or Io for missing files).
RunConfig parse_config(const nlohmann::json& doc, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

// Accepts a number (isotropic), a list of n numbers (diagonal) or an n x n nested list (symmetric).
Eigen::MatrixXd parse_covariance(const nlohmann::json& j, int n, const std::string& key);

}  // namespace supcal
